//! TOML experiment files and command-line overrides.
//!
//! A file looks like
//!
//! ```toml
//! env = "cartpole"
//! episodes = 1000
//! seeds = 5          # or an explicit list: [3, 7, 11]
//! window = 50
//!
//! [sampler]
//! strategy = "ier"
//! B = 64
//! G = 50
//! p = 0.0
//!
//! [agent]
//! lr = 5e-5
//! ```
//!
//! Every key is optional except `env` and `sampler.strategy`, which may also
//! come from `--env` and `--sampler`. Omitted keys take the environment's
//! preset values. Unknown keys are rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ier_core::agents::UpdateRule;
use ier_core::envs::EnvId;
use ier_core::harness::ExperimentConfig;
use ier_core::samplers::{FillMode, PivotMode, Strategy};
use serde::Deserialize;

pub const DEFAULT_WINDOW: usize = 50;
pub const DEFAULT_SEED_COUNT: u64 = 5;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub env: Option<EnvId>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<SeedSpec>,
    pub gamma: Option<f64>,
    pub buffer_capacity: Option<usize>,
    pub eval_every: Option<usize>,
    pub window: Option<usize>,
    pub log_samples: Option<bool>,
    pub dump_surprise: Option<bool>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub agent: AgentSection,
}

/// Either a seed count (counting up from `seed`) or an explicit list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub strategy: Option<Strategy>,
    #[serde(alias = "B")]
    pub batch_size: Option<usize>,
    #[serde(alias = "G")]
    pub grad_steps: Option<usize>,
    #[serde(alias = "p")]
    pub mixing_p: Option<f64>,
    pub pivot_mode: Option<PivotMode>,
    pub fill_mode: Option<FillMode>,
    #[serde(alias = "alpha")]
    pub per_alpha: Option<f64>,
    #[serde(alias = "beta")]
    pub per_beta: Option<f64>,
    pub per_epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub lr: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub target_update_every: Option<u64>,
    pub eps_max: Option<f64>,
    pub eps_min: Option<f64>,
    pub decay_ratio: Option<f64>,
    pub total_env_steps: Option<u64>,
    pub tabular_update: Option<UpdateRule>,
}

/// Values given on the command line; each one wins over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub env: Option<EnvId>,
    pub sampler: Option<Strategy>,
    pub seeds: Option<u64>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub batch_size: Option<usize>,
    pub grad_steps: Option<usize>,
    pub p: Option<f64>,
    pub pivot_mode: Option<PivotMode>,
    pub fill_mode: Option<FillMode>,
    pub lr: Option<f64>,
    pub window: Option<usize>,
    pub tabular_update: Option<UpdateRule>,
}

/// Everything a `run` invocation needs.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub window: usize,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Merge with overrides on top of the environment preset and validate.
    pub fn resolve(self, overrides: &Overrides) -> Result<RunPlan> {
        let Some(env) = overrides.env.or(self.env) else {
            bail!("missing `env` (set it in the config or pass --env)");
        };
        let Some(strategy) = overrides.sampler.or(self.sampler.strategy) else {
            bail!("missing `sampler.strategy` (set it in the config or pass --sampler)");
        };
        let mut config = match env {
            EnvId::CartPole => ExperimentConfig::cartpole(strategy),
            EnvId::GridWorld => online_gridworld(strategy),
        };

        let s = &self.sampler;
        let spec = &mut config.sampler;
        set(&mut spec.batch_size, overrides.batch_size.or(s.batch_size));
        set(&mut spec.grad_steps, overrides.grad_steps.or(s.grad_steps));
        set(&mut spec.mixing_p, overrides.p.or(s.mixing_p));
        set(&mut spec.pivot_mode, overrides.pivot_mode.or(s.pivot_mode));
        set(&mut spec.fill_mode, overrides.fill_mode.or(s.fill_mode));
        set(&mut spec.per_alpha, s.per_alpha);
        set(&mut spec.per_beta, s.per_beta);
        set(&mut spec.per_epsilon, s.per_epsilon);

        let a = self.agent;
        let agent = &mut config.agent;
        set(&mut agent.lr, overrides.lr.or(a.lr));
        set(&mut agent.hidden, a.hidden);
        set(&mut agent.target_update_every, a.target_update_every);
        set(&mut agent.eps_max, a.eps_max);
        set(&mut agent.eps_min, a.eps_min);
        set(&mut agent.decay_ratio, a.decay_ratio);
        if a.total_env_steps.is_some() {
            agent.total_env_steps = a.total_env_steps;
        }
        set(&mut agent.tabular_update, overrides.tabular_update.or(a.tabular_update));

        set(&mut config.episodes, overrides.episodes.or(self.episodes));
        set(&mut config.gamma, self.gamma);
        set(&mut config.buffer_capacity, self.buffer_capacity);
        set(&mut config.eval_every, self.eval_every);
        set(&mut config.log_samples, self.log_samples);
        set(&mut config.dump_surprise, self.dump_surprise);

        let base = overrides.seed.or(self.seed).unwrap_or(0);
        let seeds = match (overrides.seeds, self.seeds) {
            (Some(n), _) | (None, Some(SeedSpec::Count(n))) => (0..n).map(|i| base + i).collect(),
            (None, Some(SeedSpec::List(list))) => list,
            (None, None) => (0..DEFAULT_SEED_COUNT).map(|i| base + i).collect(),
        };
        if seeds.is_empty() {
            bail!("at least one seed is required");
        }
        config.seed = seeds[0];

        let window = overrides.window.or(self.window).unwrap_or(DEFAULT_WINDOW);
        if window == 0 {
            bail!("window must be at least 1");
        }
        config.validate()?;
        Ok(RunPlan { config, seeds, window })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Online GridWorld: the toy's tabular settings, collected episode by
/// episode instead of from a frozen random buffer.
fn online_gridworld(strategy: Strategy) -> ExperimentConfig {
    let mut config = ExperimentConfig::gridworld_toy(strategy);
    config.agent.eps_max = 1.0;
    config.agent.eps_min = 0.3;
    config.agent.decay_ratio = 0.4;
    config.buffer_capacity = 1_000_000;
    config
}
