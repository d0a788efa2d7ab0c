//! Experiment drivers.
//!
//! [`run_online`] alternates between collecting one episode with the current
//! ε-greedy policy and running `G` learner steps on batches planned by the
//! configured sampler. [`run_offline_toy`] trains a tabular agent on a frozen
//! random-walk GridWorld buffer and counts how often each state is replayed.

use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{DqnConfig, DqnLearner, EpsilonSchedule, TabularQ, TrainStats, UpdateRule};
use crate::envs::{collect_random_buffer, EnvId, Environment, GridWorld1D};
use crate::error::{Error, Result};
use crate::importance::{score_buffer, surprise_rows, ActionValues, SurpriseRow};
use crate::replay::{Batch, Observation, ReplayBuffer, Transition};
use crate::samplers::{
    plan_ier, plan_oer, plan_per, plan_rer, plan_uer, EpochPlan, PerMemory, RerCursor, SamplerSpec, Strategy,
};
use crate::{rng_from_seed, Rng};

/// Runs abort once any |Q| exceeds this.
pub const DIVERGENCE_Q_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub lr: f64,
    /// Hidden layer widths of the Q-network (ignored by the tabular agent).
    pub hidden: Vec<usize>,
    pub target_update_every: u64,
    pub eps_max: f64,
    pub eps_min: f64,
    pub decay_ratio: f64,
    /// Environment-step budget the ε decay is measured against. Defaults to
    /// `episodes * max_episode_steps`.
    pub total_env_steps: Option<u64>,
    #[serde(default)]
    pub tabular_update: UpdateRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvId,
    pub sampler: SamplerSpec,
    pub agent: AgentParams,
    /// Episodes for online runs; epochs for the offline toy protocol.
    pub episodes: usize,
    pub seed: u64,
    pub gamma: f64,
    /// Replay capacity; for the toy protocol, the size of the random buffer.
    pub buffer_capacity: usize,
    /// Greedy evaluation episode every this many episodes (0 disables).
    pub eval_every: usize,
    /// Keep every sampled buffer index in the run record.
    pub log_samples: bool,
    /// Record (TD error, reward) pairs for the last epoch's sampled indices.
    pub dump_surprise: bool,
}

impl ExperimentConfig {
    /// CartPole with the DQN settings: 1000 episodes of 50 gradient steps on
    /// batches of 64, a (8, 5) network, lr 5e-5, γ 0.9.
    pub fn cartpole(strategy: Strategy) -> Self {
        let mut sampler = SamplerSpec::new(strategy, 64, 50);
        sampler.per_alpha = 0.4;
        sampler.per_beta = 0.6;
        Self {
            env: EnvId::CartPole,
            sampler,
            agent: AgentParams {
                lr: 5e-5,
                hidden: vec![8, 5],
                target_update_every: 30,
                eps_max: 1.0,
                eps_min: 0.01,
                decay_ratio: 0.4,
                total_env_steps: None,
                tabular_update: UpdateRule::Sequential,
            },
            episodes: 1000,
            seed: 0,
            gamma: 0.9,
            buffer_capacity: 1_000_000,
            eval_every: 0,
            log_samples: false,
            dump_surprise: false,
        }
    }

    /// GridWorld toy protocol: 30000 random transitions, 100 epochs, batches
    /// of 64, lr 0.1, γ 0.99.
    pub fn gridworld_toy(strategy: Strategy) -> Self {
        Self {
            env: EnvId::GridWorld,
            sampler: SamplerSpec::new(strategy, 64, TOY_GRAD_STEPS),
            agent: AgentParams {
                lr: 0.1,
                hidden: vec![8, 5],
                target_update_every: 1,
                eps_max: 0.3,
                eps_min: 0.3,
                decay_ratio: 0.0,
                total_env_steps: None,
                tabular_update: UpdateRule::Sequential,
            },
            episodes: 100,
            seed: 0,
            gamma: 0.99,
            buffer_capacity: 30_000,
            eval_every: 0,
            log_samples: false,
            dump_surprise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.buffer_capacity == 0 {
            return bad("buffer capacity must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("discount {} outside [0, 1)", self.gamma));
        }
        let a = &self.agent;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", a.lr));
        }
        if !(0.0 <= a.eps_min && a.eps_min <= a.eps_max && a.eps_max <= 1.0) {
            return bad(format!("epsilon range [{}, {}] invalid", a.eps_min, a.eps_max));
        }
        if !(0.0..=1.0).contains(&a.decay_ratio) {
            return bad(format!("decay ratio {} outside [0, 1]", a.decay_ratio));
        }
        if a.hidden.iter().any(|&h| h == 0 || h > 256) {
            return bad("hidden layer widths must lie in 1..=256".into());
        }
        Ok(())
    }

    fn epsilon_schedule(&self, max_episode_steps: usize) -> EpsilonSchedule {
        let total = self.agent.total_env_steps.unwrap_or((self.episodes * max_episode_steps) as u64);
        EpsilonSchedule::from_ratio(self.agent.eps_max, self.agent.eps_min, self.agent.decay_ratio, total)
    }
}

/// Gradient steps per toy epoch. Not fixed by the toy hyperparameter table;
/// chosen so that OER's `B * G` budget covers a small fraction of the
/// buffer.
pub const TOY_GRAD_STEPS: usize = 10;

/// Outcome of one seeded online experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// Undiscounted return per episode.
    pub returns: Vec<f64>,
    /// Mean learner loss per episode; `None` when no step ran.
    pub loss_means: Vec<Option<f64>>,
    pub wall_ms: Vec<f64>,
    /// Buffer indices sampled during each episode's learning phase.
    pub sampled_indices: Option<Vec<Vec<usize>>>,
    /// `(episode, greedy return)` for periodic evaluation episodes.
    pub eval_returns: Vec<(usize, f64)>,
    pub surprise: Vec<SurpriseRow>,
    pub learner_steps: u64,
    pub diverged: bool,
    pub failure: Option<String>,
}

impl RunRecord {
    fn new(seed: u64, log_samples: bool) -> Self {
        Self {
            seed,
            returns: Vec::new(),
            loss_means: Vec::new(),
            wall_ms: Vec::new(),
            sampled_indices: log_samples.then(Vec::new),
            eval_returns: Vec::new(),
            surprise: Vec::new(),
            learner_steps: 0,
            diverged: false,
            failure: None,
        }
    }

    /// A record for a run that failed before producing any episode.
    pub fn failed(seed: u64, message: String) -> Self {
        let mut record = Self::new(seed, false);
        record.diverged = true;
        record.failure = Some(message);
        record
    }

    pub fn episodes(&self) -> usize {
        self.returns.len()
    }
}

/// The two learners behind one interface.
#[derive(Clone, Debug)]
pub enum Learner {
    Tabular { q: TabularQ, epsilon: EpsilonSchedule },
    Dqn(DqnLearner),
}

impl Learner {
    pub fn act(&self, state: &Observation, rng: &mut Rng, env_step: u64) -> usize {
        match self {
            Learner::Dqn(dqn) => dqn.act(state, rng, env_step),
            Learner::Tabular { q, epsilon } => {
                let explore = rng.random::<f64>() < epsilon.value(env_step);
                if explore {
                    rng.random_range(0..ActionValues::num_actions(q))
                } else {
                    q.greedy_action(state.as_discrete().expect("discrete observation"))
                }
            }
        }
    }

    pub fn train(&mut self, batch: &Batch<'_>) -> Result<TrainStats> {
        match self {
            Learner::Dqn(dqn) => dqn.train_step(batch),
            Learner::Tabular { q, .. } => {
                let gamma = q.gamma;
                let td_abs: Vec<f64> =
                    batch.transitions.iter().map(|t| crate::importance::td_error(q, t, gamma)).collect();
                let loss =
                    td_abs.iter().zip(&batch.weights).map(|(d, w)| w * d * d).sum::<f64>() / batch.len() as f64;
                q.update(batch);
                Ok(TrainStats { loss, td_abs, max_abs_q: q.max_abs() })
            }
        }
    }
}

impl ActionValues for Learner {
    fn num_actions(&self) -> usize {
        match self {
            Learner::Tabular { q, .. } => q.num_actions(),
            Learner::Dqn(d) => d.num_actions(),
        }
    }

    fn q_value(&self, state: &Observation, action: usize) -> f64 {
        match self {
            Learner::Tabular { q, .. } => q.q_value(state, action),
            Learner::Dqn(d) => d.q_value(state, action),
        }
    }

    fn max_target_q(&self, state: &Observation) -> f64 {
        match self {
            Learner::Tabular { q, .. } => q.max_target_q(state),
            Learner::Dqn(d) => d.max_target_q(state),
        }
    }
}

fn build_learner(config: &ExperimentConfig, env: &dyn Environment, rng: &mut Rng) -> Learner {
    let epsilon = config.epsilon_schedule(env.max_steps());
    match config.env {
        EnvId::GridWorld => Learner::Tabular {
            q: TabularQ::new(GridWorld1D::SIZE, env.num_actions(), config.agent.lr, config.gamma)
                .with_rule(config.agent.tabular_update),
            epsilon,
        },
        EnvId::CartPole => {
            let dqn = DqnConfig {
                hidden: config.agent.hidden.clone(),
                lr: config.agent.lr,
                gamma: config.gamma,
                target_update_every: config.agent.target_update_every,
                epsilon,
            };
            Learner::Dqn(DqnLearner::new(env.observation_dim(), env.num_actions(), dqn, rng))
        }
    }
}

/// Sampler state that persists across epochs.
struct SamplerState {
    rer: RerCursor,
    per: Option<PerMemory>,
}

impl SamplerState {
    fn new(spec: &SamplerSpec, capacity: usize) -> Self {
        let per = (spec.strategy == Strategy::Per).then(|| PerMemory::new(capacity));
        Self { rer: RerCursor::new(), per }
    }

    fn on_push(&mut self, buffer: &ReplayBuffer, index: usize) {
        if let Some(per) = &mut self.per {
            per.insert(buffer.slot_of(index));
        }
    }

    /// Plan an epoch. PER plans one batch at a time (see [`run_epoch`]), so
    /// this is only called for the other strategies.
    fn plan(
        &mut self,
        spec: &SamplerSpec,
        learner: &Learner,
        buffer: &ReplayBuffer,
        gamma: f64,
        episode: u64,
        rng: &mut Rng,
    ) -> Result<EpochPlan> {
        match spec.strategy {
            Strategy::Uer => plan_uer(buffer.len(), spec, rng),
            Strategy::Rer => plan_rer(&mut self.rer, buffer.len(), spec),
            Strategy::Oer => {
                let scores = score_buffer(learner, buffer, gamma, episode)?;
                plan_oer(&scores.scores, buffer.len(), spec)
            }
            Strategy::Ier => {
                let scores = score_buffer(learner, buffer, gamma, episode)?;
                plan_ier(&scores.scores, buffer.len(), spec, rng)
            }
            Strategy::Per => unreachable!("PER batches are planned per step"),
        }
    }
}

/// Summary of one epoch's learning phase.
#[derive(Default)]
struct EpochOutcome {
    steps: u64,
    loss_sum: f64,
    sampled: Vec<usize>,
    divergence: Option<String>,
}

fn train_one(learner: &mut Learner, batch: &Batch<'_>, outcome: &mut EpochOutcome) -> Result<Option<TrainStats>> {
    outcome.sampled.extend_from_slice(&batch.indices);
    match learner.train(batch) {
        Ok(stats) => {
            outcome.steps += 1;
            if !stats.loss.is_finite() || stats.max_abs_q > DIVERGENCE_Q_LIMIT {
                outcome.divergence = Some(format!("loss {} with |Q| up to {}", stats.loss, stats.max_abs_q));
            } else {
                outcome.loss_sum += stats.loss;
            }
            Ok(Some(stats))
        }
        Err(Error::Divergence(msg)) => {
            outcome.steps += 1;
            outcome.divergence = Some(msg);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Plan and execute `G` learner steps. Scores for IER and OER come from the
/// learner as it stands before the epoch's first step. Stops early on
/// divergence.
fn run_epoch(
    spec: &SamplerSpec,
    learner: &mut Learner,
    buffer: &ReplayBuffer,
    state: &mut SamplerState,
    gamma: f64,
    episode: u64,
    rng: &mut Rng,
) -> Result<EpochOutcome> {
    let mut outcome = EpochOutcome::default();
    if spec.strategy == Strategy::Per {
        // one batch at a time so each step sees the previous step's priorities
        let mut step_spec = spec.clone();
        step_spec.grad_steps = 1;
        let per = state.per.as_mut().expect("PER memory");
        for _ in 0..spec.grad_steps {
            let plan = plan_per(&per.tree, buffer.len(), &step_spec, rng)?;
            let slots = &plan.batches[0];
            let indices = slots
                .iter()
                .map(|&slot| buffer.index_of_slot(slot).ok_or(Error::IndexOutOfRange { index: slot, len: buffer.len() }))
                .collect::<Result<Vec<_>>>()?;
            let batch = buffer.weighted_batch(indices, plan.batch_weights(0))?;
            if let Some(stats) = train_one(learner, &batch, &mut outcome)? {
                for (&slot, &td) in slots.iter().zip(&stats.td_abs) {
                    per.update(slot, td, spec);
                }
            }
            if outcome.divergence.is_some() {
                break;
            }
        }
    } else {
        let plan = state.plan(spec, learner, buffer, gamma, episode, rng)?;
        for g in 0..plan.len() {
            let batch = buffer.weighted_batch(plan.batches[g].clone(), plan.batch_weights(g))?;
            train_one(learner, &batch, &mut outcome)?;
            if outcome.divergence.is_some() {
                break;
            }
        }
    }
    Ok(outcome)
}

/// Roll out one episode with the learner's ε-greedy policy, pushing every
/// transition. Returns the undiscounted return.
fn collect_episode(
    env: &mut dyn Environment,
    learner: &Learner,
    buffer: &mut ReplayBuffer,
    sampler: &mut SamplerState,
    episode: u64,
    env_steps: &mut u64,
    rng: &mut Rng,
) -> Result<f64> {
    let mut state = env.reset(rng);
    let mut total = 0.0;
    for step_index in 0.. {
        let action = learner.act(&state, rng, *env_steps);
        let step = env.step(action)?;
        *env_steps += 1;
        total += step.reward;
        let over = step.episode_over();
        let next_state = step.next_state;
        let index = buffer.push(Transition {
            state,
            action,
            reward: step.reward,
            next_state: next_state.clone(),
            done: step.done,
            truncated: step.truncated,
            episode_id: episode,
            step_index,
        });
        sampler.on_push(buffer, index);
        if over {
            break;
        }
        state = next_state;
    }
    Ok(total)
}

/// Undiscounted return of one greedy episode.
fn greedy_return(env: &mut dyn Environment, learner: &Learner, rng: &mut Rng) -> Result<f64> {
    let mut state = env.reset(rng);
    let mut total = 0.0;
    loop {
        let action = match learner {
            Learner::Dqn(dqn) => dqn.greedy_action(&state),
            Learner::Tabular { q, .. } => q.greedy_action(state.as_discrete().expect("discrete observation")),
        };
        let step = env.step(action)?;
        total += step.reward;
        if step.episode_over() {
            return Ok(total);
        }
        state = step.next_state;
    }
}

/// One online experiment: for each episode, collect with the current policy,
/// then (once the buffer holds at least `B` transitions) plan and run `G`
/// learner steps. A diverging learner stops the run and flags the record.
pub fn run_online(config: &ExperimentConfig, rng: &mut Rng) -> Result<RunRecord> {
    config.validate()?;
    let spec = &config.sampler;
    let mut eval_rng = rng_from_seed(rng.random());
    let mut env = config.env.make();
    let mut eval_env = config.env.make();
    let mut learner = build_learner(config, env.as_ref(), rng);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut sampler = SamplerState::new(spec, config.buffer_capacity);
    let mut record = RunRecord::new(config.seed, config.log_samples);
    let mut env_steps = 0u64;

    for episode in 0..config.episodes {
        let started = Instant::now();
        let ret = collect_episode(env.as_mut(), &learner, &mut buffer, &mut sampler, episode as u64, &mut env_steps, rng)?;

        let mut outcome = EpochOutcome::default();
        if spec.grad_steps > 0 && buffer.len() >= spec.batch_size {
            outcome = run_epoch(spec, &mut learner, &buffer, &mut sampler, config.gamma, episode as u64, rng)?;
        }
        if config.dump_surprise && episode + 1 == config.episodes && !outcome.sampled.is_empty() {
            record.surprise = surprise_rows(&learner, &buffer, &outcome.sampled, config.gamma)?;
        }

        record.learner_steps += outcome.steps;
        record.returns.push(ret);
        record.loss_means.push((outcome.steps > 0).then(|| outcome.loss_sum / outcome.steps as f64));
        if let Some(log) = &mut record.sampled_indices {
            log.push(std::mem::take(&mut outcome.sampled));
        }
        if config.eval_every > 0 && (episode + 1) % config.eval_every == 0 && outcome.divergence.is_none() {
            record.eval_returns.push((episode, greedy_return(eval_env.as_mut(), &learner, &mut eval_rng)?));
        }
        record.wall_ms.push(started.elapsed().as_secs_f64() * 1e3);

        if let Some(msg) = outcome.divergence {
            record.diverged = true;
            record.failure = Some(format!("episode {episode}: {msg}"));
            break;
        }
    }
    Ok(record)
}

/// Run `runner` once per seed, possibly in parallel. Results follow seed
/// order; a failing seed becomes a flagged record without touching the
/// others.
pub fn run_seeds<F>(seeds: &[u64], runner: F) -> Vec<RunRecord>
where
    F: Fn(u64) -> Result<RunRecord> + Sync,
{
    seeds
        .par_iter()
        .map(|&seed| runner(seed).unwrap_or_else(|e| RunRecord::failed(seed, e.to_string())))
        .collect()
}

/// Independent online runs, one per seed.
pub fn run_multi_seed(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<RunRecord>> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    Ok(run_seeds(seeds, |seed| {
        let mut cfg = config.clone();
        cfg.seed = seed;
        run_online(&cfg, &mut rng_from_seed(seed))
    }))
}

/// Outcome of the offline GridWorld protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyRecord {
    pub seed: u64,
    /// `absolute_frequency[s - 1]`: how often a transition leaving state `s`
    /// was sampled.
    pub absolute_frequency: Vec<u64>,
    /// State-visit histogram of the frozen buffer, same layout.
    pub buffer_frequency: Vec<u64>,
    pub q_table: TabularQ,
    pub greedy_reaches_goal: bool,
    pub greedy_steps: usize,
    /// Success rate of ε-greedy rollouts from the start state.
    pub noisy_success_rate: f64,
    pub learner_steps: u64,
}

/// Noisy evaluation rollouts per toy run.
pub const TOY_NOISY_ROLLOUTS: usize = 20;

impl ToyRecord {
    pub fn total_sampled(&self) -> u64 {
        self.absolute_frequency.iter().sum()
    }

    pub fn count(&self, state: usize) -> u64 {
        self.absolute_frequency[state - 1]
    }

    /// Total-variation distance between the sampled-state distribution and
    /// the buffer's state distribution.
    pub fn sampling_tv_distance(&self) -> f64 {
        let total_s = self.total_sampled() as f64;
        let total_b = self.buffer_frequency.iter().sum::<u64>() as f64;
        0.5 * self
            .absolute_frequency
            .iter()
            .zip(&self.buffer_frequency)
            .map(|(&s, &b)| (s as f64 / total_s - b as f64 / total_b).abs())
            .sum::<f64>()
    }

    /// Most-sampled state strictly right of the start (lowest on ties).
    pub fn goal_side_peak(&self) -> usize {
        let first = GridWorld1D::START + 1;
        (first..=GridWorld1D::SIZE).fold(first, |best, s| if self.count(s) > self.count(best) { s } else { best })
    }

    /// A never-sampled state strictly between the start and the goal-side
    /// peak.
    pub fn has_bottleneck(&self) -> bool {
        self.has_zero_between(GridWorld1D::START, self.goal_side_peak())
    }

    /// Any never-sampled state strictly between `lo` and `hi`.
    pub fn has_zero_between(&self, lo: usize, hi: usize) -> bool {
        (lo + 1..hi).any(|s| self.count(s) == 0)
    }
}

fn state_histogram(buffer: &ReplayBuffer) -> Vec<u64> {
    let mut counts = vec![0u64; GridWorld1D::SIZE];
    for t in buffer.iter() {
        counts[t.state.as_discrete().expect("gridworld state") - 1] += 1;
    }
    counts
}

/// Offline toy protocol: fill a random-walk buffer once, then train a
/// tabular agent for `config.episodes` epochs with the configured sampler,
/// counting every sampled transition's state.
pub fn run_offline_toy(config: &ExperimentConfig, rng: &mut Rng) -> Result<ToyRecord> {
    config.validate()?;
    if config.env != EnvId::GridWorld {
        return Err(Error::InvalidConfig(format!("the toy protocol needs gridworld, got {}", config.env)));
    }
    let spec = &config.sampler;
    let mut env = GridWorld1D::new();
    let buffer = collect_random_buffer(&mut env, config.buffer_capacity, rng)?;
    let mut sampler = SamplerState::new(spec, config.buffer_capacity);
    for i in 0..buffer.len() {
        sampler.on_push(&buffer, i);
    }
    let epsilon = EpsilonSchedule { max: config.agent.eps_max, min: config.agent.eps_max, decay_steps: 0 };
    let mut learner = Learner::Tabular {
        q: TabularQ::new(GridWorld1D::SIZE, 2, config.agent.lr, config.gamma).with_rule(config.agent.tabular_update),
        epsilon,
    };
    let mut frequency = vec![0u64; GridWorld1D::SIZE];
    let mut learner_steps = 0;

    if spec.strategy == Strategy::Rer && buffer.len() < spec.batch_size {
        return Err(Error::BufferTooSmall { len: buffer.len(), batch_size: spec.batch_size });
    }
    for epoch in 0..config.episodes {
        let outcome = run_epoch(spec, &mut learner, &buffer, &mut sampler, config.gamma, epoch as u64, rng)?;
        learner_steps += outcome.steps;
        for &i in &outcome.sampled {
            let s = buffer.get(i).expect("sampled index").state.as_discrete().expect("gridworld state");
            frequency[s - 1] += 1;
        }
        if let Some(msg) = outcome.divergence {
            return Err(Error::Divergence(format!("epoch {epoch}: {msg}")));
        }
    }

    let Learner::Tabular { q, .. } = learner else { unreachable!("toy learner is tabular") };
    let (greedy_reaches_goal, greedy_steps) = greedy_rollout(&q, None, rng);
    let successes = (0..TOY_NOISY_ROLLOUTS).filter(|_| greedy_rollout(&q, Some(epsilon), rng).0).count();
    Ok(ToyRecord {
        seed: config.seed,
        absolute_frequency: frequency,
        buffer_frequency: state_histogram(&buffer),
        q_table: q,
        greedy_reaches_goal,
        greedy_steps,
        noisy_success_rate: successes as f64 / TOY_NOISY_ROLLOUTS as f64,
        learner_steps,
    })
}

/// Roll out from the start state; greedy unless an ε schedule is given.
/// Returns whether the goal was reached and the number of steps taken.
fn greedy_rollout(q: &TabularQ, noise: Option<EpsilonSchedule>, rng: &mut Rng) -> (bool, usize) {
    let mut env = GridWorld1D::new();
    let mut state = env.reset(rng).as_discrete().expect("gridworld state");
    for steps in 1..=GridWorld1D::MAX_STEPS {
        let explore = noise.is_some_and(|eps| rng.random::<f64>() < eps.value(0));
        let action = if explore { rng.random_range(0..2) } else { q.greedy_action(state) };
        let step = env.step(action).expect("episode still running");
        if step.done {
            return (true, steps);
        }
        if step.truncated {
            break;
        }
        state = step.next_state.as_discrete().expect("gridworld state");
    }
    (false, GridWorld1D::MAX_STEPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_cartpole(strategy: Strategy, episodes: usize, grad_steps: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::cartpole(strategy);
        c.episodes = episodes;
        c.sampler.batch_size = 16;
        c.sampler.grad_steps = grad_steps;
        c
    }

    #[test]
    fn learner_steps_follow_the_epoch_budget() {
        for strategy in [Strategy::Uer, Strategy::Rer, Strategy::Oer, Strategy::Per, Strategy::Ier] {
            let config = short_cartpole(strategy, 12, 3);
            let record = run_online(&config, &mut rng_from_seed(4)).unwrap();
            assert_eq!(record.episodes(), 12);
            // the first episode always has at least 8 steps, and B = 16, so
            // learning may start only once two episodes are in the buffer
            let learning_episodes = record.loss_means.iter().filter(|l| l.is_some()).count() as u64;
            assert_eq!(record.learner_steps, 3 * learning_episodes, "{strategy}");
            assert!(learning_episodes >= 10, "{strategy}");
            assert!(record.loss_means[0].is_none());
            assert!(!record.diverged);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let mut config = short_cartpole(Strategy::Ier, 8, 2);
        config.log_samples = true;
        let a = run_online(&config, &mut rng_from_seed(11)).unwrap();
        let b = run_online(&config, &mut rng_from_seed(11)).unwrap();
        assert_eq!(a.returns, b.returns);
        assert_eq!(a.loss_means, b.loss_means);
        assert_eq!(a.sampled_indices, b.sampled_indices);
        let c = run_online(&config, &mut rng_from_seed(12)).unwrap();
        assert_ne!(a.returns, c.returns);
    }

    #[test]
    fn zero_grad_steps_only_collects() {
        let config = short_cartpole(Strategy::Uer, 5, 0);
        let record = run_online(&config, &mut rng_from_seed(0)).unwrap();
        assert_eq!(record.learner_steps, 0);
        assert!(record.loss_means.iter().all(Option::is_none));
        assert_eq!(record.returns.len(), 5);
    }

    #[test]
    fn collection_does_not_depend_on_the_sampler_before_learning() {
        // with G = 0 nothing is trained, so every sampler sees the same data
        let base = run_online(&short_cartpole(Strategy::Uer, 6, 0), &mut rng_from_seed(3)).unwrap();
        for strategy in [Strategy::Rer, Strategy::Oer, Strategy::Per, Strategy::Ier] {
            let other = run_online(&short_cartpole(strategy, 6, 0), &mut rng_from_seed(3)).unwrap();
            assert_eq!(other.returns, base.returns, "{strategy}");
        }
    }

    #[test]
    fn epoch_scores_are_snapshotted_before_training() {
        let config = short_cartpole(Strategy::Oer, 4, 0);
        let mut rng = rng_from_seed(2);
        let mut env = config.env.make();
        let mut learner = build_learner(&config, env.as_ref(), &mut rng);
        let mut buffer = ReplayBuffer::new(1000);
        let mut sampler = SamplerState::new(&config.sampler, 1000);
        let mut steps = 0;
        for episode in 0..4 {
            collect_episode(env.as_mut(), &learner, &mut buffer, &mut sampler, episode, &mut steps, &mut rng).unwrap();
        }
        let mut spec = config.sampler.clone();
        spec.grad_steps = 4;
        let before = score_buffer(&learner, &buffer, config.gamma, 0).unwrap();
        let expected = plan_oer(&before.scores, buffer.len(), &spec).unwrap();
        let outcome = run_epoch(&spec, &mut learner, &buffer, &mut sampler, config.gamma, 0, &mut rng).unwrap();
        assert_eq!(outcome.sampled, expected.batches.concat());
        assert_ne!(score_buffer(&learner, &buffer, config.gamma, 0).unwrap(), before);
    }

    #[test]
    fn multi_seed_runs_are_isolated() {
        let config = short_cartpole(Strategy::Uer, 6, 2);
        let together = run_multi_seed(&config, &[5, 6, 7]).unwrap();
        let mut alone = config.clone();
        alone.seed = 6;
        let single = run_online(&alone, &mut rng_from_seed(6)).unwrap();
        assert_eq!(together[1].returns, single.returns);
        assert_eq!(together.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 6, 7]);
        assert!(run_multi_seed(&config, &[]).is_err());
    }

    #[test]
    fn failing_seed_is_flagged_without_stopping_others() {
        let records = run_seeds(&[1, 2, 3], |seed| {
            if seed == 2 {
                Err(Error::Divergence("forced".into()))
            } else {
                Ok(RunRecord::new(seed, false))
            }
        });
        assert_eq!(records.iter().map(|r| r.diverged).collect::<Vec<_>>(), vec![false, true, false]);
        assert!(records[1].failure.as_deref().unwrap().contains("forced"));
    }

    #[test]
    fn divergence_aborts_and_flags() {
        let mut config = short_cartpole(Strategy::Uer, 40, 5);
        config.agent.lr = 1e12;
        let record = run_online(&config, &mut rng_from_seed(1)).unwrap();
        assert!(record.diverged);
        assert!(record.episodes() < 40);
        assert!(record.failure.is_some());
    }

    #[test]
    fn toy_counts_match_sampled_transitions() {
        for strategy in [Strategy::Uer, Strategy::Rer, Strategy::Oer, Strategy::Per, Strategy::Ier] {
            let mut config = ExperimentConfig::gridworld_toy(strategy);
            config.episodes = 5;
            let record = run_offline_toy(&config, &mut rng_from_seed(8)).unwrap();
            assert_eq!(record.absolute_frequency.len(), 40);
            assert_eq!(record.total_sampled(), (5 * config.sampler.grad_steps * 64) as u64, "{strategy}");
            assert_eq!(record.learner_steps, (5 * config.sampler.grad_steps) as u64);
            assert_eq!(record.buffer_frequency.iter().sum::<u64>(), 30_000);
            assert_eq!(record.count(40), 0);
        }
    }

    #[test]
    fn toy_requires_gridworld() {
        let mut config = ExperimentConfig::gridworld_toy(Strategy::Uer);
        config.env = EnvId::CartPole;
        assert!(matches!(run_offline_toy(&config, &mut rng_from_seed(0)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn online_gridworld_uses_tabular_learner() {
        let mut config = ExperimentConfig::gridworld_toy(Strategy::Rer);
        config.episodes = 3;
        config.buffer_capacity = 5000;
        let record = run_online(&config, &mut rng_from_seed(0)).unwrap();
        assert_eq!(record.episodes(), 3);
        assert!(record.returns.iter().all(|r| r.is_finite()));
    }

    #[test]
    fn bottleneck_helpers() {
        let mut record = ToyRecord {
            seed: 0,
            absolute_frequency: vec![5; 40],
            buffer_frequency: vec![1; 40],
            q_table: TabularQ::new(40, 2, 0.1, 0.99),
            greedy_reaches_goal: false,
            greedy_steps: 0,
            noisy_success_rate: 0.0,
            learner_steps: 0,
        };
        assert!(!record.has_bottleneck());
        record.absolute_frequency[35] = 50; // state 36 is the peak
        record.absolute_frequency[19] = 0; // state 20 never sampled
        assert_eq!(record.goal_side_peak(), 36);
        assert!(record.has_bottleneck());
        assert!(record.has_zero_between(3, 40));
        assert!(!record.has_zero_between(20, 40));
        record.absolute_frequency = vec![1; 40];
        assert_eq!(record.sampling_tv_distance(), 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = ExperimentConfig::cartpole(Strategy::Uer);
        c.gamma = 1.0;
        assert!(run_online(&c, &mut rng_from_seed(0)).is_err());
        let mut c = ExperimentConfig::cartpole(Strategy::Ier);
        c.sampler.mixing_p = 1.5;
        assert!(run_multi_seed(&c, &[1]).is_err());
    }
}
