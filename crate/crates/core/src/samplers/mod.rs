//! Replay samplers. Each planner turns a buffer length (plus TD scores, a
//! cursor or a priority tree, depending on the strategy) into an
//! [`EpochPlan`]: the index batches for one epoch of gradient steps.

mod ier;
mod oer;
mod per;
mod rer;
mod sum_tree;
mod uer;

use std::cmp::Ordering;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ier::plan_ier;
pub use oer::plan_oer;
pub use per::{per_priority, plan_per, per_update, PerMemory};
pub use rer::{plan_rer, RerCursor};
pub use sum_tree::SumTree;
pub use uer::plan_uer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Uer,
    Rer,
    Oer,
    Per,
    Ier,
}

/// How IER picks the anchors of its batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotMode {
    #[default]
    TdTop,
    Uniform,
}

/// How IER fills a batch around its pivot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillMode {
    #[default]
    LookBack,
    LookForward,
    Uniform,
}

text_enum!(Strategy { Uer => "uer", Rer => "rer", Oer => "oer", Per => "per", Ier => "ier" });
text_enum!(PivotMode { TdTop => "td_top", Uniform => "uniform" });
text_enum!(FillMode { LookBack => "look_back", LookForward => "look_forward", Uniform => "uniform" });

/// Declarative sampler configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub strategy: Strategy,
    /// Transitions per batch (B).
    pub batch_size: usize,
    /// Gradient steps per epoch (G).
    pub grad_steps: usize,
    /// Fraction of an IER epoch's batches drawn uniformly instead of
    /// pivot-anchored.
    pub mixing_p: f64,
    pub pivot_mode: PivotMode,
    pub fill_mode: FillMode,
    pub per_alpha: f64,
    pub per_beta: f64,
    pub per_epsilon: f64,
}

impl SamplerSpec {
    pub fn new(strategy: Strategy, batch_size: usize, grad_steps: usize) -> Self {
        Self {
            strategy,
            batch_size,
            grad_steps,
            mixing_p: 0.0,
            pivot_mode: PivotMode::TdTop,
            fill_mode: FillMode::LookBack,
            per_alpha: 0.4,
            per_beta: 0.6,
            per_epsilon: 1e-6,
        }
    }

    /// `grad_steps = 0` is accepted and yields empty plans (collection only).
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.mixing_p) {
            return bad(format!("mixing fraction {} outside [0, 1]", self.mixing_p));
        }
        if !(self.per_alpha >= 0.0 && self.per_alpha.is_finite()) {
            return bad(format!("PER alpha {} must be a nonnegative number", self.per_alpha));
        }
        if !(0.0..=1.0).contains(&self.per_beta) {
            return bad(format!("PER beta {} outside [0, 1]", self.per_beta));
        }
        if !(self.per_epsilon > 0.0 && self.per_epsilon.is_finite()) {
            return bad(format!("PER epsilon {} must be positive", self.per_epsilon));
        }
        Ok(())
    }

    /// Number of pivot-anchored batches in an IER epoch: the count of
    /// `g < (1 - p) * G`, i.e. `ceil((1 - p) * G)`.
    pub fn pivot_batch_count(&self) -> usize {
        let x = (1.0 - self.mixing_p) * self.grad_steps as f64;
        // absorb representation error such as (1 - 0.3) * 10 = 7.000000000000001
        let count = (x - 1e-9).ceil().max(0.0) as usize;
        count.min(self.grad_steps)
    }
}

/// The batches for one epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochPlan {
    pub batches: Vec<Vec<usize>>,
    /// Anchors of the IER / OER selection; empty for UER and RER.
    pub pivot_indices: Vec<usize>,
    /// Importance-sampling weights per batch (PER only).
    pub weights: Option<Vec<Vec<f64>>>,
}

impl EpochPlan {
    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    /// Weights for batch `g`, defaulting to all ones.
    pub fn batch_weights(&self, g: usize) -> Vec<f64> {
        match &self.weights {
            Some(w) => w[g].clone(),
            None => vec![1.0; self.batches[g].len()],
        }
    }
}

/// Indices sorted by descending score; ties go to the larger (more recent)
/// index. Only the first `n` are returned.
pub(crate) fn top_indices(scores: &[f64], n: usize) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| -> Ordering {
        scores[*b].total_cmp(&scores[*a]).then(b.cmp(a))
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let n = n.min(order.len());
    if n == 0 {
        return Vec::new();
    }
    if n < order.len() {
        order.select_nth_unstable_by(n - 1, cmp);
        order.truncate(n);
    }
    order.sort_unstable_by(cmp);
    order
}

/// `count` indices uniform over `0..len`, distinct unless `len < count`.
pub(crate) fn uniform_indices<R: rand::Rng + ?Sized>(rng: &mut R, len: usize, count: usize) -> Vec<usize> {
    if len >= count {
        index::sample(rng, len, count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..len)).collect()
    }
}
