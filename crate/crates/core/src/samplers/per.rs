use super::{EpochPlan, SamplerSpec, SumTree};
use crate::error::{Error, Result};

/// Leaf priority for an absolute TD error: `(|δ| + ε)^α`.
pub fn per_priority(td_abs: f64, spec: &SamplerSpec) -> f64 {
    (td_abs + spec.per_epsilon).powf(spec.per_alpha)
}

pub fn per_update(tree: &mut SumTree, index: usize, td_abs: f64, spec: &SamplerSpec) {
    tree.update(index, per_priority(td_abs, spec));
}

/// Proportional prioritized replay with stratified sampling.
///
/// The total mass is split into `B` equal segments and one leaf is drawn
/// uniformly within each. Importance weights are `(N * P(i))^-β` scaled so
/// the largest weight in each batch is 1. Returned indices are tree leaves,
/// which the caller maps to buffer positions.
pub fn plan_per<R: rand::Rng + ?Sized>(
    tree: &SumTree,
    buf_len: usize,
    spec: &SamplerSpec,
    rng: &mut R,
) -> Result<EpochPlan> {
    let total = tree.total();
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    let b = spec.batch_size;
    let segment = total / b as f64;
    let mut batches = Vec::with_capacity(spec.grad_steps);
    let mut weights = Vec::with_capacity(spec.grad_steps);
    for _ in 0..spec.grad_steps {
        let mut batch = Vec::with_capacity(b);
        let mut raw = Vec::with_capacity(b);
        for j in 0..b {
            let mass = (j as f64 + rng.random::<f64>()) * segment;
            let leaf = tree.find(mass);
            let prob = tree.get(leaf) / total;
            batch.push(leaf);
            raw.push((buf_len as f64 * prob).powf(-spec.per_beta));
        }
        let max = raw.iter().copied().fold(0.0, f64::max);
        weights.push(raw.into_iter().map(|w| w / max).collect());
        batches.push(batch);
    }
    Ok(EpochPlan { batches, pivot_indices: Vec::new(), weights: Some(weights) })
}

/// Sum tree keyed by buffer ring slot, plus the running maximum priority
/// given to newly stored transitions.
#[derive(Clone, Debug)]
pub struct PerMemory {
    pub tree: SumTree,
    max_priority: f64,
}

impl PerMemory {
    pub fn new(capacity: usize) -> Self {
        Self { tree: SumTree::new(capacity), max_priority: 1.0 }
    }

    /// Register a freshly stored transition at the current maximum priority.
    pub fn insert(&mut self, slot: usize) {
        self.tree.update(slot, self.max_priority);
    }

    pub fn update(&mut self, slot: usize, td_abs: f64, spec: &SamplerSpec) {
        let priority = per_priority(td_abs, spec);
        self.max_priority = self.max_priority.max(priority);
        self.tree.update(slot, priority);
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use crate::samplers::Strategy;

    fn spec(b: usize, g: usize, alpha: f64, beta: f64) -> SamplerSpec {
        let mut s = SamplerSpec::new(Strategy::Per, b, g);
        s.per_alpha = alpha;
        s.per_beta = beta;
        s
    }

    #[test]
    fn epsilon_keeps_zero_error_sampleable() {
        let s = spec(1, 1, 0.4, 0.6);
        let p = per_priority(0.0, &s);
        assert!(p > 0.0);
        assert!((p - 1e-6f64.powf(0.4)).abs() < 1e-15);
    }

    #[test]
    fn alpha_zero_flattens_priorities() {
        let s = spec(1, 1, 0.0, 0.6);
        assert_eq!(per_priority(0.0, &s), per_priority(17.0, &s));
    }

    #[test]
    fn weights_for_one_and_three() {
        let mut tree = SumTree::new(2);
        tree.update(0, 1.0);
        tree.update(1, 3.0);
        assert_eq!(tree.get(0) / tree.total(), 0.25);
        assert_eq!(tree.get(1) / tree.total(), 0.75);
        // B = 2 gives one draw per half of the mass: [0, 2) holds leaf 0 and
        // part of leaf 1, [2, 4) is all leaf 1
        let plan = plan_per(&tree, 2, &spec(2, 200, 1.0, 1.0), &mut rng_from_seed(4)).unwrap();
        let w = plan.weights.as_ref().unwrap();
        for (batch, weights) in plan.batches.iter().zip(w) {
            for (&leaf, &weight) in batch.iter().zip(weights) {
                if batch.contains(&0) {
                    let expected = if leaf == 0 { 1.0 } else { 1.0 / 3.0 };
                    assert!((weight - expected).abs() < 1e-12);
                } else {
                    assert_eq!(weight, 1.0);
                }
            }
        }
        assert!(plan.batches.iter().any(|b| b.contains(&0)));
    }

    #[test]
    fn equal_priorities_give_unit_weights() {
        let mut tree = SumTree::new(16);
        for i in 0..16 {
            tree.update(i, 0.7);
        }
        let plan = plan_per(&tree, 16, &spec(8, 10, 0.4, 0.6), &mut rng_from_seed(1)).unwrap();
        assert!(plan.weights.unwrap().iter().flatten().all(|&w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_mass_is_an_error() {
        let tree = SumTree::new(4);
        assert_eq!(plan_per(&tree, 4, &spec(2, 1, 1.0, 1.0), &mut rng_from_seed(0)).unwrap_err(), Error::ZeroMass);
    }

    #[test]
    fn stratified_frequencies_are_proportional() {
        let mut tree = SumTree::new(4);
        for (i, p) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            tree.update(i, p);
        }
        let draws = 100_000;
        let plan = plan_per(&tree, 4, &spec(10, draws / 10, 1.0, 0.6), &mut rng_from_seed(77)).unwrap();
        let mut counts = [0f64; 4];
        for &leaf in plan.batches.iter().flatten() {
            counts[leaf] += 1.0;
        }
        for (i, expected) in [0.1, 0.2, 0.3, 0.4].into_iter().enumerate() {
            let sigma = (draws as f64 * expected * (1.0 - expected)).sqrt();
            assert!((counts[i] - draws as f64 * expected).abs() < 3.0 * sigma, "leaf {i}: {}", counts[i]);
        }
    }

    #[test]
    fn memory_tracks_max_priority() {
        let s = spec(1, 1, 1.0, 0.6);
        let mut mem = PerMemory::new(4);
        mem.insert(0);
        assert_eq!(mem.tree.get(0), 1.0);
        mem.update(0, 5.0, &s);
        mem.insert(1);
        assert!((mem.tree.get(1) - (5.0 + 1e-6)).abs() < 1e-12);
        assert!(mem.tree.is_consistent());
    }
}
