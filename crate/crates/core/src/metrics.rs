//! Evaluation arithmetic: moving averages, top-k seed aggregation and the
//! fault-model Monte-Carlo comparison of the top-k and average metrics.

use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trailing mean with a window that grows until it is full:
/// `out[i] = mean(series[max(0, i - window + 1) ..= i])`.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("moving-average window must be at least 1".into()));
    }
    if series.is_empty() {
        return Err(Error::InvalidArgument("moving average of an empty series".into()));
    }
    Ok((0..series.len())
        .map(|i| {
            let slice = &series[(i + 1).saturating_sub(window)..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Mean of the `k` largest values.
pub fn topk_final(values: &[f64], k: usize) -> Result<f64> {
    let (top, _) = topk_selection(values, k)?;
    Ok(top)
}

/// Mean and population standard deviation of the `k` largest values.
pub fn topk_selection(values: &[f64], k: usize) -> Result<(f64, f64)> {
    if k == 0 || k > values.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", values.len())));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = &sorted[..k];
    let mean = top.iter().sum::<f64>() / k as f64;
    let var = top.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
    Ok((mean, var.sqrt()))
}

/// One algorithm in the fault model: it returns `success_value` with
/// probability `1 - fault_probability` and 0 otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultyAlgorithm {
    pub success_value: f64,
    pub fault_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultModel {
    pub algorithms: Vec<FaultyAlgorithm>,
    /// Standard deviation of Gaussian noise added to every outcome.
    pub gaussian_sigma: f64,
    pub environments: usize,
    pub seeds_per_env: usize,
    pub trials: usize,
    pub k: usize,
}

impl Default for FaultModel {
    fn default() -> Self {
        let alg = |success_value| FaultyAlgorithm { success_value, fault_probability: 0.5 };
        Self {
            algorithms: vec![alg(0.9), alg(1.0), alg(0.8)],
            gaussian_sigma: 0.0,
            environments: 20,
            seeds_per_env: 10,
            trials: 500,
            k: 3,
        }
    }
}

impl FaultModel {
    /// Index of the algorithm with the strictly largest success value.
    pub fn ground_truth(&self) -> Result<usize> {
        let best = self
            .algorithms
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.success_value.total_cmp(&b.1.success_value))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::InvalidConfig("fault model needs at least one algorithm".into()))?;
        let top = self.algorithms[best].success_value;
        if self.algorithms.iter().filter(|a| a.success_value == top).count() > 1 {
            return Err(Error::InvalidConfig("no unique best algorithm".into()));
        }
        Ok(best)
    }

    pub fn validate(&self) -> Result<()> {
        self.ground_truth()?;
        for a in &self.algorithms {
            if !(0.0..=1.0).contains(&a.fault_probability) {
                return Err(Error::InvalidConfig(format!("fault probability {} outside [0, 1]", a.fault_probability)));
            }
        }
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise sigma {} must be nonnegative", self.gaussian_sigma)));
        }
        if self.environments == 0 || self.seeds_per_env == 0 || self.trials == 0 {
            return Err(Error::InvalidConfig("environments, seeds and trials must be positive".into()));
        }
        if self.k == 0 || self.k > self.seeds_per_env {
            return Err(Error::InvalidConfig(format!("k = {} outside 1..={}", self.k, self.seeds_per_env)));
        }
        Ok(())
    }
}

/// Whether each metric picked the ground truth in one (trial, environment)
/// cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellDecision {
    pub topk_correct: bool,
    pub avg_correct: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultSimResult {
    pub topk_accuracy: f64,
    pub avg_accuracy: f64,
}

// Scores closer than this are a tie, and ties count against the metric.
const TIE_TOLERANCE: f64 = 1e-9;

fn strictly_wins(scores: &[f64], winner: usize) -> bool {
    scores.iter().enumerate().all(|(i, &s)| i == winner || scores[winner] > s + TIE_TOLERANCE)
}

/// Per-cell decisions for every (trial, environment), trial-major.
///
/// Each trial draws from its own ChaCha stream keyed by a base seed taken
/// from `rng`, so trials can run in parallel and stay reproducible.
pub fn fault_decisions(model: &FaultModel, rng: &mut crate::Rng) -> Result<Vec<CellDecision>> {
    model.validate()?;
    let truth = model.ground_truth()?;
    let base_seed: u64 = rng.random();
    let noise = Normal::new(0.0, model.gaussian_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let per_trial: Vec<Vec<CellDecision>> = (0..model.trials)
        .into_par_iter()
        .map(|trial| {
            let mut trial_rng = crate::Rng::seed_from_u64(base_seed);
            trial_rng.set_stream(trial as u64);
            let mut outcomes = vec![0.0; model.seeds_per_env];
            let mut avg_scores = vec![0.0; model.algorithms.len()];
            let mut topk_scores = vec![0.0; model.algorithms.len()];
            (0..model.environments)
                .map(|_| {
                    for (a, alg) in model.algorithms.iter().enumerate() {
                        for v in outcomes.iter_mut() {
                            let faulted = trial_rng.random::<f64>() < alg.fault_probability;
                            *v = if faulted { 0.0 } else { alg.success_value };
                            if model.gaussian_sigma > 0.0 {
                                *v += noise.sample(&mut trial_rng);
                            }
                        }
                        avg_scores[a] = outcomes.iter().sum::<f64>() / outcomes.len() as f64;
                        topk_scores[a] = topk_final(&outcomes, model.k).expect("k validated");
                    }
                    CellDecision {
                        topk_correct: strictly_wins(&topk_scores, truth),
                        avg_correct: strictly_wins(&avg_scores, truth),
                    }
                })
                .collect()
        })
        .collect();
    Ok(per_trial.into_iter().flatten().collect())
}

/// Fraction of (trial, environment) cells in which the top-k metric and the
/// plain average each rank the ground-truth algorithm strictly first.
pub fn fault_sim(model: &FaultModel, rng: &mut crate::Rng) -> Result<FaultSimResult> {
    let decisions = fault_decisions(model, rng)?;
    let n = decisions.len() as f64;
    Ok(FaultSimResult {
        topk_accuracy: decisions.iter().filter(|d| d.topk_correct).count() as f64 / n,
        avg_accuracy: decisions.iter().filter(|d| d.avg_correct).count() as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn moving_average_cases() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0], 2).unwrap(), vec![1.0, 1.5, 2.5]);
        assert_eq!(moving_average(&[4.0; 7], 3).unwrap(), vec![4.0; 7]);
        let series = [3.0, 1.0, 4.0, 1.0, 5.0];
        let full = moving_average(&series, 10).unwrap();
        assert!((full[4] - 14.0 / 5.0).abs() < 1e-15);
        assert!(moving_average(&series, 0).is_err());
        assert!(moving_average(&[], 3).is_err());
    }

    #[test]
    fn topk_cases() {
        assert_eq!(topk_final(&[9.0, 1.0, 8.0, 7.0, 2.0], 3).unwrap(), 8.0);
        assert_eq!(topk_final(&[9.0, 1.0, 8.0, 7.0, 2.0], 5).unwrap(), 5.4);
        assert_eq!(topk_final(&[9.0, 1.0, 8.0, 7.0, 2.0], 1).unwrap(), 9.0);
        assert!(topk_final(&[1.0, 2.0], 0).is_err());
        assert!(topk_final(&[1.0, 2.0], 3).is_err());
        let (mean, std) = topk_selection(&[9.0, 1.0, 8.0, 7.0, 2.0], 3).unwrap();
        assert_eq!(mean, 8.0);
        assert!((std - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fault_free_model_is_always_right() {
        let mut model = FaultModel::default();
        for a in &mut model.algorithms {
            a.fault_probability = 0.0;
        }
        model.trials = 50;
        let result = fault_sim(&model, &mut rng_from_seed(1)).unwrap();
        assert_eq!(result, FaultSimResult { topk_accuracy: 1.0, avg_accuracy: 1.0 });
    }

    #[test]
    fn full_k_reproduces_average_decisions() {
        let mut model = FaultModel::default();
        model.k = model.seeds_per_env;
        model.trials = 100;
        let decisions = fault_decisions(&model, &mut rng_from_seed(9)).unwrap();
        assert!(decisions.iter().all(|d| d.topk_correct == d.avg_correct));
    }

    #[test]
    fn model_validation() {
        let mut model = FaultModel::default();
        model.algorithms[0].success_value = 1.0;
        assert!(model.validate().is_err());
        let mut model = FaultModel::default();
        model.k = 11;
        assert!(model.validate().is_err());
        let mut model = FaultModel::default();
        model.algorithms[2].fault_probability = 1.5;
        assert!(model.validate().is_err());
        assert_eq!(FaultModel::default().ground_truth().unwrap(), 1);
    }

    #[test]
    fn seeded_runs_repeat() {
        let mut model = FaultModel::default();
        model.trials = 40;
        model.gaussian_sigma = 0.2;
        let a = fault_sim(&model, &mut rng_from_seed(5)).unwrap();
        let b = fault_sim(&model, &mut rng_from_seed(5)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn moving_average_preserves_length_and_unit_window(series in prop::collection::vec(-100.0f64..100.0, 1..60), w in 1usize..80) {
            let out = moving_average(&series, w).unwrap();
            prop_assert_eq!(out.len(), series.len());
            prop_assert_eq!(moving_average(&series, 1).unwrap(), series.clone());
        }

        #[test]
        fn topk_is_permutation_invariant_and_monotone(
            values in prop::collection::vec(-50.0f64..50.0, 1..20),
            k_frac in 0.0f64..1.0,
            bump in 0.0f64..10.0,
            which in 0usize..20,
            rotation in 0usize..20,
        ) {
            let k = 1 + ((values.len() - 1) as f64 * k_frac) as usize;
            let base = topk_final(&values, k).unwrap();
            let mut rotated = values.clone();
            rotated.rotate_left(rotation % values.len());
            prop_assert_eq!(topk_final(&rotated, k).unwrap(), base);
            let mut raised = values.clone();
            raised[which % values.len()] += bump;
            prop_assert!(topk_final(&raised, k).unwrap() >= base - 1e-12);
        }
    }
}
