use ier_core::rng_from_seed;
use ier_core::samplers::{
    per_update, plan_ier, plan_oer, plan_per, plan_rer, plan_uer, FillMode, RerCursor, SamplerSpec, Strategy, SumTree,
};
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

fn scores_strategy() -> impl proptest::strategy::Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u8..12, 1..150).prop_map(|v| v.into_iter().map(|x| f64::from(x) * 0.25).collect())
}

proptest! {
    #[test]
    fn every_plan_has_g_in_range_batches(scores in scores_strategy(), b in 1usize..20, g in 1usize..15, seed: u64) {
        let len = scores.len();
        let mut rng = rng_from_seed(seed);
        let mut plans = vec![
            plan_uer(len, &SamplerSpec::new(Strategy::Uer, b, g), &mut rng).unwrap(),
            plan_oer(&scores, len, &SamplerSpec::new(Strategy::Oer, b, g)).unwrap(),
            plan_ier(&scores, len, &SamplerSpec::new(Strategy::Ier, b, g), &mut rng).unwrap(),
        ];
        if len >= b {
            plans.push(plan_rer(&mut RerCursor::new(), len, &SamplerSpec::new(Strategy::Rer, b, g)).unwrap());
        }
        for plan in &plans {
            prop_assert_eq!(plan.batches.len(), g);
            prop_assert!(plan.batches.iter().flatten().all(|&i| i < len));
            prop_assert!(plan.batches.iter().all(|batch| !batch.is_empty()));
        }
    }

    #[test]
    fn ier_pivots_are_the_top_scores(scores in scores_strategy(), b in 1usize..20, g in 1usize..15, seed: u64) {
        let len = scores.len();
        let plan = plan_ier(&scores, len, &SamplerSpec::new(Strategy::Ier, b, g), &mut rng_from_seed(seed)).unwrap();
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(y.cmp(&x)));
        for (k, &pivot) in plan.pivot_indices.iter().enumerate() {
            prop_assert_eq!(pivot, order[k % len]);
        }
        for (batch, &pivot) in plan.batches.iter().zip(&plan.pivot_indices) {
            prop_assert_eq!(*batch.last().unwrap(), pivot);
            prop_assert!(batch.windows(2).all(|w| w[1] == w[0] + 1));
            prop_assert_eq!(batch.len(), b.min(pivot + 1));
        }
    }

    #[test]
    fn look_forward_batches_start_at_the_pivot(scores in scores_strategy(), b in 1usize..20, g in 1usize..15) {
        let len = scores.len();
        let mut spec = SamplerSpec::new(Strategy::Ier, b, g);
        spec.fill_mode = FillMode::LookForward;
        let plan = plan_ier(&scores, len, &spec, &mut rng_from_seed(0)).unwrap();
        for (batch, &pivot) in plan.batches.iter().zip(&plan.pivot_indices) {
            prop_assert_eq!(batch[0], pivot);
            prop_assert!(batch.windows(2).all(|w| w[1] == w[0] + 1));
            prop_assert_eq!(batch.len(), b.min(len - pivot));
        }
    }

    #[test]
    fn mixing_leaves_the_uniform_remainder(g in 1usize..=10, p_idx in 0usize..4, seed: u64) {
        let p = [0.0, 0.3, 0.5, 1.0][p_idx];
        let mut spec = SamplerSpec::new(Strategy::Ier, 4, g);
        spec.mixing_p = p;
        let scores: Vec<f64> = (0..50).map(|i| f64::from(i % 7)).collect();
        let plan = plan_ier(&scores, 50, &spec, &mut rng_from_seed(seed)).unwrap();
        let anchored = ((1.0 - p) * g as f64 - 1e-12).ceil() as usize;
        prop_assert_eq!(spec.pivot_batch_count(), anchored);
        for (batch, &pivot) in plan.batches.iter().zip(&plan.pivot_indices).take(anchored) {
            prop_assert_eq!(*batch.last().unwrap(), pivot);
            prop_assert_eq!(batch.len(), 4.min(pivot + 1));
        }
        prop_assert!(plan.batches[anchored..].iter().all(|batch| batch.len() == 4));
    }

    #[test]
    fn rer_sweep_visits_each_index_once(blocks in 1usize..30, b in 1usize..10) {
        let len = blocks * b;
        let mut plan = plan_rer(&mut RerCursor::new(), len, &SamplerSpec::new(Strategy::Rer, b, blocks)).unwrap();
        let mut seen: Vec<usize> = plan.batches.drain(..).flatten().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..len).collect::<Vec<_>>());
    }

    #[test]
    fn rer_cursor_stays_within_the_buffer(len in 1usize..100, b in 1usize..10, g in 1usize..10, epochs in 1usize..6) {
        prop_assume!(len >= b);
        let mut cursor = RerCursor::new();
        for _ in 0..epochs {
            plan_rer(&mut cursor, len, &SamplerSpec::new(Strategy::Rer, b, g)).unwrap();
            prop_assert!(cursor.position().is_some_and(|p| p <= len));
        }
    }

    #[test]
    fn per_weights_are_max_normalized(tds in prop::collection::vec(0.0f64..10.0, 1..200), seed: u64) {
        let spec = SamplerSpec::new(Strategy::Per, 16, 8);
        let mut tree = SumTree::new(tds.len());
        for (i, &td) in tds.iter().enumerate() {
            per_update(&mut tree, i, td, &spec);
        }
        let plan = plan_per(&tree, tds.len(), &spec, &mut rng_from_seed(seed)).unwrap();
        let weights = plan.weights.as_ref().unwrap();
        prop_assert_eq!(weights.len(), 8);
        for (batch, w) in plan.batches.iter().zip(weights) {
            prop_assert!(batch.iter().all(|&i| i < tds.len()));
            prop_assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
            prop_assert!(w.contains(&1.0));
        }
    }
}
