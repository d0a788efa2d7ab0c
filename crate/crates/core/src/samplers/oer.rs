use super::{top_indices, EpochPlan, SamplerSpec};
use crate::error::{Error, Result};

/// Greedy top-score replay: the `min(B * G, len)` highest-scoring indices in
/// descending order, chunked into `G` consecutive groups of up to `B`.
///
/// A buffer shorter than `B * G` is spread evenly over the `G` groups so
/// every index still appears exactly once. Only when it holds fewer than `G`
/// transitions do groups repeat, cycling through the ranking.
pub fn plan_oer(scores: &[f64], buf_len: usize, spec: &SamplerSpec) -> Result<EpochPlan> {
    if buf_len == 0 {
        return Err(Error::EmptyBuffer);
    }
    if scores.len() != buf_len {
        return Err(Error::DimensionMismatch { expected: buf_len, got: scores.len() });
    }
    let b = spec.batch_size;
    let ranked = top_indices(scores, b.saturating_mul(spec.grad_steps));
    let g_total = spec.grad_steps;
    let batches = if ranked.len() >= g_total.saturating_mul(b) {
        ranked.chunks(b).map(<[usize]>::to_vec).collect()
    } else if ranked.len() >= g_total {
        let (base, extra) = (ranked.len() / g_total, ranked.len() % g_total);
        let mut rest = ranked.as_slice();
        (0..g_total)
            .map(|g| {
                let (head, tail) = rest.split_at(base + usize::from(g < extra));
                rest = tail;
                head.to_vec()
            })
            .collect()
    } else {
        (0..g_total).map(|g| vec![ranked[g % ranked.len()]]).collect()
    };
    Ok(EpochPlan { batches, pivot_indices: ranked, weights: None })
}
