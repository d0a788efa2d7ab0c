use super::{top_indices, uniform_indices, EpochPlan, FillMode, PivotMode, SamplerSpec, Strategy};
use crate::error::{Error, Result};

/// Introspective replay: anchor batches at the highest-scoring transitions
/// and fill them with their temporal neighbourhood.
///
/// The first `ceil((1 - p) * G)` batches are pivot-anchored, the rest are
/// uniform. Pivots come from the descending score ranking (ties toward the
/// more recent index) and cycle through it when the buffer holds fewer than
/// `G` transitions.
pub fn plan_ier<R: rand::Rng + ?Sized>(
    scores: &[f64],
    buf_len: usize,
    spec: &SamplerSpec,
    rng: &mut R,
) -> Result<EpochPlan> {
    if buf_len == 0 {
        return Err(Error::EmptyBuffer);
    }
    if scores.len() != buf_len {
        return Err(Error::DimensionMismatch { expected: buf_len, got: scores.len() });
    }
    if spec.strategy != Strategy::Ier {
        return Err(Error::InvalidArgument(format!("plan_ier called with strategy {}", spec.strategy)));
    }
    let g_total = spec.grad_steps;
    let b = spec.batch_size;

    let pivots: Vec<usize> = match spec.pivot_mode {
        PivotMode::TdTop => {
            let ranking = top_indices(scores, g_total);
            (0..g_total).map(|g| ranking[g % ranking.len()]).collect()
        }
        PivotMode::Uniform => (0..g_total).map(|_| rng.random_range(0..buf_len)).collect(),
    };

    let anchored = spec.pivot_batch_count();
    let mut batches = Vec::with_capacity(g_total);
    for (g, &pivot) in pivots.iter().enumerate() {
        let batch = if g < anchored {
            match spec.fill_mode {
                FillMode::LookBack => window_ending_at(pivot, b),
                FillMode::LookForward => window_starting_at(pivot, b, buf_len),
                FillMode::Uniform => pivot_with_uniform_fill(rng, pivot, b, buf_len),
            }
        } else {
            uniform_indices(rng, buf_len, b)
        };
        batches.push(batch);
    }

    Ok(EpochPlan { batches, pivot_indices: pivots, weights: None })
}

pub(crate) fn window_ending_at(end: usize, b: usize) -> Vec<usize> {
    ((end + 1).saturating_sub(b)..=end).collect()
}

pub(crate) fn window_starting_at(start: usize, b: usize, buf_len: usize) -> Vec<usize> {
    (start..=(start + b - 1).min(buf_len - 1)).collect()
}

/// The pivot followed by `b - 1` other indices drawn uniformly.
fn pivot_with_uniform_fill<R: rand::Rng + ?Sized>(rng: &mut R, pivot: usize, b: usize, buf_len: usize) -> Vec<usize> {
    let mut batch = Vec::with_capacity(b);
    batch.push(pivot);
    if buf_len > 1 {
        // draw from the buffer with the pivot removed, then shift back
        batch.extend(
            uniform_indices(rng, buf_len - 1, b - 1)
                .into_iter()
                .map(|i| if i >= pivot { i + 1 } else { i }),
        );
    } else {
        batch.extend(std::iter::repeat_n(pivot, b - 1));
    }
    batch
}
