use super::{uniform_indices, EpochPlan, SamplerSpec};
use crate::error::{Error, Result};

/// Uniform replay: `G` batches of `B` indices, distinct within a batch
/// unless the buffer is shorter than `B`.
pub fn plan_uer<R: rand::Rng + ?Sized>(buf_len: usize, spec: &SamplerSpec, rng: &mut R) -> Result<EpochPlan> {
    if buf_len == 0 {
        return Err(Error::EmptyBuffer);
    }
    let batches = (0..spec.grad_steps)
        .map(|_| uniform_indices(rng, buf_len, spec.batch_size))
        .collect();
    Ok(EpochPlan { batches, pivot_indices: Vec::new(), weights: None })
}
