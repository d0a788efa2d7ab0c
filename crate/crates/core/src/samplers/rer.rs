use super::{EpochPlan, SamplerSpec};
use crate::error::{Error, Result};

/// Reverse-sweep position; persists across epochs.
///
/// A fresh cursor sits at the end of the buffer. Each step emits the block
/// `[P - B, P)` and then moves `P` back by `B`; when fewer than `B`
/// transitions remain before `P`, the sweep restarts from the newest end.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RerCursor {
    position: Option<usize>,
}

impl RerCursor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current `P`, or `None` before the first sweep.
    pub fn position(&self) -> Option<usize> {
        self.position
    }
}

pub fn plan_rer(cursor: &mut RerCursor, buf_len: usize, spec: &SamplerSpec) -> Result<EpochPlan> {
    let b = spec.batch_size;
    if buf_len == 0 {
        return Err(Error::EmptyBuffer);
    }
    if buf_len < b {
        return Err(Error::BufferTooSmall { len: buf_len, batch_size: b });
    }
    // the buffer may have shrunk relative to the stored position
    let mut p = cursor.position.unwrap_or(buf_len).min(buf_len);
    let mut batches = Vec::with_capacity(spec.grad_steps);
    for _ in 0..spec.grad_steps {
        if p < b {
            p = buf_len;
        }
        batches.push((p - b..p).collect());
        p -= b;
    }
    cursor.position = Some(p);
    Ok(EpochPlan { batches, pivot_indices: Vec::new(), weights: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::Strategy;

    fn spec(b: usize, g: usize) -> SamplerSpec {
        SamplerSpec::new(Strategy::Rer, b, g)
    }

    #[test]
    fn sweep_then_reset() {
        let mut cursor = RerCursor::new();
        let plan = plan_rer(&mut cursor, 10, &spec(3, 3)).unwrap();
        assert_eq!(plan.batches, vec![vec![7, 8, 9], vec![4, 5, 6], vec![1, 2, 3]]);
        assert_eq!(cursor.position(), Some(1));
        let next = plan_rer(&mut cursor, 10, &spec(3, 1)).unwrap();
        assert_eq!(next.batches, vec![vec![7, 8, 9]]);
    }

    #[test]
    fn whole_buffer_block_repeats() {
        let mut cursor = RerCursor::new();
        let plan = plan_rer(&mut cursor, 4, &spec(4, 2)).unwrap();
        assert_eq!(plan.batches, vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]]);
    }

    #[test]
    fn short_buffer_is_an_error() {
        let mut cursor = RerCursor::new();
        assert_eq!(
            plan_rer(&mut cursor, 3, &spec(4, 1)).unwrap_err(),
            Error::BufferTooSmall { len: 3, batch_size: 4 }
        );
    }

    #[test]
    fn sweep_touches_each_index_once_before_reset() {
        for (len, b) in [(12, 3), (20, 4), (64, 8), (9, 9)] {
            let mut cursor = RerCursor::new();
            let plan = plan_rer(&mut cursor, len, &spec(b, len / b)).unwrap();
            let mut seen = vec![0u32; len];
            for &i in plan.batches.iter().flatten() {
                seen[i] += 1;
            }
            assert!(seen.iter().all(|&c| c == 1), "len={len} b={b}");
        }
    }
}
