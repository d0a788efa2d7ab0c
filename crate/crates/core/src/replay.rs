//! Bounded FIFO transition storage.
//!
//! Indices are logical positions `0..len`: index 0 is always the oldest
//! stored transition, and every index shifts down by one when a push evicts.
//! Blocks are plain index windows and deliberately ignore episode
//! boundaries.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// An environment observation.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    /// Discrete state id (GridWorld positions are 1-based).
    Discrete(usize),
    Vector(Vec<f64>),
}

impl Observation {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Observation::Discrete(s) => Some(*s),
            Observation::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Observation::Vector(v) => Some(v),
            Observation::Discrete(_) => None,
        }
    }
}

/// One environment step.
///
/// `done` marks a true terminal state: the bootstrap term is dropped for it.
/// `truncated` marks an episode cut by a time limit, which still bootstraps.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
    pub truncated: bool,
    pub episode_id: u64,
    pub step_index: u64,
}

impl Transition {
    /// True when this is the last transition of its episode.
    pub fn ends_episode(&self) -> bool {
        self.done || self.truncated
    }
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    slots: VecDeque<Transition>,
    insert_count: u64,
}

impl ReplayBuffer {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            slots: VecDeque::with_capacity(capacity.min(1 << 16)),
            insert_count: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of pushes ever made, including evicted transitions.
    pub fn insert_count(&self) -> u64 {
        self.insert_count
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() == self.capacity
    }

    /// Append `t` as the newest element, evicting the oldest when full.
    /// Returns the logical index of `t`.
    pub fn push(&mut self, t: Transition) -> usize {
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
        }
        self.slots.push_back(t);
        self.insert_count += 1;
        self.slots.len() - 1
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.slots.get(index)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Transition> + ExactSizeIterator + '_ {
        self.slots.iter()
    }

    /// Physical ring slot (`0..capacity`) of a logical index. Stable for the
    /// lifetime of the stored transition, unlike the logical index.
    pub fn slot_of(&self, index: usize) -> usize {
        let oldest = self.insert_count - self.slots.len() as u64;
        ((oldest + index as u64) % self.capacity as u64) as usize
    }

    /// Inverse of [`slot_of`](Self::slot_of); `None` if the slot is empty.
    pub fn index_of_slot(&self, slot: usize) -> Option<usize> {
        let oldest = ((self.insert_count - self.slots.len() as u64) % self.capacity as u64) as usize;
        let index = (slot + self.capacity - oldest) % self.capacity;
        (index < self.slots.len()).then_some(index)
    }

    /// Transitions `[max(0, end - B + 1) ..= end]` in ascending order; the
    /// pivot `end` is the last element. Truncates at the buffer start.
    pub fn block_ending_at(&self, end: usize, batch_size: usize) -> Result<Batch<'_>> {
        self.check_index(end)?;
        let start = (end + 1).saturating_sub(batch_size.max(1));
        self.batch((start..=end).collect())
    }

    /// Transitions `[start ..= min(len - 1, start + B - 1)]`; the pivot is the
    /// first element. Truncates at the buffer end.
    pub fn block_starting_at(&self, start: usize, batch_size: usize) -> Result<Batch<'_>> {
        self.check_index(start)?;
        let end = (start + batch_size.max(1) - 1).min(self.len() - 1);
        self.batch((start..=end).collect())
    }

    /// Batch over arbitrary indices with unit weights.
    pub fn batch(&self, indices: Vec<usize>) -> Result<Batch<'_>> {
        let weights = vec![1.0; indices.len()];
        self.weighted_batch(indices, weights)
    }

    pub fn weighted_batch(&self, indices: Vec<usize>, weights: Vec<f64>) -> Result<Batch<'_>> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("batch must hold at least one index".into()));
        }
        if weights.len() != indices.len() {
            return Err(Error::DimensionMismatch { expected: indices.len(), got: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
            return Err(Error::InvalidArgument(format!("batch weight {w} outside (0, 1]")));
        }
        let transitions = indices
            .iter()
            .map(|&i| self.get(i).ok_or(Error::IndexOutOfRange { index: i, len: self.len() }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Batch { indices, transitions, weights })
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange { index, len: self.len() });
        }
        Ok(())
    }
}

/// A set of buffer transitions handed to a learner in one step.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    pub indices: Vec<usize>,
    pub transitions: Vec<&'a Transition>,
    /// Importance-sampling weights in `(0, 1]`; all 1.0 unless prioritized.
    pub weights: Vec<f64>,
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[cfg(test)]
pub(crate) fn discrete_transition(s: usize, a: usize, r: f64, s2: usize, done: bool) -> Transition {
    Transition {
        state: Observation::Discrete(s),
        action: a,
        reward: r,
        next_state: Observation::Discrete(s2),
        done,
        truncated: false,
        episode_id: 0,
        step_index: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tagged(tag: u64) -> Transition {
        Transition {
            state: Observation::Discrete(tag as usize),
            action: 0,
            reward: 0.0,
            next_state: Observation::Discrete(tag as usize + 1),
            done: false,
            truncated: false,
            episode_id: tag / 4,
            step_index: tag % 4,
        }
    }

    fn filled(len: usize) -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(len.max(1));
        for i in 0..len as u64 {
            buf.push(tagged(i));
        }
        buf
    }

    #[test]
    fn fifo_eviction_keeps_newest() {
        let mut buf = ReplayBuffer::new(3);
        for tag in 0..4 {
            buf.push(tagged(tag));
        }
        let tags: Vec<_> = buf.iter().map(|t| t.state.as_discrete().unwrap()).collect();
        assert_eq!(tags, vec![1, 2, 3]);
        assert_eq!(buf.insert_count(), 4);
    }

    #[test]
    fn first_push_lands_at_zero() {
        let mut buf = ReplayBuffer::new(8);
        assert_eq!(buf.push(tagged(7)), 0);
        assert_eq!(buf.len(), 1);
        assert_eq!(buf.get(0).unwrap().state, Observation::Discrete(7));
    }

    #[test]
    fn block_windows() {
        let buf = filled(10);
        assert_eq!(buf.block_ending_at(7, 3).unwrap().indices, vec![5, 6, 7]);
        assert_eq!(buf.block_ending_at(1, 3).unwrap().indices, vec![0, 1]);
        assert_eq!(buf.block_ending_at(9, 1).unwrap().indices, vec![9]);
        assert_eq!(buf.block_starting_at(7, 3).unwrap().indices, vec![7, 8, 9]);
        assert_eq!(buf.block_starting_at(9, 3).unwrap().indices, vec![9]);
        assert_eq!(buf.block_starting_at(0, 10).unwrap().indices, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn block_out_of_range() {
        let buf = filled(10);
        assert_eq!(
            buf.block_ending_at(10, 3).unwrap_err(),
            Error::IndexOutOfRange { index: 10, len: 10 }
        );
        assert!(buf.block_starting_at(12, 1).is_err());
        assert!(ReplayBuffer::new(4).block_ending_at(0, 1).is_err());
    }

    #[test]
    fn blocks_straddle_episodes() {
        // tagged() puts four steps in each episode
        let buf = filled(10);
        let block = buf.block_ending_at(5, 4).unwrap();
        let episodes: Vec<_> = block.transitions.iter().map(|t| t.episode_id).collect();
        assert_eq!(episodes, vec![0, 0, 1, 1]);
    }

    #[test]
    fn slot_mapping_roundtrips_after_wrap() {
        let mut buf = ReplayBuffer::new(5);
        for tag in 0..13 {
            buf.push(tagged(tag));
        }
        for i in 0..buf.len() {
            assert_eq!(buf.index_of_slot(buf.slot_of(i)), Some(i));
        }
        let mut partial = ReplayBuffer::new(5);
        partial.push(tagged(0));
        assert_eq!(partial.index_of_slot(3), None);
    }

    #[test]
    fn weights_must_lie_in_unit_interval() {
        let buf = filled(4);
        assert!(buf.weighted_batch(vec![0, 1], vec![1.0, 0.0]).is_err());
        assert!(buf.weighted_batch(vec![0, 1], vec![1.0, 1.5]).is_err());
        assert!(buf.weighted_batch(vec![0, 1], vec![0.5, 1.0]).is_ok());
    }

    proptest! {
        #[test]
        fn push_matches_naive_list(capacity in 1usize..20, pushes in 0usize..80) {
            let mut buf = ReplayBuffer::new(capacity);
            let mut oracle: Vec<u64> = Vec::new();
            for tag in 0..pushes as u64 {
                buf.push(tagged(tag));
                oracle.push(tag);
                if oracle.len() > capacity {
                    oracle.remove(0);
                }
                prop_assert!(buf.len() <= capacity);
            }
            let got: Vec<u64> = buf.iter().map(|t| t.state.as_discrete().unwrap() as u64).collect();
            prop_assert_eq!(got, oracle);
        }

        #[test]
        fn block_ending_shape(len in 1usize..50, end_frac in 0.0f64..1.0, b in 1usize..70) {
            let buf = filled(len);
            let end = ((len as f64 * end_frac) as usize).min(len - 1);
            let block = buf.block_ending_at(end, b).unwrap();
            prop_assert_eq!(block.len(), b.min(end + 1));
            prop_assert_eq!(*block.indices.last().unwrap(), end);
            prop_assert!(block.indices.windows(2).all(|w| w[1] == w[0] + 1));
        }
    }
}
