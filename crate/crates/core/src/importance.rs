//! TD-error importance scores.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::{Observation, ReplayBuffer, Transition};

/// Read access to an agent's online and target action values.
pub trait ActionValues: Sync {
    fn num_actions(&self) -> usize;

    /// Online estimate `Q(s, a)`.
    fn q_value(&self, state: &Observation, action: usize) -> f64;

    /// `max_a' Q_target(s, a')`.
    fn max_target_q(&self, state: &Observation) -> f64;
}

/// `|Q(s,a) - r - γ max_a' Q_target(s')|`, without the bootstrap term for
/// terminal transitions. Time-limit truncation still bootstraps.
pub fn td_error<A: ActionValues + ?Sized>(agent: &A, t: &Transition, gamma: f64) -> f64 {
    let q = agent.q_value(&t.state, t.action);
    let target = if t.done { t.reward } else { t.reward + gamma * agent.max_target_q(&t.next_state) };
    (q - target).abs()
}

/// One importance score per buffer index.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub computed_at_episode: u64,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

// Below this size the rayon split costs more than it saves.
const PARALLEL_THRESHOLD: usize = 4096;

/// Score every buffer entry against the agent's current parameters.
pub fn score_buffer<A: ActionValues + ?Sized>(
    agent: &A,
    buffer: &ReplayBuffer,
    gamma: f64,
    episode: u64,
) -> Result<ScoreVector> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let scores = if buffer.len() >= PARALLEL_THRESHOLD {
        (0..buffer.len())
            .into_par_iter()
            .with_min_len(1024)
            .map(|i| td_error(agent, buffer.get(i).expect("index in range"), gamma))
            .collect()
    } else {
        buffer.iter().map(|t| td_error(agent, t, gamma)).collect()
    };
    Ok(ScoreVector { scores, computed_at_episode: episode })
}

/// A `(td_error, reward)` pair for one sampled transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurpriseRow {
    pub index: usize,
    pub td_error: f64,
    pub reward: f64,
}

/// Surprise-vs-reward pairs for the given buffer indices.
pub fn surprise_rows<A: ActionValues + ?Sized>(
    agent: &A,
    buffer: &ReplayBuffer,
    indices: &[usize],
    gamma: f64,
) -> Result<Vec<SurpriseRow>> {
    indices
        .iter()
        .map(|&index| {
            let t = buffer.get(index).ok_or(Error::IndexOutOfRange { index, len: buffer.len() })?;
            Ok(SurpriseRow { index, td_error: td_error(agent, t, gamma), reward: t.reward })
        })
        .collect()
}

/// CSV with header `index,td_error,reward`.
pub fn write_surprise_csv<W: Write>(mut out: W, rows: &[SurpriseRow]) -> io::Result<()> {
    writeln!(out, "index,td_error,reward")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.index, row.td_error, row.reward)?;
    }
    Ok(())
}
