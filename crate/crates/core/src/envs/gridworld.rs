use rand::Rng as _;

use super::{Environment, Step};
use crate::error::{Error, Result};
use crate::replay::{Observation, ReplayBuffer, Transition};
use crate::Rng;

/// 1-D corridor of 40 states labelled `1..=40`.
///
/// The agent starts at 6 and moves left (0) or right (1); moving left from 1
/// stays put. Entering 40 pays +1 and ends the episode; entering the trap at
/// 3 pays -2 and continues. Episodes are cut after 1000 steps.
#[derive(Clone, Debug)]
pub struct GridWorld1D {
    position: usize,
    steps: usize,
    finished: bool,
}

impl GridWorld1D {
    pub const SIZE: usize = 40;
    pub const START: usize = 6;
    pub const GOAL: usize = 40;
    pub const TRAP: usize = 3;
    pub const MAX_STEPS: usize = 1000;
    pub const GOAL_REWARD: f64 = 1.0;
    pub const TRAP_REWARD: f64 = -2.0;

    pub fn new() -> Self {
        Self { position: Self::START, steps: 0, finished: false }
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Place the agent at `position` with a fresh step count.
    pub fn set_position(&mut self, position: usize) {
        assert!((1..=Self::SIZE).contains(&position));
        self.position = position;
        self.steps = 0;
        self.finished = false;
    }
}

impl Default for GridWorld1D {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for GridWorld1D {
    fn num_actions(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        Self::SIZE
    }

    fn max_steps(&self) -> usize {
        Self::MAX_STEPS
    }

    fn reset(&mut self, _rng: &mut Rng) -> Observation {
        self.set_position(Self::START);
        Observation::Discrete(self.position)
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.finished {
            return Err(Error::EpisodeTerminated);
        }
        self.position = match action {
            0 => self.position.saturating_sub(1).max(1),
            1 => (self.position + 1).min(Self::SIZE),
            other => return Err(Error::InvalidArgument(format!("gridworld action {other} not in {{0, 1}}"))),
        };
        self.steps += 1;
        let (reward, done) = match self.position {
            Self::GOAL => (Self::GOAL_REWARD, true),
            Self::TRAP => (Self::TRAP_REWARD, false),
            _ => (0.0, false),
        };
        let truncated = !done && self.steps >= Self::MAX_STEPS;
        self.finished = done || truncated;
        Ok(Step { next_state: Observation::Discrete(self.position), reward, done, truncated })
    }
}

/// Fill a buffer of exactly `n` transitions with back-to-back episodes of a
/// uniform-random policy. The last episode may be cut short.
pub fn collect_random_buffer(env: &mut GridWorld1D, n: usize, rng: &mut Rng) -> Result<ReplayBuffer> {
    if n == 0 {
        return Err(Error::InvalidArgument("buffer size must be at least 1".into()));
    }
    let mut buffer = ReplayBuffer::new(n);
    let mut episode = 0u64;
    while buffer.len() < n {
        let mut state = env.reset(rng);
        let mut step_index = 0u64;
        loop {
            let action = rng.random_range(0..2);
            let step = env.step(action)?;
            let over = step.episode_over();
            buffer.push(Transition {
                state,
                action,
                reward: step.reward,
                next_state: step.next_state.clone(),
                done: step.done,
                truncated: step.truncated,
                episode_id: episode,
                step_index,
            });
            if over || buffer.len() == n {
                break;
            }
            state = step.next_state;
            step_index += 1;
        }
        episode += 1;
    }
    Ok(buffer)
}
