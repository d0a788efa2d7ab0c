//! Seedable environments sharing the [`Environment`] interface.

mod cartpole;
mod gridworld;

pub use cartpole::CartPole;
pub use gridworld::{collect_random_buffer, GridWorld1D};

use crate::error::Result;
use crate::replay::Observation;
use crate::Rng;

/// Result of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub next_state: Observation,
    pub reward: f64,
    /// True terminal state.
    pub done: bool,
    /// Episode cut by the step limit.
    pub truncated: bool,
}

impl Step {
    pub fn episode_over(&self) -> bool {
        self.done || self.truncated
    }
}

pub trait Environment: Send {
    fn num_actions(&self) -> usize;

    /// Width of the vector encoding fed to function approximators.
    fn observation_dim(&self) -> usize;

    fn max_steps(&self) -> usize;

    fn reset(&mut self, rng: &mut Rng) -> Observation;

    /// Errors with `EpisodeTerminated` once the episode has ended.
    fn step(&mut self, action: usize) -> Result<Step>;
}

/// Which environment an experiment runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    GridWorld,
    CartPole,
}

impl EnvId {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::GridWorld => "gridworld",
            EnvId::CartPole => "cartpole",
        }
    }

    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvId::GridWorld => Box::new(GridWorld1D::new()),
            EnvId::CartPole => Box::new(CartPole::new()),
        }
    }
}

impl std::fmt::Display for EnvId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EnvId {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gridworld" | "gridworld1d" | "gridworld-1d" => Ok(EnvId::GridWorld),
            "cartpole" | "cartpole-v0" => Ok(EnvId::CartPole),
            other => Err(crate::Error::InvalidArgument(format!("unknown environment '{other}'"))),
        }
    }
}
