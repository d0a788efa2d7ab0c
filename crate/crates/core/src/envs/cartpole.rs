//! Cart-pole balancing with the classic constants and Euler integration.

use rand::Rng as _;

use super::{Environment, Step};
use crate::error::{Error, Result};
use crate::replay::Observation;
use crate::Rng;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const X_THRESHOLD: f64 = 2.4;
const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;

/// State is `[x, x_dot, theta, theta_dot]`; action 0 pushes left, 1 right.
/// Every step pays +1; episodes end when the cart leaves `±2.4`, the pole
/// tilts past 12 degrees, or after 200 steps.
#[derive(Clone, Debug)]
pub struct CartPole {
    state: [f64; 4],
    steps: usize,
    finished: bool,
}

impl CartPole {
    pub const MAX_STEPS: usize = 200;

    pub fn new() -> Self {
        Self { state: [0.0; 4], steps: 0, finished: false }
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.steps = 0;
        self.finished = false;
    }

    /// One Euler step under an explicit force, without episode bookkeeping.
    pub fn integrate(state: [f64; 4], force: f64) -> [f64; 4] {
        let [x, x_dot, theta, theta_dot] = state;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc =
            (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
        [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ]
    }

    fn failed(&self) -> bool {
        let [x, _, theta, _] = self.state;
        !(-X_THRESHOLD..=X_THRESHOLD).contains(&x) || !(-THETA_THRESHOLD..=THETA_THRESHOLD).contains(&theta)
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CartPole {
    fn num_actions(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        4
    }

    fn max_steps(&self) -> usize {
        Self::MAX_STEPS
    }

    fn reset(&mut self, rng: &mut Rng) -> Observation {
        let state = std::array::from_fn(|_| rng.random_range(-0.05..=0.05));
        self.set_state(state);
        Observation::Vector(state.to_vec())
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.finished {
            return Err(Error::EpisodeTerminated);
        }
        let force = match action {
            0 => -FORCE_MAG,
            1 => FORCE_MAG,
            other => return Err(Error::InvalidArgument(format!("cartpole action {other} not in {{0, 1}}"))),
        };
        self.state = Self::integrate(self.state, force);
        self.steps += 1;
        let done = self.failed();
        let truncated = !done && self.steps >= Self::MAX_STEPS;
        self.finished = done || truncated;
        Ok(Step { next_state: Observation::Vector(self.state.to_vec()), reward: 1.0, done, truncated })
    }
}
