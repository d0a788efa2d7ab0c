//! Off-policy learners: tabular Q-learning and a DQN over a small MLP.

mod dqn;
mod mlp;
mod tabular;

pub use dqn::{Adam, DqnConfig, DqnLearner, EpsilonSchedule, TrainStats};
pub use mlp::{Gradients, Mlp};
pub use tabular::{TabularQ, UpdateRule};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
