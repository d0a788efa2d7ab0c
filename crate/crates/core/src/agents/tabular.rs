use crate::agents::argmax;
use crate::importance::ActionValues;
use crate::replay::{Batch, Observation};
use serde::{Deserialize, Serialize};

/// How a batch is folded into the table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// One Q-learning step per transition, most recent buffer index first,
    /// each seeing the table as left by the previous one.
    #[default]
    Sequential,
    /// Targets from the table as it stood before the batch; every visited
    /// `(s, a)` then moves by `lr` times its mean TD increment. The tabular
    /// counterpart of one gradient step on the batch's mean squared error.
    BatchMean,
}

text_enum!(UpdateRule { Sequential => "sequential", BatchMean => "batch_mean" });

/// Q-table over 1-based discrete states.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularQ {
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
    pub lr: f64,
    pub gamma: f64,
    pub rule: UpdateRule,
}

impl TabularQ {
    pub fn new(num_states: usize, num_actions: usize, lr: f64, gamma: f64) -> Self {
        Self { num_states, num_actions, q: vec![0.0; num_states * num_actions], lr, gamma, rule: UpdateRule::Sequential }
    }

    pub fn with_rule(mut self, rule: UpdateRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    fn slot(&self, state: usize, action: usize) -> usize {
        assert!((1..=self.num_states).contains(&state), "state {state} outside 1..={}", self.num_states);
        (state - 1) * self.num_actions + action
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.q[self.slot(state, action)]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        let i = self.slot(state, action);
        self.q[i] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let start = self.slot(state, 0);
        &self.q[start..start + self.num_actions]
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy_action(&self, state: usize) -> usize {
        argmax(self.row(state))
    }

    /// Largest absolute table entry.
    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Apply one batch under the table's [`UpdateRule`]. Each transition's
    /// step is scaled by its batch weight (1.0 outside prioritized replay).
    pub fn update(&mut self, batch: &Batch<'_>) {
        match self.rule {
            UpdateRule::Sequential => self.update_sequential(batch),
            UpdateRule::BatchMean => self.update_batch_mean(batch),
        }
    }

    fn target(&self, state: &Observation, next_state: &Observation, reward: f64, done: bool) -> (usize, f64) {
        let (s, s2) = match (state, next_state) {
            (Observation::Discrete(s), Observation::Discrete(s2)) => (*s, *s2),
            _ => panic!("tabular agent needs discrete observations"),
        };
        (s, if done { reward } else { reward + self.gamma * self.max_value(s2) })
    }

    fn update_batch_mean(&mut self, batch: &Batch<'_>) {
        let mut sums = vec![(0.0, 0u32); self.q.len()];
        for (t, w) in batch.transitions.iter().zip(&batch.weights) {
            let (s, target) = self.target(&t.state, &t.next_state, t.reward, t.done);
            let i = self.slot(s, t.action);
            sums[i].0 += w * (target - self.q[i]);
            sums[i].1 += 1;
        }
        for (q, (sum, n)) in self.q.iter_mut().zip(sums) {
            if n > 0 {
                *q += self.lr * sum / f64::from(n);
            }
        }
    }

    fn update_sequential(&mut self, batch: &Batch<'_>) {
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.sort_by(|&a, &b| batch.indices[b].cmp(&batch.indices[a]));
        for k in order {
            let t = batch.transitions[k];
            let (s, target) = self.target(&t.state, &t.next_state, t.reward, t.done);
            let i = self.slot(s, t.action);
            self.q[i] += self.lr * batch.weights[k] * (target - self.q[i]);
        }
    }
}

impl ActionValues for TabularQ {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn q_value(&self, state: &Observation, action: usize) -> f64 {
        self.get(state.as_discrete().expect("discrete observation"), action)
    }

    fn max_target_q(&self, state: &Observation) -> f64 {
        self.max_value(state.as_discrete().expect("discrete observation"))
    }
}
