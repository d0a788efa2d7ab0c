use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{argmax, Mlp};
use crate::error::{Error, Result};
use crate::importance::ActionValues;
use crate::replay::{Batch, Observation};

/// Adaptive moment estimation over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Linear decay from `max` to `min` over the first `decay_steps`
/// environment steps, then constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub max: f64,
    pub min: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    /// Decay over `decay_ratio` of a `total_steps` budget.
    pub fn from_ratio(max: f64, min: f64, decay_ratio: f64, total_steps: u64) -> Self {
        Self { max, min, decay_steps: (decay_ratio * total_steps as f64).round() as u64 }
    }

    pub fn value(&self, env_step: u64) -> f64 {
        if self.decay_steps == 0 || env_step >= self.decay_steps {
            return self.min;
        }
        let frac = env_step as f64 / self.decay_steps as f64;
        self.max + (self.min - self.max) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub target_update_every: u64,
    pub epsilon: EpsilonSchedule,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![8, 5],
            lr: 5e-5,
            gamma: 0.9,
            target_update_every: 30,
            epsilon: EpsilonSchedule { max: 1.0, min: 0.01, decay_steps: 0 },
        }
    }
}

/// Outcome of one gradient step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainStats {
    pub loss: f64,
    /// `|Q(s,a) - y|` per batch element, before the update.
    pub td_abs: Vec<f64>,
    /// Largest `|Q(s,a)|` seen in the batch.
    pub max_abs_q: f64,
}

/// DQN with a periodically synchronised target network.
#[derive(Clone, Debug)]
pub struct DqnLearner {
    pub online: Mlp,
    pub target: Mlp,
    optimizer: Adam,
    config: DqnConfig,
    train_steps: u64,
}

impl DqnLearner {
    pub fn new<R: rand::Rng + ?Sized>(input_dim: usize, num_actions: usize, config: DqnConfig, rng: &mut R) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend(&config.hidden);
        sizes.push(num_actions);
        let online = Mlp::xavier(&sizes, rng);
        Self::from_network(online, config)
    }

    pub fn from_network(online: Mlp, config: DqnConfig) -> Self {
        let optimizer = Adam::new(online.num_params(), config.lr);
        Self { target: online.clone(), online, optimizer, config, train_steps: 0 }
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn epsilon(&self, env_step: u64) -> f64 {
        self.config.epsilon.value(env_step)
    }

    /// Network input for an observation: vectors pass through, discrete
    /// states become one-hot (1-based ids).
    pub fn encode(&self, obs: &Observation) -> Result<Vec<f64>> {
        let dim = self.online.input_size();
        match obs {
            Observation::Vector(v) if v.len() == dim => Ok(v.clone()),
            Observation::Vector(v) => Err(Error::DimensionMismatch { expected: dim, got: v.len() }),
            Observation::Discrete(s) if (1..=dim).contains(s) => {
                let mut x = vec![0.0; dim];
                x[s - 1] = 1.0;
                Ok(x)
            }
            Observation::Discrete(s) => Err(Error::InvalidArgument(format!("state {s} outside 1..={dim}"))),
        }
    }

    fn values(&self, net: &Mlp, obs: &Observation) -> [f64; 16] {
        let mut out = [0.0; 16];
        let n = net.output_size();
        match obs {
            Observation::Vector(v) => net.forward_into(v, &mut out[..n]),
            Observation::Discrete(_) => {
                let x = self.encode(obs).expect("state within the one-hot range");
                net.forward_into(&x, &mut out[..n]);
            }
        }
        out
    }

    pub fn q_values(&self, obs: &Observation) -> Vec<f64> {
        self.values(&self.online, obs)[..self.online.output_size()].to_vec()
    }

    /// ε-greedy action. One uniform draw decides exploration on every call,
    /// so the generator advances identically whatever the outcome.
    pub fn act(&self, state: &Observation, rng: &mut crate::Rng, env_step: u64) -> usize {
        let explore = rng.random::<f64>() < self.epsilon(env_step);
        if explore {
            rng.random_range(0..self.online.output_size())
        } else {
            self.greedy_action(state)
        }
    }

    pub fn greedy_action(&self, state: &Observation) -> usize {
        let n = self.online.output_size();
        argmax(&self.values(&self.online, state)[..n])
    }

    /// One weighted squared-TD gradient step against the target network.
    pub fn train_step(&mut self, batch: &Batch<'_>) -> Result<TrainStats> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let n_out = self.online.output_size();
        let mut inputs = Vec::with_capacity(batch.len());
        let mut actions = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        let mut td_abs = Vec::with_capacity(batch.len());
        let mut max_abs_q: f64 = 0.0;
        for t in &batch.transitions {
            let y = if t.done {
                t.reward
            } else {
                let next = self.values(&self.target, &t.next_state);
                t.reward + self.config.gamma * next[..n_out].iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let q = self.values(&self.online, &t.state)[t.action];
            max_abs_q = max_abs_q.max(q.abs());
            td_abs.push((q - y).abs());
            inputs.push(self.encode(&t.state)?);
            actions.push(t.action);
            targets.push(y);
        }
        let input_refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let (loss, grads) = self.online.loss_and_gradients(&input_refs, &actions, &targets, &batch.weights)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss {loss}")));
        }
        self.optimizer.step(self.online.params_mut(), &grads);
        self.train_steps += 1;
        if self.config.target_update_every > 0 && self.train_steps.is_multiple_of(self.config.target_update_every) {
            self.target = self.online.clone();
        }
        Ok(TrainStats { loss, td_abs, max_abs_q })
    }
}

impl ActionValues for DqnLearner {
    fn num_actions(&self) -> usize {
        self.online.output_size()
    }

    fn q_value(&self, state: &Observation, action: usize) -> f64 {
        self.values(&self.online, state)[action]
    }

    fn max_target_q(&self, state: &Observation) -> f64 {
        let n = self.target.output_size();
        self.values(&self.target, state)[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::{ReplayBuffer, Transition};
    use crate::rng_from_seed;

    fn vec_transition(s: [f64; 4], a: usize, r: f64, s2: [f64; 4], done: bool) -> Transition {
        Transition {
            state: Observation::Vector(s.to_vec()),
            action: a,
            reward: r,
            next_state: Observation::Vector(s2.to_vec()),
            done,
            truncated: false,
            episode_id: 0,
            step_index: 0,
        }
    }

    fn random_buffer(rng: &mut crate::Rng, n: usize) -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(n);
        for _ in 0..n {
            let s = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let s2 = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            buf.push(vec_transition(s, rng.random_range(0..2), rng.random_range(-1.0..1.0), s2, rng.random_bool(0.2)));
        }
        buf
    }

    #[test]
    fn epsilon_schedule_endpoints() {
        let sched = EpsilonSchedule::from_ratio(1.0, 0.01, 0.4, 1000);
        assert_eq!(sched.value(0), 1.0);
        assert_eq!(sched.value(400), 0.01);
        assert_eq!(sched.value(10_000), 0.01);
        assert!((sched.value(200) - 0.505).abs() < 1e-12);
        for step in 0..1200 {
            let e = sched.value(step);
            assert!((0.01..=1.0).contains(&e));
        }
    }

    #[test]
    fn greedy_when_epsilon_zero() {
        let mut config = DqnConfig::default();
        config.epsilon = EpsilonSchedule { max: 0.0, min: 0.0, decay_steps: 0 };
        let mut rng = rng_from_seed(3);
        let learner = DqnLearner::new(4, 2, config, &mut rng);
        let s = Observation::Vector(vec![0.1, -0.2, 0.03, 0.4]);
        let first = learner.act(&s, &mut rng, 0);
        for step in 0..50 {
            assert_eq!(learner.act(&s, &mut rng, step), first);
        }
        assert_eq!(first, learner.greedy_action(&s));
    }

    #[test]
    fn argmax_unchanged_by_output_shift() {
        let mut rng = rng_from_seed(21);
        let learner = DqnLearner::new(4, 2, DqnConfig::default(), &mut rng);
        let mut shifted = learner.clone();
        // the output biases are the last two parameters
        let n = shifted.online.num_params();
        for p in &mut shifted.online.params_mut()[n - 2..] {
            *p += 3.7;
        }
        for _ in 0..200 {
            let s = Observation::Vector((0..4).map(|_| rng.random_range(-2.0..2.0)).collect());
            assert_eq!(learner.greedy_action(&s), shifted.greedy_action(&s));
        }
    }

    #[test]
    fn fixed_point_batch_has_zero_loss_and_no_update() {
        // a zero network with zero rewards and terminal flags is already exact
        let net = Mlp::zeros(&[4, 8, 5, 2]);
        let mut learner = DqnLearner::from_network(net.clone(), DqnConfig::default());
        let mut buf = ReplayBuffer::new(4);
        for i in 0..4 {
            let s = [i as f64, 0.5, -0.5, 1.0];
            buf.push(vec_transition(s, i % 2, 0.0, s, true));
        }
        let stats = learner.train_step(&buf.batch(vec![0, 1, 2, 3]).unwrap()).unwrap();
        assert_eq!(stats.loss, 0.0);
        assert_eq!(learner.online, net);
    }

    #[test]
    fn unit_weights_give_plain_mse() {
        let mut rng = rng_from_seed(8);
        let buf = random_buffer(&mut rng, 16);
        let learner = DqnLearner::new(4, 2, DqnConfig::default(), &mut rng);
        let mut a = learner.clone();
        let stats = a.train_step(&buf.batch((0..16).collect()).unwrap()).unwrap();
        let mse = stats.td_abs.iter().map(|d| d * d).sum::<f64>() / 16.0;
        assert!((stats.loss - mse).abs() < 1e-12);
    }

    #[test]
    fn target_network_syncs_on_schedule() {
        let mut rng = rng_from_seed(4);
        let buf = random_buffer(&mut rng, 32);
        let mut config = DqnConfig::default();
        config.lr = 1e-2;
        config.target_update_every = 3;
        let mut learner = DqnLearner::new(4, 2, config, &mut rng);
        let frozen = learner.target.clone();
        let probe = Observation::Vector(vec![0.3, 0.1, -0.2, 0.05]);
        let before = learner.max_target_q(&probe);
        for step in 1..=7u64 {
            learner.train_step(&buf.batch((0..32).collect()).unwrap()).unwrap();
            if step % 3 == 0 {
                assert_eq!(learner.target, learner.online);
            } else if step < 3 {
                assert_eq!(learner.target, frozen);
                assert_eq!(learner.max_target_q(&probe).to_bits(), before.to_bits());
            } else {
                assert_ne!(learner.target, learner.online);
            }
        }
        assert_eq!(learner.train_steps(), 7);
    }

    #[test]
    fn diverging_loss_is_reported() {
        let mut net = Mlp::zeros(&[4, 2]);
        net.params_mut()[0] = f64::MAX;
        let mut learner = DqnLearner::from_network(net, DqnConfig::default());
        let mut buf = ReplayBuffer::new(1);
        buf.push(vec_transition([1e10, 0.0, 0.0, 0.0], 0, 0.0, [0.0; 4], true));
        let err = learner.train_step(&buf.batch(vec![0]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    #[test]
    fn one_hot_encoding() {
        let mut rng = rng_from_seed(0);
        let learner = DqnLearner::new(40, 2, DqnConfig::default(), &mut rng);
        let x = learner.encode(&Observation::Discrete(40)).unwrap();
        assert_eq!(x[39], 1.0);
        assert_eq!(x.iter().sum::<f64>(), 1.0);
        assert!(learner.encode(&Observation::Discrete(41)).is_err());
        assert!(learner.encode(&Observation::Vector(vec![0.0; 3])).is_err());
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = [1.0, -1.0];
        adam.step(&mut p, &[0.5, -2.0]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }
}
