use std::io::{self, Write};

use crate::error::{Error, Result};

/// Widest layer the allocation-free forward pass supports.
const MAX_WIDTH: usize = 256;

/// Fully connected network with rectifier hidden layers and a linear output.
///
/// Parameters live in one flat vector. For each layer in order it holds the
/// weight matrix (`out x in`, row-major) followed by the `out` biases; the
/// same layout is used by [`Gradients`] and by snapshot files.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Gradient of a scalar loss with respect to [`Mlp`] parameters.
pub type Gradients = Vec<f64>;

impl Mlp {
    /// All-zero network.
    ///
    /// # Panics
    /// If fewer than two layer sizes are given, any size is zero, or a layer
    /// is wider than the supported maximum.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        assert!(sizes.iter().all(|&n| (1..=MAX_WIDTH).contains(&n)), "layer sizes must lie in 1..={MAX_WIDTH}");
        let count = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Self { sizes: sizes.to_vec(), params: vec![0.0; count] }
    }

    /// Uniform fan-in/fan-out scaled weights, zero biases.
    pub fn xavier<R: rand::Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            offset += fan_out * (fan_in + 1);
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(Error::DimensionMismatch { expected: self.input_size(), got: input.len() });
        }
        let mut out = vec![0.0; self.output_size()];
        self.forward_into(input, &mut out);
        Ok(out)
    }

    /// Forward pass into `out` without heap allocation. Input length must
    /// already be checked.
    pub(crate) fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        let mut a = [0.0; MAX_WIDTH];
        let mut b = [0.0; MAX_WIDTH];
        a[..input.len()].copy_from_slice(input);
        let last = self.sizes.len() - 2;
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + n_out * (n_in + 1)];
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let z = biases[o] + row.iter().zip(&a[..n_in]).map(|(w, x)| w * x).sum::<f64>();
                b[o] = if l < last { z.max(0.0) } else { z };
            }
            std::mem::swap(&mut a, &mut b);
            offset += n_out * (n_in + 1);
        }
        out.copy_from_slice(&a[..self.output_size()]);
    }

    /// Weighted squared error on one output per sample:
    /// `mean_i w_i (Q(x_i)[a_i] - y_i)^2`, and its gradient.
    pub fn loss_and_gradients(
        &self,
        inputs: &[&[f64]],
        actions: &[usize],
        targets: &[f64],
        weights: &[f64],
    ) -> Result<(f64, Gradients)> {
        let n = inputs.len();
        if actions.len() != n || targets.len() != n || weights.len() != n || n == 0 {
            return Err(Error::InvalidArgument("inputs, actions, targets and weights must share a nonzero length".into()));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let layers = self.sizes.len() - 1;
        // activations[l] is the input to layer l; activations[layers] the output
        let mut activations: Vec<Vec<f64>> = self.sizes.iter().map(|&s| vec![0.0; s]).collect();
        for i in 0..n {
            if inputs[i].len() != self.input_size() {
                return Err(Error::DimensionMismatch { expected: self.input_size(), got: inputs[i].len() });
            }
            if actions[i] >= self.output_size() {
                return Err(Error::InvalidArgument(format!("action {} out of range", actions[i])));
            }
            activations[0].copy_from_slice(inputs[i]);
            let mut offset = 0;
            for l in 0..layers {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let (prev, next) = activations.split_at_mut(l + 1);
                let (x, y) = (&prev[l], &mut next[0]);
                for o in 0..n_out {
                    let row = &self.params[offset + o * n_in..offset + (o + 1) * n_in];
                    let z = self.params[offset + n_in * n_out + o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
                    y[o] = if l + 1 < layers { z.max(0.0) } else { z };
                }
                offset += n_out * (n_in + 1);
            }

            let q = activations[layers][actions[i]];
            let err = q - targets[i];
            loss += weights[i] * err * err;

            // backward pass; delta holds dL/dz for the current layer
            let mut delta = vec![0.0; self.output_size()];
            delta[actions[i]] = 2.0 * weights[i] * err / n as f64;
            let mut offset_end = self.params.len();
            for l in (0..layers).rev() {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let offset = offset_end - n_out * (n_in + 1);
                let x = &activations[l];
                for o in 0..n_out {
                    if delta[o] == 0.0 {
                        continue;
                    }
                    for k in 0..n_in {
                        grads[offset + o * n_in + k] += delta[o] * x[k];
                    }
                    grads[offset + n_in * n_out + o] += delta[o];
                }
                if l > 0 {
                    let mut prev_delta = vec![0.0; n_in];
                    for (k, d) in prev_delta.iter_mut().enumerate() {
                        // x[k] > 0 exactly when the rectifier was active
                        if x[k] > 0.0 {
                            *d = (0..n_out).map(|o| self.params[offset + o * n_in + k] * delta[o]).sum();
                        }
                    }
                    delta = prev_delta;
                }
                offset_end = offset;
            }
        }
        Ok((loss / n as f64, grads))
    }

    /// Write parameters one per line after a header describing the layout.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> io::Result<()> {
        let sizes: Vec<String> = self.sizes.iter().map(ToString::to_string).collect();
        writeln!(out, "# layer sizes: {}", sizes.join(" "))?;
        writeln!(out, "# per layer: weights (out x in, row-major), then biases (out)")?;
        for p in &self.params {
            writeln!(out, "{p}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[4, 8, 5, 2]);
        assert_eq!(net.forward(&[0.3, -1.0, 2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.num_params(), 8 * (4 + 1) + 5 * (8 + 1) + 2 * (5 + 1));
    }

    #[test]
    fn single_layer_is_affine() {
        let mut net = Mlp::zeros(&[2, 2]);
        net.params_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 0.5, -0.5]);
        // [[1,2],[3,4]] . [1,-1] + [0.5,-0.5]
        assert_eq!(net.forward(&[1.0, -1.0]).unwrap(), vec![-0.5, -1.5]);
    }

    #[test]
    fn hidden_layers_rectify() {
        let mut net = Mlp::zeros(&[1, 1, 1]);
        // hidden = relu(-x), out = 2 * hidden + 1
        net.params_mut().copy_from_slice(&[-1.0, 0.0, 2.0, 1.0]);
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![1.0]);
        assert_eq!(net.forward(&[-3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn output_shape_and_dimension_check() {
        let mut rng = rng_from_seed(0);
        for out in 1..5 {
            let net = Mlp::xavier(&[3, 8, 5, out], &mut rng);
            assert_eq!(net.forward(&[0.1, 0.2, 0.3]).unwrap().len(), out);
        }
        let net = Mlp::xavier(&[3, 2], &mut rng);
        assert_eq!(net.forward(&[1.0]).unwrap_err(), Error::DimensionMismatch { expected: 3, got: 1 });
    }

    #[test]
    fn snapshot_layout() {
        let mut net = Mlp::zeros(&[2, 1]);
        net.params_mut().copy_from_slice(&[0.25, -1.5, 3.0]);
        let mut out = Vec::new();
        net.write_snapshot(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let values: Vec<f64> = text.lines().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect();
        assert_eq!(values, net.params());
        assert!(text.starts_with("# layer sizes: 2 1\n"));
    }
}
