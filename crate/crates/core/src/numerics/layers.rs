use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::RealMatrix;
use super::params::Parameters;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Softmax,
}

impl Activation {
    pub fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Softmax => softmax_in_place(z),
        }
    }

    /// Gradient w.r.t. the pre-activation given the activated output `y`
    /// and the gradient `dy` w.r.t. that output.
    pub fn backward(self, y: &[f64], dy: &[f64]) -> Vec<f64> {
        match self {
            Activation::Identity => dy.to_vec(),
            Activation::Tanh => y.iter().zip(dy).map(|(y, d)| d * (1.0 - y * y)).collect(),
            Activation::Softmax => {
                let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
                y.iter().zip(dy).map(|(y, d)| y * (d - dot)).collect()
            }
        }
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> RealMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    RealMatrix::from_vec(rows, cols, data).expect("shape is consistent by construction")
}

/// Fully connected layer computing `activation(Wᵀx + b)` with `W` stored in×out.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: RealMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Values recorded by a forward pass and consumed by the matching backward pass.
#[derive(Clone, Debug)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: RealMatrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::Shape(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weights.cols()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weights: RealMatrix::zeros(input, output),
            bias: vec![0.0; output],
            activation,
        }
    }

    /// Uniform initialization in ±1/√fan_in.
    pub fn random<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        let weights = uniform_matrix(input, output, bound, rng);
        let bias = (0..output).map(|_| rng.random_range(-bound..=bound)).collect();
        Self {
            weights,
            bias,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    /// `Wᵀx + b`, before the activation.
    pub fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "layer expects input of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut z = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (zj, w) in z.iter_mut().zip(self.weights.row(i)) {
                *zj += xi * w;
            }
        }
        Ok(z)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.pre_activation(x)?;
        self.activation.apply(&mut z);
        Ok(z)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, DenseCache)> {
        let y = self.forward(x)?;
        let cache = DenseCache {
            input: x.to_vec(),
            output: y.clone(),
        };
        Ok((y, cache))
    }

    /// Accumulates parameter gradients into `dw`/`db` and returns the
    /// gradient w.r.t. the layer input.
    pub fn backward_into(&self, cache: &DenseCache, dy: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
        let dz = self.activation.backward(&cache.output, dy);
        let out = self.output_dim();
        for (b, d) in db.iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dx = vec![0.0; self.input_dim()];
        for (i, &xi) in cache.input.iter().enumerate() {
            let w_row = self.weights.row(i);
            let dw_row = &mut dw[i * out..(i + 1) * out];
            let mut acc = 0.0;
            for j in 0..out {
                dw_row[j] += xi * dz[j];
                acc += w_row[j] * dz[j];
            }
            dx[i] = acc;
        }
        dx
    }
}

impl DenseLayer {
    /// Gradient w.r.t. the layer input only, without touching parameter gradients.
    pub fn input_gradient(&self, cache: &DenseCache, dy: &[f64]) -> Vec<f64> {
        let dz = self.activation.backward(&cache.output, dy);
        (0..self.input_dim())
            .map(|i| self.weights.row(i).iter().zip(&dz).map(|(w, d)| w * d).sum())
            .collect()
    }
}

impl Parameters for DenseLayer {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("w", self.weights.as_slice());
        f("b", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("w", self.weights.as_mut_slice());
        f("b", &mut self.bias);
    }
}

/// Vanilla tanh recurrent cell: `h_t = tanh(W_in·x_t + W_rec·h_{t-1} + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnCell {
    /// hidden × input
    pub input_weights: RealMatrix,
    /// hidden × hidden
    pub recurrent_weights: RealMatrix,
    pub bias: Vec<f64>,
    pub hidden_size: usize,
}

/// Hidden states recorded during an unroll; row 0 is `h0`.
#[derive(Clone, Debug)]
pub struct RnnTrace {
    hidden: usize,
    states: Vec<f64>,
}

impl RnnTrace {
    pub fn steps(&self) -> usize {
        self.states.len() / self.hidden - 1
    }

    /// `h_t` for t in 0..=steps (t = 0 is the initial state).
    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.steps())
    }
}

/// Upstream gradient with respect to the hidden states of an unroll.
pub enum HiddenGrad<'a> {
    /// Only the final hidden state feeds the loss.
    Last(&'a [f64]),
    /// One gradient per step, for `h_1..=h_T`.
    PerStep(&'a [Vec<f64>]),
}

impl RnnCell {
    pub fn new(input_weights: RealMatrix, recurrent_weights: RealMatrix, bias: Vec<f64>) -> Result<Self> {
        let hidden = recurrent_weights.rows();
        if recurrent_weights.cols() != hidden || input_weights.rows() != hidden || bias.len() != hidden {
            return Err(Error::Shape(format!(
                "inconsistent RNN shapes: W_in {}x{}, W_rec {}x{}, bias {}",
                input_weights.rows(),
                input_weights.cols(),
                recurrent_weights.rows(),
                recurrent_weights.cols(),
                bias.len()
            )));
        }
        Ok(Self {
            input_weights,
            recurrent_weights,
            bias,
            hidden_size: hidden,
        })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input_weights: RealMatrix::zeros(hidden, input),
            recurrent_weights: RealMatrix::zeros(hidden, hidden),
            bias: vec![0.0; hidden],
            hidden_size: hidden,
        }
    }

    /// Uniform initialization in ±1/√fan_in with fan_in = input + hidden.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((input + hidden) as f64).sqrt();
        let input_weights = uniform_matrix(hidden, input, bound, rng);
        let recurrent_weights = uniform_matrix(hidden, hidden, bound, rng);
        let bias = (0..hidden).map(|_| rng.random_range(-bound..=bound)).collect();
        Self {
            input_weights,
            recurrent_weights,
            bias,
            hidden_size: hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.cols()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "RNN expects input of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    fn check_hidden(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.hidden_size {
            return Err(Error::Shape(format!(
                "RNN hidden state must have length {}, got {}",
                self.hidden_size,
                h.len()
            )));
        }
        Ok(())
    }

    #[inline]
    fn step_into(&self, x: &[f64], h: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mut z = self.bias[k];
            for (w, xi) in self.input_weights.row(k).iter().zip(x) {
                z += w * xi;
            }
            for (w, hi) in self.recurrent_weights.row(k).iter().zip(h) {
                z += w * hi;
            }
            *o = z.tanh();
        }
    }

    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_hidden(h)?;
        let mut out = vec![0.0; self.hidden_size];
        self.step_into(x, h, &mut out);
        Ok(out)
    }

    /// All hidden states `h_1..=h_T`; an empty input sequence yields an empty output.
    pub fn unroll(&self, inputs: &[Vec<f64>], h0: &[f64]) -> Result<Vec<Vec<f64>>> {
        let trace = self.unroll_traced(inputs, h0)?;
        Ok((1..=trace.steps()).map(|t| trace.state(t).to_vec()).collect())
    }

    pub fn unroll_traced(&self, inputs: &[Vec<f64>], h0: &[f64]) -> Result<RnnTrace> {
        self.check_hidden(h0)?;
        let h = self.hidden_size;
        let mut states = Vec::with_capacity((inputs.len() + 1) * h);
        states.extend_from_slice(h0);
        let mut next = vec![0.0; h];
        for (t, x) in inputs.iter().enumerate() {
            self.check_input(x)?;
            self.step_into(x, &states[t * h..(t + 1) * h], &mut next);
            states.extend_from_slice(&next);
        }
        Ok(RnnTrace { hidden: h, states })
    }

    /// Backpropagation through time over the full trace. Accumulates into
    /// the parameter gradient slices and returns the gradient w.r.t. `h0`.
    pub fn backward_into(
        &self,
        inputs: &[Vec<f64>],
        trace: &RnnTrace,
        upstream: HiddenGrad<'_>,
        dw_in: &mut [f64],
        dw_rec: &mut [f64],
        db: &mut [f64],
    ) -> Vec<f64> {
        let h = self.hidden_size;
        let steps = trace.steps();
        let n_in = self.input_dim();
        let mut dh = vec![0.0; h];
        if let HiddenGrad::Last(g) = upstream {
            dh.copy_from_slice(g);
        }
        let mut dz = vec![0.0; h];
        for t in (1..=steps).rev() {
            if let HiddenGrad::PerStep(gs) = upstream {
                for (d, g) in dh.iter_mut().zip(&gs[t - 1]) {
                    *d += g;
                }
            }
            let ht = trace.state(t);
            let hprev = trace.state(t - 1);
            let x = &inputs[t - 1];
            for k in 0..h {
                dz[k] = dh[k] * (1.0 - ht[k] * ht[k]);
                db[k] += dz[k];
                let row_in = &mut dw_in[k * n_in..(k + 1) * n_in];
                for (w, xi) in row_in.iter_mut().zip(x) {
                    *w += dz[k] * xi;
                }
                let row_rec = &mut dw_rec[k * h..(k + 1) * h];
                for (w, hi) in row_rec.iter_mut().zip(hprev) {
                    *w += dz[k] * hi;
                }
            }
            for (j, d) in dh.iter_mut().enumerate() {
                *d = (0..h).map(|k| self.recurrent_weights.get(k, j) * dz[k]).sum();
            }
        }
        dh
    }
}

impl Parameters for RnnCell {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("w_in", self.input_weights.as_slice());
        f("w_rec", self.recurrent_weights.as_slice());
        f("b", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("w_in", self.input_weights.as_mut_slice());
        f("w_rec", self.recurrent_weights.as_mut_slice());
        f("b", &mut self.bias);
    }
}
