use rand::Rng;

use super::layers::{Activation, DenseCache, DenseLayer, HiddenGrad, RnnCell, RnnTrace};
use super::params::{GradientRecord, Parameters};
use crate::error::{Error, Result};

/// A differentiable network that remembers its last forward pass.
pub trait Network: Parameters {
    type Input: ?Sized;

    fn forward(&mut self, input: &Self::Input) -> Result<Vec<f64>>;

    /// Exact partials of a scalar loss given `dL/d(output)` of the last forward pass.
    fn backward(&self, output_grad: &[f64]) -> Result<GradientRecord>;
}

pub(crate) fn visit_prefixed<P: Parameters>(p: &P, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
    p.visit(&mut |name, v| f(&format!("{prefix}.{name}"), v));
}

pub(crate) fn visit_prefixed_mut<P: Parameters>(p: &mut P, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
    p.visit_mut(&mut |name, v| f(&format!("{prefix}.{name}"), v));
}

/// Stack of dense layers.
#[derive(Clone, Debug)]
pub struct DenseNet {
    pub layers: Vec<DenseLayer>,
    caches: Option<Vec<DenseCache>>,
}

impl DenseNet {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers, caches: None })
    }
}

impl Parameters for DenseNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, l) in self.layers.iter().enumerate() {
            visit_prefixed(l, &format!("layer{i}"), f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            visit_prefixed_mut(l, &format!("layer{i}"), f);
        }
    }
}

impl Network for DenseNet {
    type Input = [f64];

    fn forward(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for l in &self.layers {
            let (y, c) = l.forward_cached(&x)?;
            caches.push(c);
            x = y;
        }
        self.caches = Some(caches);
        Ok(x)
    }

    fn backward(&self, output_grad: &[f64]) -> Result<GradientRecord> {
        let caches = self
            .caches
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let mut grads = GradientRecord::zeros_like(self);
        let mut dy = output_grad.to_vec();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let (w, rest) = grads.entries[2 * i..].split_at_mut(1);
            dy = layer.backward_into(cache, &dy, &mut w[0].values, &mut rest[0].values);
        }
        Ok(grads)
    }
}

/// Recurrent core followed by a dense read-out of the final hidden state.
#[derive(Clone, Debug)]
pub struct RecurrentNet {
    pub cell: RnnCell,
    pub head: DenseLayer,
    last: Option<(Vec<Vec<f64>>, RecurrentTrace)>,
}

/// Everything needed to backpropagate one sequence through a [`RecurrentNet`].
#[derive(Clone, Debug)]
pub struct RecurrentTrace {
    pub rnn: RnnTrace,
    pub head: DenseCache,
}

impl RecurrentNet {
    pub fn new(cell: RnnCell, head: DenseLayer) -> Result<Self> {
        if cell.hidden_size != head.input_dim() {
            return Err(Error::Shape(format!(
                "head expects {} inputs but the recurrent core has {} units",
                head.input_dim(),
                cell.hidden_size
            )));
        }
        Ok(Self { cell, head, last: None })
    }

    pub fn random<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let cell = RnnCell::random(input, hidden, rng);
        let head = DenseLayer::random(hidden, output, activation, rng);
        Self { cell, head, last: None }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize, activation: Activation) -> Self {
        Self {
            cell: RnnCell::zeros(input, hidden),
            head: DenseLayer::zeros(hidden, output, activation),
            last: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.cell.input_dim()
    }

    pub fn hidden_size(&self) -> usize {
        self.cell.hidden_size
    }

    /// Output for a sequence without recording anything.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let trace = self.cell.unroll_traced(inputs, &vec![0.0; self.cell.hidden_size])?;
        self.head.forward(trace.last())
    }

    pub fn forward_traced(&self, inputs: &[Vec<f64>]) -> Result<(Vec<f64>, RecurrentTrace)> {
        let rnn = self.cell.unroll_traced(inputs, &vec![0.0; self.cell.hidden_size])?;
        let (y, head) = self.head.forward_cached(rnn.last())?;
        Ok((y, RecurrentTrace { rnn, head }))
    }

    /// Accumulates `dL/dθ` for one sequence into `grads`, which must be
    /// congruent with `self`.
    pub fn backward_accumulate(
        &self,
        inputs: &[Vec<f64>],
        trace: &RecurrentTrace,
        output_grad: &[f64],
        grads: &mut GradientRecord,
    ) {
        let [w_in, w_rec, b, hw, hb] = &mut grads.entries[..] else {
            panic!("gradient record is not congruent with RecurrentNet");
        };
        let dh = self
            .head
            .backward_into(&trace.head, output_grad, &mut hw.values, &mut hb.values);
        self.cell.backward_into(
            inputs,
            &trace.rnn,
            HiddenGrad::Last(&dh),
            &mut w_in.values,
            &mut w_rec.values,
            &mut b.values,
        );
    }
}

impl Parameters for RecurrentNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        visit_prefixed(&self.cell, "rnn", f);
        visit_prefixed(&self.head, "head", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        visit_prefixed_mut(&mut self.cell, "rnn", f);
        visit_prefixed_mut(&mut self.head, "head", f);
    }
}

impl Network for RecurrentNet {
    type Input = [Vec<f64>];

    fn forward(&mut self, input: &[Vec<f64>]) -> Result<Vec<f64>> {
        let (y, trace) = self.forward_traced(input)?;
        self.last = Some((input.to_vec(), trace));
        Ok(y)
    }

    fn backward(&self, output_grad: &[f64]) -> Result<GradientRecord> {
        let (inputs, trace) = self
            .last
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let mut grads = GradientRecord::zeros_like(self);
        self.backward_accumulate(inputs, trace, output_grad, &mut grads);
        Ok(grads)
    }
}
