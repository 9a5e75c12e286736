use rand::Rng;

use crate::affinity::AffinityPrior;
use crate::error::{Error, Result};
use crate::market::AllocationAction;
use crate::numerics::{
    softmax, visit_prefixed, visit_prefixed_mut, Activation, DenseCache, DenseLayer, GradientRecord, HiddenGrad,
    Parameters, RecurrentNet, RecurrentTrace, RnnCell, RnnTrace,
};

pub const ACTION_DIM: usize = 5;
pub const RECURRENT_UNITS: usize = 3;
pub const CRITIC_WIDTH: usize = 1000;

/// The trailing `window` observations of `history`, or all of it when `window` is 0.
pub fn recent(history: &[Vec<f64>], window: usize) -> &[Vec<f64>] {
    if window == 0 || history.len() <= window {
        history
    } else {
        &history[history.len() - window..]
    }
}

/// Recurrent policy: observation history in, allocation on the simplex out.
#[derive(Clone, Debug)]
pub struct ActorNetwork {
    net: RecurrentNet,
}

impl ActorNetwork {
    pub fn random<R: Rng + ?Sized>(obs_dim: usize, rng: &mut R) -> Self {
        Self {
            net: RecurrentNet::random(obs_dim, RECURRENT_UNITS, ACTION_DIM, Activation::Softmax, rng),
        }
    }

    pub fn zeros(obs_dim: usize) -> Self {
        Self {
            net: RecurrentNet::zeros(obs_dim, RECURRENT_UNITS, ACTION_DIM, Activation::Softmax),
        }
    }

    pub fn from_net(net: RecurrentNet) -> Result<Self> {
        if net.head.activation != Activation::Softmax || net.head.output_dim() != ACTION_DIM {
            return Err(Error::Shape("actor head must be a 5-way softmax".into()));
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &RecurrentNet {
        &self.net
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Pre-softmax scores for the final step of `history`.
    pub fn logits(&self, history: &[Vec<f64>]) -> Result<Vec<f64>> {
        let states = self.net.cell.unroll(history, &vec![0.0; self.net.hidden_size()])?;
        let last = states
            .last()
            .ok_or_else(|| Error::Contract("actor needs a non-empty observation history".into()))?;
        self.net.head.pre_activation(last)
    }

    pub fn probabilities(&self, history: &[Vec<f64>]) -> Result<[f64; ACTION_DIM]> {
        let p = softmax(&self.logits(history)?);
        Ok(std::array::from_fn(|i| p[i]))
    }

    pub fn forward_traced(&self, history: &[Vec<f64>]) -> Result<(Vec<f64>, RecurrentTrace)> {
        if history.is_empty() {
            return Err(Error::Contract("actor needs a non-empty observation history".into()));
        }
        self.net.forward_traced(history)
    }

    pub fn backward_accumulate(
        &self,
        history: &[Vec<f64>],
        trace: &RecurrentTrace,
        output_grad: &[f64],
        grads: &mut GradientRecord,
    ) {
        self.net.backward_accumulate(history, trace, output_grad, grads);
    }

    /// Starts the policy at `prior`: output weights shrunk by `shrink` and
    /// the output bias set to the prior's log-probabilities.
    pub fn warm_start(&mut self, prior: &AffinityPrior, shrink: f64) {
        self.net.head.weights.as_mut_slice().iter_mut().for_each(|w| *w *= shrink);
        for (b, p) in self.net.head.bias.iter_mut().zip(prior.weights()) {
            *b = p.max(1e-6).ln();
        }
    }
}

impl Parameters for ActorNetwork {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        self.net.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.net.visit_mut(f);
    }
}

/// Deterministic action for the last step of `history` (no exploration noise).
pub fn act(actor: &ActorNetwork, history: &[Vec<f64>]) -> Result<AllocationAction> {
    AllocationAction::new(actor.probabilities(history)?)
}

/// Action-value estimate: recurrent summary of the observation history,
/// concatenated with the action, through a wide tanh layer to a linear scalar.
#[derive(Clone, Debug)]
pub struct CriticNetwork {
    pub cell: RnnCell,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

#[derive(Clone, Debug)]
pub struct CriticTrace {
    rnn: RnnTrace,
    hidden: DenseCache,
    output: DenseCache,
}

impl CriticNetwork {
    pub fn random<R: Rng + ?Sized>(obs_dim: usize, width: usize, rng: &mut R) -> Self {
        Self {
            cell: RnnCell::random(obs_dim, RECURRENT_UNITS, rng),
            hidden: DenseLayer::random(RECURRENT_UNITS + ACTION_DIM, width, Activation::Tanh, rng),
            output: DenseLayer::random(width, 1, Activation::Identity, rng),
        }
    }

    pub fn zeros(obs_dim: usize, width: usize) -> Self {
        Self {
            cell: RnnCell::zeros(obs_dim, RECURRENT_UNITS),
            hidden: DenseLayer::zeros(RECURRENT_UNITS + ACTION_DIM, width, Activation::Tanh),
            output: DenseLayer::zeros(width, 1, Activation::Identity),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.cell.input_dim()
    }

    pub fn width(&self) -> usize {
        self.hidden.output_dim()
    }

    pub fn q(&self, history: &[Vec<f64>], action: &[f64]) -> Result<f64> {
        self.forward_traced(history, action).map(|(q, _)| q)
    }

    pub fn forward_traced(&self, history: &[Vec<f64>], action: &[f64]) -> Result<(f64, CriticTrace)> {
        if action.len() != ACTION_DIM {
            return Err(Error::Shape(format!("critic expects {ACTION_DIM} action values, got {}", action.len())));
        }
        if history.is_empty() {
            return Err(Error::Contract("critic needs a non-empty observation history".into()));
        }
        let rnn = self.cell.unroll_traced(history, &[0.0; RECURRENT_UNITS])?;
        let mut joint = rnn.last().to_vec();
        joint.extend_from_slice(action);
        let (h, hidden) = self.hidden.forward_cached(&joint)?;
        let (q, output) = self.output.forward_cached(&h)?;
        Ok((q[0], CriticTrace { rnn, hidden, output }))
    }

    /// Accumulates `dq·∂Q/∂θ` into `grads` and returns `dq·∂Q/∂a`.
    pub fn backward_accumulate(
        &self,
        history: &[Vec<f64>],
        trace: &CriticTrace,
        dq: f64,
        grads: &mut GradientRecord,
    ) -> [f64; ACTION_DIM] {
        let [w_in, w_rec, b, hw, hb, ow, ob] = &mut grads.entries[..] else {
            panic!("gradient record is not congruent with CriticNetwork");
        };
        let dh = self.output.backward_into(&trace.output, &[dq], &mut ow.values, &mut ob.values);
        let djoint = self.hidden.backward_into(&trace.hidden, &dh, &mut hw.values, &mut hb.values);
        self.cell.backward_into(
            history,
            &trace.rnn,
            HiddenGrad::Last(&djoint[..RECURRENT_UNITS]),
            &mut w_in.values,
            &mut w_rec.values,
            &mut b.values,
        );
        std::array::from_fn(|i| djoint[RECURRENT_UNITS + i])
    }

    /// `dq·∂Q/∂a` without parameter gradients.
    pub fn action_gradient(&self, trace: &CriticTrace, dq: f64) -> [f64; ACTION_DIM] {
        let dh = self.output.input_gradient(&trace.output, &[dq]);
        let djoint = self.hidden.input_gradient(&trace.hidden, &dh);
        std::array::from_fn(|i| djoint[RECURRENT_UNITS + i])
    }
}

impl Parameters for CriticNetwork {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        visit_prefixed(&self.cell, "rnn", f);
        visit_prefixed(&self.hidden, "hidden", f);
        visit_prefixed(&self.output, "out", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        visit_prefixed_mut(&mut self.cell, "rnn", f);
        visit_prefixed_mut(&mut self.hidden, "hidden", f);
        visit_prefixed_mut(&mut self.output, "out", f);
    }
}
