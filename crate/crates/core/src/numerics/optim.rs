use serde::{Deserialize, Serialize};

use super::params::{GradientRecord, Parameters};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Plain gradient descent, `θ ← θ − lr·g`.
    Sgd,
    /// Adaptive moments with bias correction.
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(Error::Contract(format!("unknown optimizer '{other}'"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        })
    }
}

/// First-order optimizer together with its running state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn sgd() -> Self {
        Self::new(OptimizerKind::Sgd)
    }

    pub fn adam() -> Self {
        Self::new(OptimizerKind::Adam)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one descent step. Fails without touching `params` if any
    /// gradient entry is non-finite.
    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &GradientRecord, learning_rate: f64) -> Result<()> {
        if !(learning_rate > 0.0) {
            return Err(Error::Contract(format!("learning rate {learning_rate} must be positive")));
        }
        if !grads.is_congruent(params) {
            return Err(Error::Shape("gradient record does not match the parameter set".into()));
        }
        if let Some(path) = grads.first_non_finite() {
            return Err(Error::NonFinite { path });
        }
        let flat = grads.flat();
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                let mut i = 0;
                params.visit_mut(&mut |_, p| {
                    for v in p.iter_mut() {
                        *v -= learning_rate * flat[i];
                        i += 1;
                    }
                });
            }
            OptimizerKind::Adam => {
                if self.first.len() != flat.len() {
                    self.first = vec![0.0; flat.len()];
                    self.second = vec![0.0; flat.len()];
                }
                let t = self.steps as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let (m, v) = (&mut self.first, &mut self.second);
                let mut i = 0;
                params.visit_mut(&mut |_, p| {
                    for w in p.iter_mut() {
                        let g = flat[i];
                        m[i] = b1 * m[i] + (1.0 - b1) * g;
                        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        *w -= learning_rate * m_hat / (v_hat.sqrt() + eps);
                        i += 1;
                    }
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad_of(values: Vec<f64>) -> GradientRecord {
        let mut g = GradientRecord::zeros_like(&values);
        g.entries[0].values = values;
        g
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for mut opt in [Optimizer::sgd(), Optimizer::adam()] {
            let mut w = vec![1.0, -2.0];
            opt.step(&mut w, &grad_of(vec![0.0, 0.0]), 0.1).unwrap();
            assert_eq!(w, vec![1.0, -2.0]);
        }
    }

    #[test]
    fn plain_gradient_one_step() {
        let mut w = vec![1.0];
        Optimizer::sgd().step(&mut w, &grad_of(vec![0.5]), 0.1).unwrap();
        assert!((w[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn adam_step_magnitude_approaches_learning_rate() {
        let mut w = vec![0.0];
        let mut opt = Optimizer::adam();
        let lr = 0.01;
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = w[0];
            opt.step(&mut w, &grad_of(vec![0.3]), lr).unwrap();
            last = before - w[0];
        }
        assert!((last - lr).abs() < 1e-6 * lr.max(1.0) + 1e-9);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut w = vec![1.0, 2.0];
        let err = Optimizer::adam()
            .step(&mut w, &grad_of(vec![0.0, f64::NAN]), 0.1)
            .unwrap_err();
        match err {
            Error::NonFinite { path } => assert_eq!(path, "w[1]"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(w, vec![1.0, 2.0]);
    }
}
