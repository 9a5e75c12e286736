//! Versioned JSON parameter dump. Field order: `version`, `label`, `prior`,
//! `config`, `obs_dim`, `hidden`, then `tensors` in parameter-visit order
//! (`rnn.w_in`, `rnn.w_rec`, `rnn.b`, `head.w`, `head.b`), each row-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::networks::{ActorNetwork, RECURRENT_UNITS};
use super::train::TrainConfig;
use crate::affinity::AffinityPrior;
use crate::error::{Error, Result};
use crate::numerics::Parameters;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub label: String,
    pub prior: [f64; 5],
    pub config: TrainConfig,
    pub obs_dim: usize,
    pub hidden: usize,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(label: impl Into<String>, prior: &AffinityPrior, config: &TrainConfig, actor: &ActorNetwork) -> Self {
        let mut tensors = Vec::new();
        actor.visit(&mut |name, v| {
            tensors.push(NamedTensor {
                name: name.to_string(),
                values: v.to_vec(),
            })
        });
        Self {
            version: CHECKPOINT_VERSION,
            label: label.into(),
            prior: *prior.weights(),
            config: config.clone(),
            obs_dim: actor.obs_dim(),
            hidden: RECURRENT_UNITS,
            tensors,
        }
    }

    pub fn prior(&self) -> Result<AffinityPrior> {
        AffinityPrior::new(self.prior)
    }

    pub fn actor(&self) -> Result<ActorNetwork> {
        if self.hidden != RECURRENT_UNITS {
            return Err(Error::Shape(format!("checkpoint has {} recurrent units", self.hidden)));
        }
        let mut actor = ActorNetwork::zeros(self.obs_dim);
        let mut tensors = self.tensors.iter();
        let mut failure = None;
        actor.visit_mut(&mut |name, slot| match tensors.next() {
            Some(t) if t.name == name && t.values.len() == slot.len() => slot.copy_from_slice(&t.values),
            _ if failure.is_some() => {}
            _ => failure = Some(format!("tensor {name} missing or misshapen")),
        });
        if let Some(msg) = failure {
            return Err(Error::Shape(msg));
        }
        if tensors.next().is_some() {
            return Err(Error::Shape("checkpoint has surplus tensors".into()));
        }
        if let Some(bad) = self.tensors.iter().find(|t| t.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { path: bad.name.clone() });
        }
        Ok(actor)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint fields are serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported checkpoint version {}", c.version),
            });
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn actor_survives_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let actor = ActorNetwork::random(13, &mut rng);
        let ckpt = Checkpoint::new("openness", &AffinityPrior::uniform(), &TrainConfig::default(), &actor);
        let back = Checkpoint::from_json(&ckpt.to_json()).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.actor().unwrap().flat_params(), actor.flat_params());
    }

    #[test]
    fn tampered_checkpoints_are_rejected() {
        let actor = ActorNetwork::zeros(4);
        let mut ckpt = Checkpoint::new("x", &AffinityPrior::uniform(), &TrainConfig::default(), &actor);
        ckpt.tensors[1].values.pop();
        assert!(ckpt.actor().is_err());
        let mut future = Checkpoint::new("x", &AffinityPrior::uniform(), &TrainConfig::default(), &actor);
        future.version = 99;
        assert!(Checkpoint::from_json(&future.to_json()).is_err());
        assert!(matches!(Checkpoint::from_json("{"), Err(Error::Parse { .. })));
    }
}
