//! Intrinsic-affinity policy regularization for hierarchical portfolio
//! allocation.
//!
//! Five prototypical investment agents are trained with deep deterministic
//! policy gradients whose actor objective is penalized by the squared
//! distance between the batch-mean action and a per-trait prior. A
//! high-level orchestration agent then blends the prototypes for a given
//! customer personality, again regularized toward a personality-derived
//! prior. A small recurrent personality model and an inverse-regression
//! attractor analysis of its state space supply the behavioral features.

pub mod affinity;
pub mod cli;
pub mod ddpg;
pub mod error;
pub mod market;
pub mod numerics;
pub mod orchestrator;
pub mod prototypes;
pub mod statespace;

pub use error::{Error, Result};
