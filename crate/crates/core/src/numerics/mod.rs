//! Small dense linear-algebra and neural-network kernel with hand-coded
//! gradients. Shapes are fixed per network; there is no general autodiff.

mod gradcheck;
mod layers;
mod lstsq;
mod matrix;
mod network;
mod optim;
mod params;

pub use gradcheck::{finite_diff_check, finite_diff_report, GradCheckReport};
pub use layers::{softmax, softmax_in_place, Activation, DenseCache, DenseLayer, HiddenGrad, RnnCell, RnnTrace};
pub use lstsq::{least_squares, min_norm_least_squares, spd_condition, symmetric_eigen, CONDITION_LIMIT};
pub use matrix::RealMatrix;
pub use network::{DenseNet, Network, RecurrentNet, RecurrentTrace};
pub(crate) use network::{visit_prefixed, visit_prefixed_mut};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{GradEntry, GradientRecord, Parameters};
