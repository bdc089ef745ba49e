//! Dense-network numerics: layers, a reverse-mode tape, optimizers, a
//! finite-difference gradient checker and the `LANN1` container.

pub mod container;
mod gradcheck;
mod layer;
mod loss;
mod matrix;
mod optim;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport, Probe};
pub use layer::{dense_forward, Activation, DenseLayer, Mlp};
pub use loss::{argmax, cross_entropy, cross_entropy_index, one_hot, softmax, LOG_FLOOR};
pub use matrix::Matrix;
pub use optim::{OptimizerKind, OptimizerState};
pub use tape::{Gradients, ParamId, Tape, Var};
