//! Reverse-mode automatic differentiation over dense `f64` tensors.

mod gradcheck;
mod graph;
mod lstm;
mod optim;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{Graph, Var};
pub use lstm::{lstm_run, lstm_step, LstmCellParams};
pub use optim::{Optimizer, OptimizerConfig};
pub use params::{ParamGrads, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

pub(crate) use graph::sigmoid as sigmoid_scalar;
