//! Neural forecasting of a three-class disease severity label from seasonal
//! weather means and crop variety.
//!
//! Three model families share one preprocessing pipeline:
//!
//! * [`mlp`]: a one-hidden-layer perceptron with ten full-batch training
//!   algorithms (Levenberg-Marquardt, BFGS, Rprop, conjugate gradients, ...)
//!   and validation early stopping.
//! * [`rbfnn`]: a radial basis network grown one neuron at a time, each new
//!   center being the training input with the largest residual.
//! * [`grnn`]: general regression (Nadaraya-Watson) kernel smoothing.
//!
//! [`sweep`] reproduces the hyperparameter experiments and the three-way
//! comparison, [`synthgen`] provides a deterministic synthetic dataset, and
//! [`cli`] wires everything into the `severity-nn` command.
//!
//! See the `examples/` directory for one runnable program per capability.

// NaN-aware guards such as `!(x > 0.0)` are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dataset;
mod error;
pub mod grnn;
pub mod linalg;
pub mod metrics;
pub mod mlp;
pub mod pipeline;
pub mod rbfnn;
pub mod sweep;
pub mod synthgen;

pub use error::{Error, Result};
