//! Full-matrix AdaGrad with an `O(d^2)` per-step preconditioner.
//!
//! The inverse square root of the gradient covariance is tracked by a
//! truncated Robbins-Monro recursion instead of being recomputed from the
//! accumulated outer products. On top of it sit the plain Full AdaGrad
//! iteration, its log-weighted averaged version (WAFA) and a streaming block
//! variant (SWAFA), together with SGD and diagonal AdaGrad baselines.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below fix the double-precision instantiation used by the experiment
//! harness.

// `!(x > 0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod linalg;
pub mod models;
pub mod optim;
pub mod precond;
mod scalar;
pub mod schedules;

pub use error::{Error, Result};
pub use linalg::{SymMatrix, Vector};
pub use models::{LabeledSample, LinearRegression, LogisticRegression, Model};
pub use optim::{run_optimizer, GradientBlock, OptimizerConfig, OptimizerKind, OptimizerState};
pub use precond::{PrecondMode, PrecondState};
pub use scalar::Scalar;
pub use schedules::{LogWeightAverager, PowerSchedule};

pub type Vector64 = Vector<f64>;
pub type SymMatrix64 = SymMatrix<f64>;
pub type PrecondState64 = PrecondState<f64>;
pub type OptimizerState64 = OptimizerState<f64>;
pub type OptimizerConfig64 = OptimizerConfig<f64>;
pub type LabeledSample64 = LabeledSample<f64>;

pub type Vector32 = Vector<f32>;
pub type SymMatrix32 = SymMatrix<f32>;
pub type PrecondState32 = PrecondState<f32>;
pub type OptimizerState32 = OptimizerState<f32>;
