//! LaProp and its comparison family of first-order optimizers, together with
//! the objectives, experiment harness and numerical checks used to study them.

pub mod error;
pub mod harness;
pub mod mlp;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use optim::{HyperParams, Optimizer, OptimizerKind, OptimizerState, ScheduleSpec, StepOutput};
