//! Objectives and data sources driven by the harness.

mod classification;
mod data;
mod quadratic;
mod rosenbrock;

pub use classification::ClassificationObjective;
pub use data::{
    load_mnist_idx, synth_classification, write_idx_images, write_idx_labels, DataSource,
    DatasetHandle, SynthSpec, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use quadratic::{project, NoisyQuadratic, OnlineQuadratic, QuadraticRound};
pub use rosenbrock::{rosenbrock_loss, rosenbrock_loss_grad, NoisyRosenbrock, ROSENBROCK_OPTIMUM};

use crate::error::Result;

/// A (possibly stochastic) objective stepped by the harness.
pub trait Objective: Send {
    fn dim(&self) -> usize;

    fn initial_point(&self) -> Vec<f64>;

    /// Loss at `theta` for round `t` (1-based); the gradient is written into
    /// `grad`. Stochastic objectives draw fresh noise on every call.
    fn loss_grad(&mut self, t: u64, theta: &[f64], grad: &mut [f64]) -> Result<f64>;

    fn optimum(&self) -> Option<&[f64]> {
        None
    }

    /// Round-`t` loss of the best fixed point in hindsight, for objectives
    /// that define regret.
    fn comparator_loss(&self, _t: u64) -> Option<f64> {
        None
    }

    /// Applied to the parameters after every update (e.g. projection).
    fn constrain(&self, _theta: &mut [f64]) {}
}
