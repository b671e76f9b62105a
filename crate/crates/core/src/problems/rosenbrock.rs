use rand::Rng;

use super::Objective;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

pub const ROSENBROCK_OPTIMUM: [f64; 2] = [1.0, 1.0];

/// Noiseless loss `(1 - x)^2 + 100 (x - y)^2`.
pub fn rosenbrock_loss(x: f64, y: f64) -> f64 {
    (1.0 - x).powi(2) + 100.0 * (x - y).powi(2)
}

/// Loss and gradient with one fresh noise pair `(e1, e2) ~ U(-sigma, sigma)^2`
/// shared by both.
pub fn rosenbrock_loss_grad<R: Rng + ?Sized>(x: f64, y: f64, sigma: f64, rng: &mut R) -> (f64, [f64; 2]) {
    let (e1, e2) = if sigma > 0.0 {
        (rng.random_range(-sigma..sigma), rng.random_range(-sigma..sigma))
    } else {
        (0.0, 0.0)
    };
    let a = 1.0 - x + e1;
    let b = x - y + e2;
    let loss = a * a + 100.0 * b * b;
    (loss, [-2.0 * a + 200.0 * b, -200.0 * b])
}

/// Rosenbrock valley with additive uniform noise, started from the origin.
#[derive(Debug, Clone)]
pub struct NoisyRosenbrock {
    sigma: f64,
    rng: rng::Rng,
}

impl NoisyRosenbrock {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(NoisyRosenbrock { sigma, rng: rng::seeded(seed, streams::NOISE) })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Objective for NoisyRosenbrock {
    fn dim(&self) -> usize {
        2
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn loss_grad(&mut self, _t: u64, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (loss, g) = rosenbrock_loss_grad(theta[0], theta[1], self.sigma, &mut self.rng);
        grad.copy_from_slice(&g);
        Ok(loss)
    }

    fn optimum(&self) -> Option<&[f64]> {
        Some(&ROSENBROCK_OPTIMUM)
    }
}
