use rand::Rng;
use rand_distr::StandardNormal;

use super::Objective;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Euclidean projection onto the ball of the given radius.
pub fn project(theta: &mut [f64], radius: f64) {
    let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > radius {
        let scale = radius / norm;
        theta.iter_mut().for_each(|x| *x *= scale);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticRound {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub target: Vec<f64>,
}

/// Online convex game with per-round loss `0.5 * |theta - a_t|^2`, targets
/// `a_t` i.i.d. uniform on `[-1, 1]^dim`, played inside a ball of radius
/// `domain_radius`.
#[derive(Debug, Clone)]
pub struct OnlineQuadratic {
    dim: usize,
    horizon: u64,
    domain_radius: f64,
    targets: Vec<f64>,
    comparator: Vec<f64>,
}

impl OnlineQuadratic {
    pub fn new(dim: usize, target_seq_seed: u64, horizon: u64, domain_radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("online quadratic needs dim >= 1"));
        }
        if horizon == 0 {
            return Err(Error::config("online quadratic needs horizon >= 1"));
        }
        if !(domain_radius > 0.0 && domain_radius.is_finite()) {
            return Err(Error::config(format!("domain radius must be positive, got {domain_radius}")));
        }
        let mut rng = rng::seeded(target_seq_seed, streams::TARGETS);
        let targets = (0..dim as u64 * horizon).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut q = OnlineQuadratic { dim, horizon, domain_radius, targets, comparator: Vec::new() };
        q.comparator = q.best_fixed_point(horizon)?;
        Ok(q)
    }

    /// Instance whose every target is the same point.
    pub fn stationary(target: Vec<f64>, horizon: u64, domain_radius: f64) -> Result<Self> {
        let mut q = OnlineQuadratic::new(target.len().max(1), 0, horizon, domain_radius)?;
        q.targets = (0..horizon).flat_map(|_| target.iter().copied()).collect();
        q.comparator = q.best_fixed_point(horizon)?;
        Ok(q)
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn target(&self, t: u64) -> Result<&[f64]> {
        if t == 0 || t > self.horizon {
            return Err(Error::invalid(format!("round {t} outside 1..={}", self.horizon)));
        }
        let start = (t - 1) as usize * self.dim;
        Ok(&self.targets[start..start + self.dim])
    }

    pub fn round_loss(&self, t: u64, theta: &[f64]) -> Result<f64> {
        let a = self.target(t)?;
        Ok(0.5 * theta.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
    }

    pub fn online_quadratic_round(&self, t: u64, theta: &[f64]) -> Result<QuadraticRound> {
        let a = self.target(t)?;
        if theta.len() != self.dim {
            return Err(Error::invalid("theta dimension mismatch"));
        }
        let grad: Vec<f64> = theta.iter().zip(a).map(|(x, y)| x - y).collect();
        let loss = 0.5 * grad.iter().map(|d| d * d).sum::<f64>();
        Ok(QuadraticRound { loss, grad, target: a.to_vec() })
    }

    /// Minimizer of the first `horizon` round losses: the mean target.
    pub fn best_fixed_point(&self, horizon: u64) -> Result<Vec<f64>> {
        if horizon == 0 || horizon > self.horizon {
            return Err(Error::invalid(format!("horizon {horizon} outside 1..={}", self.horizon)));
        }
        let mut mean = vec![0.0; self.dim];
        for t in 1..=horizon {
            for (m, a) in mean.iter_mut().zip(self.target(t)?) {
                *m += a;
            }
        }
        mean.iter_mut().for_each(|m| *m /= horizon as f64);
        Ok(mean)
    }
}

impl Objective for OnlineQuadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn loss_grad(&mut self, t: u64, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let a = self.target(t)?;
        let mut loss = 0.0;
        for ((g, x), y) in grad.iter_mut().zip(theta).zip(a) {
            *g = x - y;
            loss += 0.5 * *g * *g;
        }
        Ok(loss)
    }

    fn constrain(&self, theta: &mut [f64]) {
        project(theta, self.domain_radius);
    }

    fn comparator_loss(&self, t: u64) -> Option<f64> {
        self.round_loss(t, &self.comparator).ok()
    }
}

/// `0.5 * |theta|^2` observed through additive Gaussian gradient noise. Near
/// the optimum the gradient is pure noise, which is where coupled momentum
/// and a fast preconditioner interact badly. With `scale_decades > 0` each
/// noise draw is further multiplied by `10^U(-scale_decades, scale_decades)`,
/// giving a heavy-tailed gradient magnitude.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    dim: usize,
    noise_std: f64,
    scale_decades: f64,
    start: f64,
    optimum: Vec<f64>,
    rng: rng::Rng,
}

impl NoisyQuadratic {
    pub fn new(dim: usize, noise_std: f64, start: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("noisy quadratic needs dim >= 1"));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::config(format!("noise_std must be >= 0, got {noise_std}")));
        }
        Ok(NoisyQuadratic {
            dim,
            noise_std,
            scale_decades: 0.0,
            start,
            optimum: vec![0.0; dim],
            rng: rng::seeded(seed, streams::NOISE),
        })
    }
}

impl NoisyQuadratic {
    pub fn with_scale_decades(mut self, decades: f64) -> Result<Self> {
        if !(decades >= 0.0 && decades.is_finite()) {
            return Err(Error::config(format!("scale_decades must be >= 0, got {decades}")));
        }
        self.scale_decades = decades;
        Ok(self)
    }
}

impl Objective for NoisyQuadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![self.start; self.dim]
    }

    fn loss_grad(&mut self, _t: u64, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut loss = 0.0;
        for (g, x) in grad.iter_mut().zip(theta) {
            let mut z: f64 = self.rng.sample(StandardNormal);
            if self.scale_decades > 0.0 {
                z *= 10f64.powf(self.rng.random_range(-self.scale_decades..=self.scale_decades));
            }
            *g = x + self.noise_std * z;
            loss += 0.5 * x * x;
        }
        Ok(loss)
    }

    fn optimum(&self) -> Option<&[f64]> {
        Some(&self.optimum)
    }
}
