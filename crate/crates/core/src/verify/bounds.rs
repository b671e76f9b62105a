use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optim::{init_state, step_into, HyperParams, OptimizerKind, OptimizerState};
use crate::rng::{self, streams};

/// Relative slack allowed on top of a closed-form bound.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientDistribution {
    StandardNormal,
    /// Student-t with three degrees of freedom.
    StudentT3,
    /// Alternating signs with magnitudes sweeping `10^-150 .. 10^150` one
    /// decade per step.
    AdversarialExploding,
}

impl GradientDistribution {
    pub const ALL: [GradientDistribution; 3] = [
        GradientDistribution::StandardNormal,
        GradientDistribution::StudentT3,
        GradientDistribution::AdversarialExploding,
    ];

    fn fill<R: Rng>(self, rng: &mut R, t: u64, phase: u64, out: &mut [f64]) {
        match self {
            GradientDistribution::StandardNormal => {
                out.iter_mut().for_each(|g| *g = rng.sample(StandardNormal));
            }
            GradientDistribution::StudentT3 => {
                let d = StudentT::new(3.0).expect("valid dof");
                out.iter_mut().for_each(|g| *g = d.sample(rng));
            }
            GradientDistribution::AdversarialExploding => {
                let k = ((t + phase) % 301) as i32 - 150;
                let sign = if t.is_multiple_of(2) { 1.0 } else { -1.0 };
                for (i, g) in out.iter_mut().enumerate() {
                    let coord_sign = if i % 2 == 0 { sign } else { -sign };
                    *g = coord_sign * 10f64.powi(k);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub kind: OptimizerKind,
    pub mu: f64,
    pub nu: f64,
    pub epsilon: f64,
    /// Bound being checked; `None` when no bound applies.
    pub bound: Option<f64>,
    /// For Adam-style rules, the tighter form `1 / (1 - mu/sqrt(nu))` stated
    /// without the `1/sqrt(1 - nu)` factor. Informational only.
    pub main_text_bound: Option<f64>,
    pub main_text_bound_exceeded: Option<bool>,
    pub empirical_max: f64,
    pub distributions: Vec<GradientDistribution>,
    pub n_sequences: usize,
    pub n_steps: usize,
    pub total_steps: usize,
    pub violations: usize,
    pub step_errors: usize,
    pub status: BoundStatus,
}

impl BoundCheckReport {
    pub fn passed(&self) -> bool {
        self.status != BoundStatus::Fail
    }
}

/// `1/sqrt(1 - nu)` for decoupled rules; for coupled (Adam-style) rules the
/// bound `1 / (sqrt(1 - nu) (1 - gamma))`, `gamma = mu / sqrt(nu)`, which only
/// exists for `mu < sqrt(nu)`.
pub fn theoretical_bound(kind: OptimizerKind, mu: f64, nu: f64) -> Option<f64> {
    match kind {
        OptimizerKind::LaProp | OptimizerKind::AmsProp | OptimizerKind::RmsProp => {
            Some(1.0 / (1.0 - nu).sqrt())
        }
        OptimizerKind::SsgM | OptimizerKind::Ssg => Some(1.0),
        OptimizerKind::Adam | OptimizerKind::AmsGrad => {
            let root = nu.sqrt();
            (mu < root).then(|| 1.0 / ((1.0 - nu).sqrt() * (1.0 - mu / root)))
        }
        _ => None,
    }
}

pub fn main_text_bound(kind: OptimizerKind, mu: f64, nu: f64) -> Option<f64> {
    match kind {
        OptimizerKind::Adam | OptimizerKind::AmsGrad => {
            let root = nu.sqrt();
            (mu < root).then(|| 1.0 / (1.0 - mu / root))
        }
        _ => None,
    }
}

/// Signature of a rule under test: `(state, grad, hp, delta) -> update_inf_norm`.
pub type StepFn<'a> = dyn FnMut(&mut OptimizerState, &[f64], &HyperParams, &mut [f64]) -> Result<f64> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub kind: OptimizerKind,
    pub mu: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub n_sequences: usize,
    pub n_steps: usize,
    pub dim: usize,
    pub distributions: Vec<GradientDistribution>,
    pub seed: u64,
}

impl BoundCheck {
    pub fn run(&self) -> BoundCheckReport {
        self.run_with(&mut |state, grad, hp, delta| step_into(state, grad, hp, None, delta))
    }

    /// Streams the gradient sequences through `stepper`, which stands in for
    /// the rule of `self.kind`.
    pub fn run_with(&self, stepper: &mut StepFn<'_>) -> BoundCheckReport {
        let bound = theoretical_bound(self.kind, self.mu, self.nu);
        let main = main_text_bound(self.kind, self.mu, self.nu);
        let mut report = BoundCheckReport {
            kind: self.kind,
            mu: self.mu,
            nu: self.nu,
            epsilon: self.epsilon,
            bound,
            main_text_bound: main,
            main_text_bound_exceeded: None,
            empirical_max: 0.0,
            distributions: self.distributions.clone(),
            n_sequences: self.n_sequences,
            n_steps: self.n_steps,
            total_steps: 0,
            violations: 0,
            step_errors: 0,
            status: BoundStatus::NotApplicable,
        };
        let Some(limit) = bound else {
            return report;
        };
        let hp = HyperParams {
            lambda: 1.0,
            mu: self.mu,
            nu: self.nu,
            epsilon: self.epsilon,
            ..HyperParams::default()
        };
        let dim = self.dim.max(1);
        let mut grad = vec![0.0; dim];
        let mut delta = vec![0.0; dim];
        for (d, &dist) in self.distributions.iter().enumerate() {
            let mut rng = rng::seeded(self.seed ^ ((d as u64) << 32), streams::GRADIENTS);
            for _ in 0..self.n_sequences {
                let phase = rng.random_range(0..301u64);
                let mut state = init_state(dim, self.kind).expect("dim >= 1");
                for t in 1..=self.n_steps as u64 {
                    dist.fill(&mut rng, t, phase, &mut grad);
                    report.total_steps += 1;
                    match stepper(&mut state, &grad, &hp, &mut delta) {
                        Ok(norm) => {
                            report.empirical_max = report.empirical_max.max(norm);
                            if norm > limit * (1.0 + BOUND_SLACK) {
                                report.violations += 1;
                            }
                        }
                        Err(_) => {
                            report.step_errors += 1;
                            report.violations += 1;
                            break;
                        }
                    }
                }
            }
        }
        report.main_text_bound_exceeded = main.map(|m| report.empirical_max > m);
        report.status = if report.violations == 0 { BoundStatus::Pass } else { BoundStatus::Fail };
        report
    }
}

#[allow(clippy::too_many_arguments)]
pub fn check_update_bound(
    kind: OptimizerKind,
    mu: f64,
    nu: f64,
    epsilon: f64,
    n_sequences: usize,
    n_steps: usize,
    distributions: &[GradientDistribution],
    seed: u64,
) -> BoundCheckReport {
    BoundCheck {
        kind,
        mu,
        nu,
        epsilon,
        n_sequences,
        n_steps,
        dim: 8,
        distributions: distributions.to_vec(),
        seed,
    }
    .run()
}

pub const LAPROP_BATTERY_MUS: [f64; 4] = [0.0, 0.5, 0.9, 0.99];
pub const LAPROP_BATTERY_NUS: [f64; 5] = [0.0, 0.5, 0.9, 0.96, 0.999];

/// `(mu, nu)` pairs with `mu < sqrt(nu)`.
pub const ADAM_BATTERY_PAIRS: [(f64, f64); 10] = [
    (0.0, 0.5),
    (0.5, 0.5),
    (0.0, 0.9),
    (0.5, 0.9),
    (0.7, 0.9),
    (0.9, 0.96),
    (0.5, 0.999),
    (0.9, 0.999),
    (0.95, 0.999),
    (0.3, 0.1),
];

/// Pairs with `mu >= sqrt(nu)`; these must come back not-applicable.
pub const ADAM_INAPPLICABLE_PAIRS: [(f64, f64); 3] = [(0.9, 0.0), (0.9, 0.5), (0.9, 0.7)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatterySize {
    pub n_sequences: usize,
    pub n_steps: usize,
    pub dim: usize,
}

impl Default for BatterySize {
    fn default() -> Self {
        BatterySize { n_sequences: 20, n_steps: 250, dim: 8 }
    }
}

/// Decoupled bound over the LaProp grid, with `stepper` standing in for the
/// LaProp rule.
pub fn laprop_battery_with(size: BatterySize, seed: u64, stepper: &mut StepFn<'_>) -> Vec<BoundCheckReport> {
    let mut out = Vec::new();
    for &mu in &LAPROP_BATTERY_MUS {
        for &nu in &LAPROP_BATTERY_NUS {
            let check = BoundCheck {
                kind: OptimizerKind::LaProp,
                mu,
                nu,
                epsilon: 0.0,
                n_sequences: size.n_sequences,
                n_steps: size.n_steps,
                dim: size.dim,
                distributions: GradientDistribution::ALL.to_vec(),
                seed: seed.wrapping_add(out.len() as u64),
            };
            out.push(check.run_with(stepper));
        }
    }
    out
}

pub fn laprop_battery(size: BatterySize, seed: u64) -> Vec<BoundCheckReport> {
    laprop_battery_with(size, seed, &mut |state, grad, hp, delta| step_into(state, grad, hp, None, delta))
}

pub fn adam_battery(size: BatterySize, seed: u64) -> Vec<BoundCheckReport> {
    ADAM_BATTERY_PAIRS
        .iter()
        .chain(&ADAM_INAPPLICABLE_PAIRS)
        .enumerate()
        .map(|(i, &(mu, nu))| {
            BoundCheck {
                kind: OptimizerKind::Adam,
                mu,
                nu,
                epsilon: 0.0,
                n_sequences: size.n_sequences,
                n_steps: size.n_steps,
                dim: size.dim,
                distributions: GradientDistribution::ALL.to_vec(),
                seed: seed.wrapping_add(1000 + i as u64),
            }
            .run()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_bounds() {
        let b = theoretical_bound(OptimizerKind::LaProp, 0.9, 0.96).unwrap();
        assert!((b - 5.0).abs() < 1e-12);
        assert_eq!(theoretical_bound(OptimizerKind::LaProp, 0.9, 0.0), Some(1.0));

        let gamma = 0.9 / 0.999f64.sqrt();
        assert!((gamma - 0.90045).abs() < 1e-5);
        let b = theoretical_bound(OptimizerKind::Adam, 0.9, 0.999).unwrap();
        // 31.6228 / 0.0995497
        assert!((b - 317.658).abs() < 1e-3, "{b}");
        assert!(theoretical_bound(OptimizerKind::Adam, 0.9, 0.5).is_none());
        assert!(theoretical_bound(OptimizerKind::Sgd, 0.9, 0.5).is_none());
    }

    #[test]
    fn laprop_small_check_passes() {
        let r = check_update_bound(OptimizerKind::LaProp, 0.9, 0.96, 0.0, 5, 100, &GradientDistribution::ALL, 1);
        assert_eq!(r.status, BoundStatus::Pass);
        assert!(r.empirical_max <= 5.0 * (1.0 + BOUND_SLACK));
        assert_eq!(r.total_steps, 1500);
    }

    #[test]
    fn sign_momentum_never_exceeds_one() {
        let r = check_update_bound(OptimizerKind::LaProp, 0.9, 0.0, 0.0, 5, 200, &GradientDistribution::ALL, 2);
        assert_eq!(r.status, BoundStatus::Pass);
        assert!(r.empirical_max <= 1.0 + 1e-12);
        let r = check_update_bound(OptimizerKind::SsgM, 0.9, 0.0, 0.0, 5, 200, &GradientDistribution::ALL, 2);
        assert!(r.empirical_max <= 1.0 + 1e-12);
    }

    #[test]
    fn adam_reports() {
        let r = check_update_bound(OptimizerKind::Adam, 0.9, 0.999, 0.0, 5, 200, &GradientDistribution::ALL, 3);
        assert_eq!(r.status, BoundStatus::Pass);
        assert!(r.main_text_bound.is_some());
        let r = check_update_bound(OptimizerKind::Adam, 0.9, 0.5, 0.0, 5, 200, &GradientDistribution::ALL, 3);
        assert_eq!(r.status, BoundStatus::NotApplicable);
        assert_eq!(r.total_steps, 0);
    }

    #[test]
    fn coupled_momentum_breaks_decoupled_bound() {
        // LaProp's rule with momentum applied before normalization
        let mut broken = |s: &mut OptimizerState, g: &[f64], hp: &HyperParams, d: &mut [f64]| {
            s.t += 1;
            s.cm_acc = hp.mu * s.cm_acc + (1.0 - hp.mu);
            s.cn_acc = hp.nu * s.cn_acc + (1.0 - hp.nu);
            let mut max = 0.0f64;
            for i in 0..g.len() {
                s.n[i] = hp.nu * s.n[i] + (1.0 - hp.nu) * g[i] * g[i];
                s.m[i] = hp.mu * s.m[i] + (1.0 - hp.mu) * g[i];
                d[i] = -hp.lambda * (s.m[i] / s.cm_acc) / ((s.n[i] / s.cn_acc).sqrt() + hp.epsilon);
                max = max.max(d[i].abs());
            }
            Ok(max / hp.lambda)
        };
        let check = BoundCheck {
            kind: OptimizerKind::LaProp,
            mu: 0.9,
            nu: 0.0,
            epsilon: 0.0,
            n_sequences: 5,
            n_steps: 200,
            dim: 4,
            distributions: vec![GradientDistribution::StandardNormal],
            seed: 4,
        };
        assert_eq!(check.run_with(&mut broken).status, BoundStatus::Fail);
    }
}
