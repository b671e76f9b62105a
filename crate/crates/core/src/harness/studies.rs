//! Multi-run studies built on [`run`](super::run): the noisy Rosenbrock
//! sweep, deep fully connected training, the loss-spike demo and the regret
//! rate check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    best_cell_index, evaluate_cell, first_loss_spike, regret_run, rosenbrock_max_steps, run_prepared,
    trailing_mean, ConvergenceCriterion, DataSpec, DivergenceCeiling, ExperimentConfig, GridCell, LossTarget,
    ProblemSpec, RegretReport, RunStatus, TrajectoryRecord, DEFAULT_DOMAIN_RADIUS,
};
use crate::error::{Error, Result};
use crate::optim::{HyperParams, OptimizerKind, ScheduleSpec, DEFAULT_EPSILON};

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(Error::config(format!("`{name}` must not be empty")))
    } else {
        Ok(())
    }
}

/// A trajectory kept for output, labelled by its study coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTrajectory {
    pub label: String,
    pub record: TrajectoryRecord,
}

fn seeds_0_to(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn twenty_seeds() -> Vec<u64> {
    seeds_0_to(20)
}

fn five_seeds() -> Vec<u64> {
    seeds_0_to(5)
}

fn one() -> u64 {
    1
}

fn one_usize() -> usize {
    1
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

// ---------------------------------------------------------------- Rosenbrock

fn rosenbrock_mu() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosenbrockStudy {
    pub sigmas: Vec<f64>,
    pub nus: Vec<f64>,
    pub optimizers: Vec<OptimizerKind>,
    /// Candidate learning rates; each (optimizer, sigma, nu) cell keeps the best.
    pub lambdas: Vec<f64>,
    #[serde(default = "rosenbrock_mu")]
    pub mu: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "twenty_seeds")]
    pub seeds: Vec<u64>,
    /// Fixed step budget; by default 3000 below sigma = 0.12 and 10000 from there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default)]
    pub convergence: ConvergenceCriterion,
    #[serde(default)]
    pub divergence: DivergenceCeiling,
    /// Trajectories written per cell (the first seeds of the tuned learning rate).
    #[serde(default = "one_usize")]
    pub trajectory_seeds: usize,
}

impl RosenbrockStudy {
    pub fn validate(&self) -> Result<()> {
        nonempty("sigmas", &self.sigmas)?;
        nonempty("nus", &self.nus)?;
        nonempty("optimizers", &self.optimizers)?;
        nonempty("lambdas", &self.lambdas)?;
        nonempty("seeds", &self.seeds)?;
        for cfg in self.configs() {
            cfg.validate()?;
        }
        Ok(())
    }

    fn config(&self, kind: OptimizerKind, sigma: f64, nu: f64, lambda: f64) -> ExperimentConfig {
        let hp = HyperParams { lambda, mu: self.mu, nu, epsilon: self.epsilon, ..HyperParams::default() };
        ExperimentConfig {
            problem: ProblemSpec::Rosenbrock { sigma },
            optimizer: super::OptimizerConfig { kind, params: hp },
            max_steps: self.max_steps.unwrap_or_else(|| rosenbrock_max_steps(sigma)),
            seeds: self.seeds.clone(),
            convergence: self.convergence,
            divergence: self.divergence,
            record_stride: 1,
        }
    }

    fn configs(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &kind in &self.optimizers {
            for &sigma in &self.sigmas {
                for &nu in &self.nus {
                    for &lambda in &self.lambdas {
                        out.push(self.config(kind, sigma, nu, lambda));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosenbrockRow {
    pub optimizer: OptimizerKind,
    pub sigma: f64,
    pub nu: f64,
    pub max_steps: u64,
    pub best: GridCell,
    pub per_lambda: Vec<GridCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosenbrockResult {
    pub rows: Vec<RosenbrockRow>,
    pub trajectories: Vec<StudyTrajectory>,
}

/// One row per (optimizer, sigma, nu), each with its tuned learning rate.
pub fn rosenbrock_study(study: &RosenbrockStudy) -> Result<RosenbrockResult> {
    study.validate()?;
    let mut keys = Vec::new();
    for &kind in &study.optimizers {
        for &sigma in &study.sigmas {
            for &nu in &study.nus {
                keys.push((kind, sigma, nu));
            }
        }
    }
    let evaluated: Vec<_> = keys
        .par_iter()
        .map(|&(kind, sigma, nu)| {
            let cells = study
                .lambdas
                .iter()
                .map(|&lambda| {
                    let cfg = study.config(kind, sigma, nu, lambda);
                    let prepared = cfg.problem.prepare()?;
                    evaluate_cell(&cfg, &prepared)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(((kind, sigma, nu), cells))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(evaluated.len());
    let mut trajectories = Vec::new();
    for ((kind, sigma, nu), cells) in evaluated {
        let per_lambda: Vec<GridCell> = cells.iter().map(|(c, _)| c.clone()).collect();
        let best = best_cell_index(&per_lambda).expect("lambdas nonempty");
        for rec in cells[best].1.iter().take(study.trajectory_seeds) {
            trajectories.push(StudyTrajectory {
                label: format!("{kind}_sigma{sigma}_nu{nu}_lambda{}_seed{}", per_lambda[best].lambda, rec.seed),
                record: rec.clone(),
            });
        }
        rows.push(RosenbrockRow {
            optimizer: kind,
            sigma,
            nu,
            max_steps: study.max_steps.unwrap_or_else(|| rosenbrock_max_steps(sigma)),
            best: per_lambda[best].clone(),
            per_lambda,
        });
    }
    Ok(RosenbrockResult { rows, trajectories })
}

// ------------------------------------------------------------------- deep FC

fn deep_width() -> usize {
    32
}
fn deep_batch() -> usize {
    256
}
fn deep_mu() -> f64 {
    0.8
}
fn deep_nu() -> f64 {
    0.96
}
fn deep_epsilon() -> f64 {
    1e-26
}
fn deep_lambdas() -> Vec<f64> {
    vec![4e-4, 1e-4, 4e-5, 1e-5]
}
fn deep_optimizers() -> Vec<OptimizerKind> {
    vec![OptimizerKind::LaProp, OptimizerKind::Adam]
}
fn deep_steps() -> u64 {
    5000
}
fn smoothing_window() -> usize {
    50
}
fn deep_loss_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepFcStudy {
    pub data: DataSpec,
    pub depths: Vec<usize>,
    #[serde(default = "deep_width")]
    pub width: usize,
    #[serde(default = "deep_batch")]
    pub batch_size: usize,
    #[serde(default = "deep_mu")]
    pub mu: f64,
    #[serde(default = "deep_nu")]
    pub nu: f64,
    #[serde(default = "deep_epsilon")]
    pub epsilon: f64,
    #[serde(default = "deep_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "deep_optimizers")]
    pub optimizers: Vec<OptimizerKind>,
    #[serde(default = "five_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "deep_steps")]
    pub max_steps: u64,
    /// Success means the mean minibatch loss over this many consecutive
    /// updates drops below `loss_fraction * ln(classes)`.
    #[serde(default = "smoothing_window")]
    pub smoothing_window: usize,
    #[serde(default = "deep_loss_fraction")]
    pub loss_fraction: f64,
    #[serde(default = "one")]
    pub record_stride: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepFcLambda {
    pub lambda: f64,
    pub successes: usize,
    pub median_steps: Option<f64>,
    pub final_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepFcRow {
    pub optimizer: OptimizerKind,
    pub depth: usize,
    pub threshold: f64,
    pub best_lambda: f64,
    pub successes: usize,
    pub seeds: usize,
    /// Learning rates in sweep order; the sweep stops once every seed succeeds.
    pub per_lambda: Vec<DeepFcLambda>,
    #[serde(skip)]
    pub trajectories: Vec<StudyTrajectory>,
}

impl DeepFcStudy {
    pub fn validate(&self) -> Result<()> {
        nonempty("depths", &self.depths)?;
        nonempty("lambdas", &self.lambdas)?;
        nonempty("optimizers", &self.optimizers)?;
        nonempty("seeds", &self.seeds)?;
        if self.smoothing_window == 0 || !(self.loss_fraction > 0.0) {
            return Err(Error::config("smoothing_window must be >= 1 and loss_fraction > 0"));
        }
        Ok(())
    }

    pub fn config(&self, kind: OptimizerKind, depth: usize, lambda: f64, threshold: f64) -> ExperimentConfig {
        let hp = HyperParams { lambda, mu: self.mu, nu: self.nu, epsilon: self.epsilon, ..HyperParams::default() };
        ExperimentConfig {
            problem: ProblemSpec::Classification {
                data: self.data.clone(),
                width: self.width,
                depth,
                batch_size: self.batch_size,
            },
            optimizer: super::OptimizerConfig { kind, params: hp },
            max_steps: self.max_steps,
            seeds: self.seeds.clone(),
            convergence: ConvergenceCriterion {
                loss_target: Some(LossTarget { threshold, window: self.smoothing_window }),
                ..ConvergenceCriterion::default()
            },
            divergence: DivergenceCeiling::default(),
            record_stride: self.record_stride,
        }
    }
}

/// Sweeps the learning rates per (optimizer, depth) and keeps the one with
/// the most successful seeds (ties: fewer median steps, then sweep order).
pub fn deep_fc_study(study: &DeepFcStudy) -> Result<Vec<DeepFcRow>> {
    study.validate()?;
    let data = std::sync::Arc::new(study.data.load()?);
    let threshold = study.loss_fraction * (data.classes as f64).ln();
    let mut rows = Vec::new();
    for &depth in &study.depths {
        let prepared = super::PreparedProblem::Classification {
            data: data.clone(),
            width: study.width,
            depth,
            batch_size: study.batch_size,
        };
        for &kind in &study.optimizers {
            let mut per_lambda = Vec::new();
            let mut cells = Vec::new();
            let mut records_by_lambda = Vec::new();
            for &lambda in &study.lambdas {
                let cfg = study.config(kind, depth, lambda, threshold);
                cfg.validate()?;
                let (cell, records) = evaluate_cell(&cfg, &prepared)?;
                let all = cell.summary.converged == cell.summary.runs;
                per_lambda.push(DeepFcLambda {
                    lambda,
                    successes: cell.summary.converged,
                    median_steps: cell.summary.median_steps,
                    final_losses: records.iter().map(|r| r.final_loss).collect(),
                });
                cells.push(cell);
                records_by_lambda.push(records);
                if all {
                    break;
                }
            }
            let best = best_cell_index(&cells).expect("lambdas nonempty");
            let trajectories = records_by_lambda[best]
                .iter()
                .map(|rec| StudyTrajectory {
                    label: format!("{kind}_depth{depth}_lambda{}_seed{}", cells[best].lambda, rec.seed),
                    record: rec.clone(),
                })
                .collect();
            rows.push(DeepFcRow {
                optimizer: kind,
                depth,
                threshold,
                best_lambda: cells[best].lambda,
                successes: cells[best].summary.converged,
                seeds: study.seeds.len(),
                per_lambda,
                trajectories,
            });
        }
    }
    Ok(rows)
}

// -------------------------------------------------------------- spike demo

fn spike_mu() -> f64 {
    0.9
}
fn spike_nu() -> f64 {
    0.7
}
fn spike_optimizers() -> Vec<OptimizerKind> {
    vec![OptimizerKind::Adam, OptimizerKind::LaProp]
}
fn spike_steps() -> u64 {
    50_000
}
fn spike_floor() -> f64 {
    0.01
}
fn spike_factor() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeStudy {
    pub data: DataSpec,
    pub width: usize,
    /// Hidden layers; a two-layer network has depth 1.
    #[serde(default = "one_usize")]
    pub depth: usize,
    pub batch_size: usize,
    pub lambda: f64,
    #[serde(default = "spike_mu")]
    pub mu: f64,
    #[serde(default = "spike_nu")]
    pub nu: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "spike_optimizers")]
    pub optimizers: Vec<OptimizerKind>,
    #[serde(default = "five_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "spike_steps")]
    pub max_steps: u64,
    #[serde(default = "smoothing_window")]
    pub smoothing_window: usize,
    /// A spike is a smoothed loss above this multiple of its running minimum.
    #[serde(default = "spike_factor")]
    pub spike_factor: f64,
    /// Lower clamp on the running minimum, so that noise around a near-zero
    /// loss is not read as a spike.
    #[serde(default = "spike_floor")]
    pub spike_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRow {
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub spike_step: Option<u64>,
    pub status: RunStatus,
    pub min_smoothed_loss: f64,
    pub final_smoothed_loss: f64,
    #[serde(skip)]
    pub trajectory: Option<StudyTrajectory>,
}

impl SpikeStudy {
    pub fn config(&self, kind: OptimizerKind) -> ExperimentConfig {
        let hp = HyperParams {
            lambda: self.lambda,
            mu: self.mu,
            nu: self.nu,
            epsilon: self.epsilon,
            ..HyperParams::default()
        };
        ExperimentConfig {
            problem: ProblemSpec::Classification {
                data: self.data.clone(),
                width: self.width,
                depth: self.depth,
                batch_size: self.batch_size,
            },
            optimizer: super::OptimizerConfig { kind, params: hp },
            max_steps: self.max_steps,
            seeds: self.seeds.clone(),
            convergence: ConvergenceCriterion::default(),
            divergence: DivergenceCeiling::default(),
            record_stride: 1,
        }
    }
}

/// Trains every (optimizer, seed) for the full budget and reports the first
/// loss spike. A diverged run counts as a spike at the step it diverged.
pub fn spike_study(study: &SpikeStudy) -> Result<Vec<SpikeRow>> {
    nonempty("optimizers", &study.optimizers)?;
    nonempty("seeds", &study.seeds)?;
    let data = std::sync::Arc::new(study.data.load()?);
    let prepared = super::PreparedProblem::Classification {
        data,
        width: study.width,
        depth: study.depth,
        batch_size: study.batch_size,
    };
    let mut jobs = Vec::new();
    for &kind in &study.optimizers {
        let cfg = study.config(kind);
        cfg.validate()?;
        for &seed in &study.seeds {
            jobs.push((kind, cfg.clone(), seed));
        }
    }
    jobs.par_iter()
        .map(|(kind, cfg, seed)| {
            let record = run_prepared(cfg, &prepared, *seed)?;
            let losses = record.losses();
            let smooth = trailing_mean(&losses, study.smoothing_window)?;
            let mut spike = first_loss_spike(&losses, study.smoothing_window, study.spike_factor, study.spike_floor)?
                .map(|i| record.rows[i].step);
            if let RunStatus::Diverged { step } = record.status {
                spike = Some(spike.map_or(step, |s| s.min(step)));
            }
            let min_smoothed = smooth.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
            Ok(SpikeRow {
                optimizer: *kind,
                seed: *seed,
                spike_step: spike,
                status: record.status,
                min_smoothed_loss: min_smoothed,
                final_smoothed_loss: smooth.last().copied().unwrap_or(f64::NAN),
                trajectory: Some(StudyTrajectory { label: format!("{kind}_seed{seed}"), record }),
            })
        })
        .collect()
}

// ------------------------------------------------------------------ regret

fn regret_dim() -> usize {
    10
}
fn regret_horizon() -> u64 {
    100_000
}
fn regret_lambda() -> f64 {
    0.1
}
fn regret_nu() -> f64 {
    0.999
}
fn regret_zeta() -> f64 {
    0.99
}
fn regret_radius() -> f64 {
    DEFAULT_DOMAIN_RADIUS
}
fn laprop_kind() -> OptimizerKind {
    OptimizerKind::LaProp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegretStudy {
    #[serde(default = "regret_dim")]
    pub dim: usize,
    #[serde(default = "regret_horizon")]
    pub horizon: u64,
    #[serde(default = "regret_radius")]
    pub radius: f64,
    #[serde(default = "laprop_kind")]
    pub optimizer: OptimizerKind,
    /// Base learning rate of the `lambda / sqrt(t)` schedule.
    #[serde(default = "regret_lambda")]
    pub lambda: f64,
    /// Base momentum of the `mu * zeta^t` schedule.
    #[serde(default = "rosenbrock_mu")]
    pub mu: f64,
    #[serde(default = "regret_zeta")]
    pub zeta: f64,
    #[serde(default = "regret_nu")]
    pub nu: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "five_seeds")]
    pub seeds: Vec<u64>,
    /// Growth is judged between these two checkpoints.
    #[serde(default = "regret_early")]
    pub early_checkpoint: u64,
    #[serde(default = "regret_horizon")]
    pub late_checkpoint: u64,
}

fn regret_early() -> u64 {
    10_000
}

impl RegretStudy {
    pub fn config(&self) -> ExperimentConfig {
        let hp = HyperParams {
            lambda: self.lambda,
            mu: self.mu,
            nu: self.nu,
            epsilon: self.epsilon,
            lr_schedule: ScheduleSpec::InvSqrt,
            mu_schedule: ScheduleSpec::Geometric { zeta: self.zeta },
            ..HyperParams::default()
        };
        let mut cfg = ExperimentConfig::new(
            ProblemSpec::OnlineQuadratic { dim: self.dim, horizon: self.horizon, radius: self.radius },
            self.optimizer,
            hp,
            self.horizon,
        );
        cfg.seeds = self.seeds.clone();
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSeed {
    pub report: RegretReport,
    /// `R(late)/sqrt(late)` divided by `R(early)/sqrt(early)`.
    pub growth_ratio: f64,
    #[serde(skip)]
    pub trajectory: Option<StudyTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretStudyResult {
    pub early_checkpoint: u64,
    pub late_checkpoint: u64,
    pub seeds: Vec<RegretSeed>,
}

pub fn regret_study(study: &RegretStudy) -> Result<RegretStudyResult> {
    nonempty("seeds", &study.seeds)?;
    let (early, late) = (study.early_checkpoint, study.late_checkpoint);
    if !(1 <= early && early < late && late <= study.horizon) {
        return Err(Error::config("need 1 <= early_checkpoint < late_checkpoint <= horizon"));
    }
    let cfg = study.config();
    cfg.validate()?;
    let seeds = study
        .seeds
        .par_iter()
        .map(|&seed| {
            let (report, record) = regret_run(&cfg, seed)?;
            let scaled = |t: u64| {
                let r = record.rows[t as usize - 1].regret.unwrap_or(f64::NAN);
                r / (t as f64).sqrt()
            };
            Ok(RegretSeed {
                growth_ratio: scaled(late) / scaled(early),
                report,
                trajectory: Some(StudyTrajectory { label: format!("{}_seed{seed}", study.optimizer), record }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegretStudyResult { early_checkpoint: early, late_checkpoint: late, seeds })
}

// -------------------------------------------------------------------- grid

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridStudy {
    pub base: ExperimentConfig,
    pub mus: Vec<f64>,
    pub nus: Vec<f64>,
    pub lambdas: Vec<f64>,
}
