//! Experiment runner: steps an optimizer against a problem, records the
//! trajectory, and summarizes runs.

mod config;
mod grid;
mod io;
mod regret;
mod smoothing;
mod studies;

pub use config::{
    ConvergenceCriterion, DataSpec, DivergenceCeiling, ExperimentConfig, LossTarget, OptimizerConfig,
    PreparedProblem, ProblemSpec, DEFAULT_DOMAIN_RADIUS,
};
pub use grid::{best_cell_index, evaluate_cell, grid_search, grid_search_prepared, tune_lambda, GridCell};
pub use io::{format_float, trajectory_csv, TRAJECTORY_HEADER};
pub use regret::{regret_checkpoints, regret_run, RegretPoint, RegretReport};
pub use studies::{
    deep_fc_study, regret_study, rosenbrock_study, spike_study, DeepFcLambda, DeepFcRow, DeepFcStudy, GridStudy,
    RegretSeed, RegretStudy, RegretStudyResult, RosenbrockResult, RosenbrockRow, RosenbrockStudy, SpikeRow,
    SpikeStudy, StudyTrajectory,
};
pub use smoothing::{first_loss_spike, gaussian_smooth, moving_average, trailing_mean};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::Optimizer;

/// Step budget used for noisy Rosenbrock: longer runs at high noise.
pub fn rosenbrock_max_steps(sigma: f64) -> u64 {
    if sigma < 0.12 {
        3000
    } else {
        10_000
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Converged { step: u64 },
    Diverged { step: u64 },
    Exhausted,
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Converged { .. } => "converged",
            RunStatus::Diverged { .. } => "diverged",
            RunStatus::Exhausted => "exhausted",
        }
    }

    pub fn converged_at(&self) -> Option<u64> {
        match *self {
            RunStatus::Converged { step } => Some(step),
            _ => None,
        }
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, RunStatus::Diverged { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: u64,
    pub loss: f64,
    pub update_inf_norm: f64,
    pub dist_to_opt: Option<f64>,
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub rows: Vec<TrajectoryRow>,
    pub status: RunStatus,
    /// Steps actually executed.
    pub steps: u64,
    /// Largest update_inf_norm over all steps, recorded or not.
    pub max_update_inf_norm: f64,
    /// Mean loss over the last `loss_target.window` steps (or the last loss).
    pub final_loss: f64,
}

impl TrajectoryRecord {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Runs `config` for one seed.
pub fn run(config: &ExperimentConfig, seed: u64) -> Result<TrajectoryRecord> {
    config.validate()?;
    let prepared = config.problem.prepare()?;
    run_prepared(config, &prepared, seed)
}

/// Runs every seed of `config`; results are in seed-list order.
pub fn run_all(config: &ExperimentConfig) -> Result<Vec<TrajectoryRecord>> {
    config.validate()?;
    let prepared = config.problem.prepare()?;
    run_seeds(config, &prepared)
}

pub(crate) fn run_seeds(config: &ExperimentConfig, prepared: &PreparedProblem) -> Result<Vec<TrajectoryRecord>> {
    config.seeds.par_iter().map(|&seed| run_prepared(config, prepared, seed)).collect()
}

/// Runs one seed against an already prepared problem. Numerical blow-up is a
/// recorded status; only configuration problems are errors.
pub fn run_prepared(config: &ExperimentConfig, prepared: &PreparedProblem, seed: u64) -> Result<TrajectoryRecord> {
    config.validate()?;
    let mut objective = prepared.objective(seed)?;
    let mut theta = objective.initial_point();
    let dim = theta.len();
    let mut optimizer = Optimizer::new(config.optimizer.kind, config.optimizer.params, dim)?;
    let mut grad = vec![0.0; dim];
    let crit = config.convergence;
    let ceiling = config.divergence;
    let loss_window = crit.loss_target.map_or(1, |t| t.window);

    let mut rows = Vec::new();
    let mut status = RunStatus::Exhausted;
    let mut streak = 0u64;
    let mut regret = objective.comparator_loss(1).map(|_| 0.0);
    let mut max_norm = 0.0f64;
    let mut recent = std::collections::VecDeque::with_capacity(loss_window);
    let mut recent_sum = 0.0;
    let mut steps = 0;

    for t in 1..=config.max_steps {
        steps = t;
        let loss = objective.loss_grad(t, &theta, &mut grad).unwrap_or(f64::NAN);
        let mut diverged = !loss.is_finite() || loss > ceiling.loss;
        let mut norm = 0.0;
        if !diverged {
            match optimizer.step(&mut theta, &grad) {
                Ok(n) => norm = n,
                Err(_) => diverged = true,
            }
            objective.constrain(&mut theta);
            max_norm = max_norm.max(norm);
            if theta.iter().any(|x| !x.is_finite() || x.abs() > ceiling.param_inf_norm) {
                diverged = true;
            }
        }
        if let (Some(r), Some(c)) = (regret.as_mut(), objective.comparator_loss(t)) {
            *r += loss - c;
        }
        if loss.is_finite() {
            recent.push_back(loss);
            recent_sum += loss;
            if recent.len() > loss_window {
                recent_sum -= recent.pop_front().unwrap_or(0.0);
            }
        }
        let dist = objective.optimum().map(|o| distance(&theta, o));
        let recorded = t % config.record_stride == 0 || t == config.max_steps || diverged;
        if recorded {
            rows.push(TrajectoryRow { step: t, loss, update_inf_norm: norm, dist_to_opt: dist, regret });
        }
        if diverged {
            status = RunStatus::Diverged { step: t };
            break;
        }
        if recorded {
            streak = match dist {
                Some(d) if d < crit.tolerance => streak + 1,
                _ => 0,
            };
            if streak >= crit.patience {
                status = RunStatus::Converged { step: t };
                break;
            }
        }
        if let Some(target) = crit.loss_target {
            if recent.len() == target.window && recent_sum / (target.window as f64) < target.threshold {
                if !recorded {
                    rows.push(TrajectoryRow { step: t, loss, update_inf_norm: norm, dist_to_opt: dist, regret });
                }
                status = RunStatus::Converged { step: t };
                break;
            }
        }
    }
    let final_loss = if recent.is_empty() { f64::NAN } else { recent_sum / recent.len() as f64 };
    Ok(TrajectoryRecord { seed, rows, status, steps, max_update_inf_norm: max_norm, final_loss })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub runs: usize,
    pub converged: usize,
    pub diverged: usize,
    /// Median steps-to-converge over the converged runs only.
    pub median_steps: Option<f64>,
    pub failure_fraction: f64,
}

impl ConvergenceSummary {
    pub fn converged_fraction(&self) -> f64 {
        1.0 - self.failure_fraction
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

pub fn convergence_time(records: &[TrajectoryRecord]) -> Result<ConvergenceSummary> {
    if records.is_empty() {
        return Err(Error::invalid("convergence_time needs at least one record"));
    }
    let mut steps: Vec<f64> = records.iter().filter_map(|r| r.status.converged_at()).map(|s| s as f64).collect();
    let converged = steps.len();
    Ok(ConvergenceSummary {
        runs: records.len(),
        converged,
        diverged: records.iter().filter(|r| r.status.is_diverged()).count(),
        median_steps: median(&mut steps),
        failure_fraction: (records.len() - converged) as f64 / records.len() as f64,
    })
}
