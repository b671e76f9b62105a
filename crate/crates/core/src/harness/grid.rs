use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    convergence_time, median, run_seeds, ConvergenceSummary, ExperimentConfig, PreparedProblem, TrajectoryRecord,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub mu: f64,
    pub nu: f64,
    pub lambda: f64,
    pub summary: ConvergenceSummary,
    /// Median over seeds of each run's final loss; `None` for divergent cells.
    pub final_loss_median: Option<f64>,
    /// At least one seed diverged.
    pub divergent: bool,
}

/// Cartesian product over `mus x nus x lambdas`, every cell run on all seeds
/// of `base`. Cells come back in nested-loop order (mu, then nu, then
/// lambda) whatever order they finish in.
pub fn grid_search(base: &ExperimentConfig, mus: &[f64], nus: &[f64], lambdas: &[f64]) -> Result<Vec<GridCell>> {
    base.validate()?;
    let prepared = base.problem.prepare()?;
    grid_search_prepared(base, &prepared, mus, nus, lambdas)
}

pub fn grid_search_prepared(
    base: &ExperimentConfig,
    prepared: &PreparedProblem,
    mus: &[f64],
    nus: &[f64],
    lambdas: &[f64],
) -> Result<Vec<GridCell>> {
    if mus.is_empty() || nus.is_empty() || lambdas.is_empty() {
        return Err(Error::invalid("grid lists must be nonempty"));
    }
    let mut configs = Vec::with_capacity(mus.len() * nus.len() * lambdas.len());
    for &mu in mus {
        for &nu in nus {
            for &lambda in lambdas {
                let mut cfg = base.clone();
                cfg.optimizer.params = cfg.optimizer.params.with_mu(mu).with_nu(nu).with_lambda(lambda);
                cfg.validate()?;
                configs.push(cfg);
            }
        }
    }
    configs.par_iter().map(|cfg| evaluate_cell(cfg, prepared).map(|(cell, _)| cell)).collect()
}

/// Runs every seed of `cfg` and summarizes them as one grid cell.
pub fn evaluate_cell(cfg: &ExperimentConfig, prepared: &PreparedProblem) -> Result<(GridCell, Vec<TrajectoryRecord>)> {
    let records = run_seeds(cfg, prepared)?;
    let cell = summarize_cell(cfg, &records)?;
    Ok((cell, records))
}

fn summarize_cell(cfg: &ExperimentConfig, records: &[TrajectoryRecord]) -> Result<GridCell> {
    let summary = convergence_time(records)?;
    let divergent = summary.diverged > 0;
    let mut finals: Vec<f64> = records.iter().map(|r| r.final_loss).collect();
    let p = cfg.optimizer.params;
    Ok(GridCell {
        mu: p.mu,
        nu: p.nu,
        lambda: p.lambda,
        final_loss_median: if divergent { None } else { median(&mut finals) },
        summary,
        divergent,
    })
}

/// Best cell among `lambdas` for the base (mu, nu): most converged seeds,
/// then smallest median steps, then the earlier entry of `lambdas`.
pub fn tune_lambda(base: &ExperimentConfig, prepared: &PreparedProblem, lambdas: &[f64]) -> Result<GridCell> {
    let p = base.optimizer.params;
    let cells = grid_search_prepared(base, prepared, &[p.mu], &[p.nu], lambdas)?;
    let best = best_cell_index(&cells).ok_or_else(|| Error::invalid("no lambda candidates"))?;
    Ok(cells[best].clone())
}

/// Most converged seeds, then smallest median steps, then earliest.
pub fn best_cell_index(cells: &[GridCell]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        let better = match best.map(|b| &cells[b]) {
            None => true,
            Some(b) => {
                c.summary.converged > b.summary.converged
                    || (c.summary.converged == b.summary.converged
                        && c.summary.median_steps.unwrap_or(f64::INFINITY)
                            < b.summary.median_steps.unwrap_or(f64::INFINITY))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}
