use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ProblemSpec, RunStatus, TrajectoryRecord, TrajectoryRow};
use crate::error::{Error, Result};
use crate::optim::Optimizer;
use crate::problems::{Objective, OnlineQuadratic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub t: u64,
    pub regret: f64,
    pub regret_over_sqrt_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub seed: u64,
    pub horizon: u64,
    /// Minimizer of the summed loss over the whole horizon.
    pub comparator: Vec<f64>,
    pub points: Vec<RegretPoint>,
    /// Diagonal of the bounding box of all iterates; bounds the largest
    /// pairwise distance.
    pub diameter: f64,
    /// Largest per-coordinate range of the iterates.
    pub diameter_inf: f64,
    /// Largest gradient component seen.
    pub g_inf: f64,
}

impl RegretReport {
    pub fn at(&self, t: u64) -> Option<&RegretPoint> {
        self.points.iter().find(|p| p.t == t)
    }
}

/// 1, 2, 5, 10, 20, 50, ... up to `horizon`, always ending at `horizon`.
pub fn regret_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            let t = m * decade;
            if t > horizon {
                break 'outer;
            }
            out.push(t);
        }
        decade *= 10;
    }
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Online learning on the quadratic instance for one seed. Every round is
/// logged; the trajectory's regret column is the running regret.
pub fn regret_run(config: &ExperimentConfig, seed: u64) -> Result<(RegretReport, TrajectoryRecord)> {
    config.validate()?;
    let ProblemSpec::OnlineQuadratic { dim, horizon, radius } = config.problem else {
        return Err(Error::config("regret runs need an online_quadratic problem"));
    };
    if horizon < 100 {
        return Err(Error::config(format!("regret runs need horizon >= 100, got {horizon}")));
    }
    let mut problem = OnlineQuadratic::new(dim, seed, horizon, radius)?;
    let comparator = problem.best_fixed_point(horizon)?;
    let mut theta = problem.initial_point();
    let mut optimizer = Optimizer::new(config.optimizer.kind, config.optimizer.params, dim)?;
    let mut grad = vec![0.0; dim];
    let mut lo = theta.clone();
    let mut hi = theta.clone();
    let mut g_inf = 0.0f64;
    let mut regret = 0.0;
    let mut rows = Vec::with_capacity(horizon as usize);
    let mut status = RunStatus::Exhausted;
    let mut max_norm = 0.0f64;

    for t in 1..=horizon {
        let loss = problem.loss_grad(t, &theta, &mut grad)?;
        regret += loss - problem.round_loss(t, &comparator)?;
        g_inf = grad.iter().fold(g_inf, |a, g| a.max(g.abs()));
        let norm = match optimizer.step(&mut theta, &grad) {
            Ok(n) => n,
            Err(_) => {
                rows.push(TrajectoryRow { step: t, loss, update_inf_norm: 0.0, dist_to_opt: None, regret: Some(regret) });
                status = RunStatus::Diverged { step: t };
                break;
            }
        };
        problem.constrain(&mut theta);
        max_norm = max_norm.max(norm);
        for ((l, h), x) in lo.iter_mut().zip(hi.iter_mut()).zip(&theta) {
            *l = l.min(*x);
            *h = h.max(*x);
        }
        rows.push(TrajectoryRow { step: t, loss, update_inf_norm: norm, dist_to_opt: None, regret: Some(regret) });
    }

    let points = regret_checkpoints(horizon)
        .into_iter()
        .filter_map(|t| rows.get(t as usize - 1))
        .map(|row| {
            let r = row.regret.unwrap_or(f64::NAN);
            RegretPoint { t: row.step, regret: r, regret_over_sqrt_t: r / (row.step as f64).sqrt() }
        })
        .collect();
    let ranges: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
    let report = RegretReport {
        seed,
        horizon,
        comparator,
        points,
        diameter: ranges.iter().map(|r| r * r).sum::<f64>().sqrt(),
        diameter_inf: ranges.iter().fold(0.0, |a, r| a.max(*r)),
        g_inf,
    };
    let steps = rows.last().map_or(0, |r| r.step);
    let final_loss = rows.last().map_or(f64::NAN, |r| r.loss);
    let record = TrajectoryRecord { seed, rows, status, steps, max_update_inf_norm: max_norm, final_loss };
    Ok((report, record))
}
