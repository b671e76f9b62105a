use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use laprop::harness::{
    deep_fc_study, grid_search, regret_study, rosenbrock_study, spike_study, DataSpec, DeepFcStudy, GridStudy,
    ProblemSpec, RegretStudy, RosenbrockStudy, SpikeStudy,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{float, opt_float, OutputDir, RunManifest};
use crate::BenchKind;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<u64>,
    pub mnist: Option<(PathBuf, PathBuf)>,
}

/// A parsed study config of any benchmark kind.
#[derive(Debug, Clone, PartialEq)]
pub enum StudyConfig {
    Rosenbrock(RosenbrockStudy),
    DeepFc(DeepFcStudy),
    Regret(RegretStudy),
    Grid(GridStudy),
    Spike(SpikeStudy),
}

fn parse_value<T: DeserializeOwned>(value: serde_json::Value, origin: &Path) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Parse { path: origin.into(), message: e.to_string() })
}

fn parse_toml<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T, CliError> {
    toml::from_str(text).map_err(|e| CliError::Parse { path: origin.into(), message: e.to_string() })
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("study configs serialize")
}

fn mnist_spec(old: &DataSpec, images: &Path, labels: &Path) -> DataSpec {
    let limit = match old {
        DataSpec::Synthetic { n, .. } => Some(*n),
        DataSpec::Mnist { limit, .. } => *limit,
    };
    DataSpec::Mnist { images: images.into(), labels: labels.into(), limit }
}

impl StudyConfig {
    pub fn kind(&self) -> BenchKind {
        match self {
            StudyConfig::Rosenbrock(_) => BenchKind::Rosenbrock,
            StudyConfig::DeepFc(_) => BenchKind::Deepfc,
            StudyConfig::Regret(_) => BenchKind::Regret,
            StudyConfig::Grid(_) => BenchKind::Grid,
            StudyConfig::Spike(_) => BenchKind::Spike,
        }
    }

    pub fn from_toml(kind: BenchKind, text: &str, origin: &Path) -> Result<StudyConfig, CliError> {
        Ok(match kind {
            BenchKind::Rosenbrock => StudyConfig::Rosenbrock(parse_toml(text, origin)?),
            BenchKind::Deepfc => StudyConfig::DeepFc(parse_toml(text, origin)?),
            BenchKind::Regret => StudyConfig::Regret(parse_toml(text, origin)?),
            BenchKind::Grid => StudyConfig::Grid(parse_toml(text, origin)?),
            BenchKind::Spike => StudyConfig::Spike(parse_toml(text, origin)?),
        })
    }

    pub fn from_json(kind: BenchKind, value: serde_json::Value, origin: &Path) -> Result<StudyConfig, CliError> {
        Ok(match kind {
            BenchKind::Rosenbrock => StudyConfig::Rosenbrock(parse_value(value, origin)?),
            BenchKind::Deepfc => StudyConfig::DeepFc(parse_value(value, origin)?),
            BenchKind::Regret => StudyConfig::Regret(parse_value(value, origin)?),
            BenchKind::Grid => StudyConfig::Grid(parse_value(value, origin)?),
            BenchKind::Spike => StudyConfig::Spike(parse_value(value, origin)?),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            StudyConfig::Rosenbrock(c) => to_value(c),
            StudyConfig::DeepFc(c) => to_value(c),
            StudyConfig::Regret(c) => to_value(c),
            StudyConfig::Grid(c) => to_value(c),
            StudyConfig::Spike(c) => to_value(c),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            StudyConfig::Rosenbrock(c) => c.seeds.clone(),
            StudyConfig::DeepFc(c) => c.seeds.clone(),
            StudyConfig::Regret(c) => c.seeds.clone(),
            StudyConfig::Grid(c) => c.base.seeds.clone(),
            StudyConfig::Spike(c) => c.seeds.clone(),
        }
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<(), CliError> {
        if let Some(n) = overrides.seeds {
            if n == 0 {
                return Err(CliError::Config("--seeds must be >= 1".into()));
            }
            let seeds: Vec<u64> = (0..n).collect();
            match self {
                StudyConfig::Rosenbrock(c) => c.seeds = seeds,
                StudyConfig::DeepFc(c) => c.seeds = seeds,
                StudyConfig::Regret(c) => c.seeds = seeds,
                StudyConfig::Grid(c) => c.base.seeds = seeds,
                StudyConfig::Spike(c) => c.seeds = seeds,
            }
        }
        if let Some((images, labels)) = &overrides.mnist {
            let data = match self {
                StudyConfig::DeepFc(c) => &mut c.data,
                StudyConfig::Spike(c) => &mut c.data,
                StudyConfig::Grid(GridStudy { base, .. }) => match &mut base.problem {
                    ProblemSpec::Classification { data, .. } => data,
                    _ => return Err(CliError::Config("--mnist-* needs a classification problem".into())),
                },
                _ => return Err(CliError::Config("--mnist-* only applies to deepfc, spike and grid".into())),
            };
            *data = mnist_spec(data, images, labels);
        }
        Ok(())
    }
}

pub fn load_study(kind: BenchKind, path: &Path) -> Result<StudyConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    StudyConfig::from_toml(kind, &text, path)
}

pub fn bench_from_file(
    kind: BenchKind,
    config: &Path,
    out: &Path,
    overrides: &Overrides,
) -> Result<RunManifest, CliError> {
    let mut study = load_study(kind, config)?;
    study.apply(overrides)?;
    run_study(&study, out)
}

/// Re-executes the study recorded in a manifest.
pub fn replay(manifest: &Path, out: &Path) -> Result<RunManifest, CliError> {
    let m = RunManifest::read(manifest)?;
    let kind = m
        .command
        .strip_prefix("bench ")
        .and_then(BenchKind::from_name)
        .ok_or_else(|| CliError::Config(format!("manifest command `{}` is not a benchmark", m.command)))?;
    let study = StudyConfig::from_json(kind, m.config, manifest)?;
    run_study(&study, out)
}

/// Runs a study and writes its CSVs, summary JSON and manifest into `out`.
pub fn run_study(study: &StudyConfig, out: &Path) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let mut dir = OutputDir::create(out)?;
    match study {
        StudyConfig::Rosenbrock(c) => write_rosenbrock(c, &mut dir)?,
        StudyConfig::DeepFc(c) => write_deep_fc(c, &mut dir)?,
        StudyConfig::Regret(c) => write_regret(c, &mut dir)?,
        StudyConfig::Grid(c) => write_grid(c, &mut dir)?,
        StudyConfig::Spike(c) => write_spike(c, &mut dir)?,
    }
    dir.finish(&format!("bench {}", study.kind().name()), study.to_json(), study.seeds(), start.elapsed())
}

pub const ROSENBROCK_HEADER: &str =
    "optimizer,sigma,nu,lambda,max_steps,runs,converged,diverged,median_steps,failure_fraction";

fn write_rosenbrock(c: &RosenbrockStudy, dir: &mut OutputDir) -> Result<(), CliError> {
    let result = rosenbrock_study(c)?;
    let mut csv = format!("{ROSENBROCK_HEADER}\n");
    for r in &result.rows {
        let s = &r.best.summary;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.optimizer,
            float(r.sigma),
            float(r.nu),
            float(r.best.lambda),
            r.max_steps,
            s.runs,
            s.converged,
            s.diverged,
            opt_float(s.median_steps),
            float(s.failure_fraction)
        );
    }
    dir.write("summary.csv", &csv)?;
    dir.write_json("summary.json", &result.rows)?;
    dir.write_trajectories(&result.trajectories)
}

pub const DEEP_FC_HEADER: &str = "optimizer,depth,best_lambda,successes,seeds,threshold";

fn write_deep_fc(c: &DeepFcStudy, dir: &mut OutputDir) -> Result<(), CliError> {
    let rows = deep_fc_study(c)?;
    let mut csv = format!("{DEEP_FC_HEADER}\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.optimizer,
            r.depth,
            float(r.best_lambda),
            r.successes,
            r.seeds,
            float(r.threshold)
        );
    }
    dir.write("summary.csv", &csv)?;
    dir.write_json("summary.json", &rows)?;
    for r in &rows {
        dir.write_trajectories(&r.trajectories)?;
    }
    Ok(())
}

pub const REGRET_HEADER: &str = "seed,t,regret,regret_over_sqrt_t";

fn write_regret(c: &RegretStudy, dir: &mut OutputDir) -> Result<(), CliError> {
    let result = regret_study(c)?;
    let mut csv = format!("{REGRET_HEADER}\n");
    for s in &result.seeds {
        for p in &s.report.points {
            let _ = writeln!(csv, "{},{},{},{}", s.report.seed, p.t, float(p.regret), float(p.regret_over_sqrt_t));
        }
    }
    dir.write("regret.csv", &csv)?;
    dir.write_json("summary.json", &result)?;
    let trajectories: Vec<_> = result.seeds.iter().filter_map(|s| s.trajectory.clone()).collect();
    dir.write_trajectories(&trajectories)
}

pub const GRID_HEADER: &str =
    "mu,nu,lambda,runs,converged,diverged,median_steps,failure_fraction,final_loss_median,divergent";

fn write_grid(c: &GridStudy, dir: &mut OutputDir) -> Result<(), CliError> {
    let cells = grid_search(&c.base, &c.mus, &c.nus, &c.lambdas)?;
    let mut csv = format!("{GRID_HEADER}\n");
    for cell in &cells {
        let s = &cell.summary;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            float(cell.mu),
            float(cell.nu),
            float(cell.lambda),
            s.runs,
            s.converged,
            s.diverged,
            opt_float(s.median_steps),
            float(s.failure_fraction),
            opt_float(cell.final_loss_median),
            cell.divergent
        );
    }
    dir.write("grid.csv", &csv)?;
    dir.write_json("grid.json", &cells)?;
    Ok(())
}

pub const SPIKE_HEADER: &str = "optimizer,seed,spike_step,status,min_smoothed_loss,final_smoothed_loss";

fn write_spike(c: &SpikeStudy, dir: &mut OutputDir) -> Result<(), CliError> {
    let rows = spike_study(c)?;
    let mut csv = format!("{SPIKE_HEADER}\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.optimizer,
            r.seed,
            r.spike_step.map(|s| s.to_string()).unwrap_or_default(),
            r.status.label(),
            float(r.min_smoothed_loss),
            float(r.final_smoothed_loss)
        );
    }
    dir.write("summary.csv", &csv)?;
    dir.write_json("summary.json", &rows)?;
    let trajectories: Vec<_> = rows.iter().filter_map(|r| r.trajectory.clone()).collect();
    dir.write_trajectories(&trajectories)
}
