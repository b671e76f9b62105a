use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{HyperParams, OptimizerKind};
use crate::problems::{
    load_mnist_idx, ClassificationObjective, DatasetHandle, NoisyQuadratic, NoisyRosenbrock, Objective,
    OnlineQuadratic, SynthSpec,
};

pub const DEFAULT_DOMAIN_RADIUS: f64 = 10.0;

fn default_radius() -> f64 {
    DEFAULT_DOMAIN_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Rosenbrock {
        sigma: f64,
    },
    OnlineQuadratic {
        dim: usize,
        horizon: u64,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    NoisyQuadratic {
        dim: usize,
        noise_std: f64,
        start: f64,
        #[serde(default)]
        scale_decades: f64,
    },
    Classification {
        data: DataSpec,
        width: usize,
        depth: usize,
        batch_size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Synthetic {
        n: usize,
        input_dim: usize,
        classes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spread: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<usize>,
    },
}

impl DataSpec {
    pub fn load(&self) -> Result<DatasetHandle> {
        match self {
            DataSpec::Synthetic { n, input_dim, classes, spread, seed } => {
                SynthSpec { n: *n, input_dim: *input_dim, classes: *classes, spread: *spread }.generate(*seed)
            }
            DataSpec::Mnist { images, labels, limit } => load_mnist_idx(images, labels, *limit),
        }
    }
}

/// A problem whose expensive parts (datasets) are loaded once and shared
/// between seeds.
#[derive(Debug, Clone)]
pub enum PreparedProblem {
    Simple(ProblemSpec),
    Classification { data: Arc<DatasetHandle>, width: usize, depth: usize, batch_size: usize },
}

impl PreparedProblem {
    pub fn objective(&self, seed: u64) -> Result<Box<dyn Objective>> {
        Ok(match self {
            PreparedProblem::Classification { data, width, depth, batch_size } => {
                Box::new(ClassificationObjective::new(data.clone(), *width, *depth, *batch_size, seed)?)
            }
            PreparedProblem::Simple(spec) => match *spec {
                ProblemSpec::Rosenbrock { sigma } => Box::new(NoisyRosenbrock::new(sigma, seed)?),
                ProblemSpec::OnlineQuadratic { dim, horizon, radius } => {
                    Box::new(OnlineQuadratic::new(dim, seed, horizon, radius)?)
                }
                ProblemSpec::NoisyQuadratic { dim, noise_std, start, scale_decades } => {
                    Box::new(NoisyQuadratic::new(dim, noise_std, start, seed)?.with_scale_decades(scale_decades)?)
                }
                ProblemSpec::Classification { .. } => unreachable!("classification is prepared separately"),
            },
        })
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ProblemSpec::Rosenbrock { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::config(format!("sigma must be >= 0, got {sigma}")))
            }
            ProblemSpec::OnlineQuadratic { dim, horizon, radius } => {
                if dim == 0 || horizon == 0 {
                    Err(Error::config("online quadratic needs dim >= 1 and horizon >= 1"))
                } else if !(radius > 0.0 && radius.is_finite()) {
                    Err(Error::config(format!("radius must be positive, got {radius}")))
                } else {
                    Ok(())
                }
            }
            ProblemSpec::NoisyQuadratic { dim, noise_std, start, scale_decades } => {
                if dim == 0 || !(noise_std >= 0.0) || !start.is_finite() || !(scale_decades >= 0.0) {
                    Err(Error::config(
                        "noisy quadratic needs dim >= 1, noise_std >= 0, scale_decades >= 0 and finite start",
                    ))
                } else {
                    Ok(())
                }
            }
            ProblemSpec::Classification { width, batch_size, .. } => {
                if width == 0 || batch_size == 0 {
                    Err(Error::config("classification needs width >= 1 and batch_size >= 1"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn prepare(&self) -> Result<PreparedProblem> {
        self.validate()?;
        match self {
            ProblemSpec::Classification { data, width, depth, batch_size } => Ok(PreparedProblem::Classification {
                data: Arc::new(data.load()?),
                width: *width,
                depth: *depth,
                batch_size: *batch_size,
            }),
            other => Ok(PreparedProblem::Simple(other.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    #[serde(default)]
    pub params: HyperParams,
}

/// Optional loss-based success criterion: the mean of the last `window`
/// losses falls below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossTarget {
    pub threshold: f64,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceCriterion {
    /// Distance to the optimum that counts as converged.
    pub tolerance: f64,
    /// Consecutive recorded steps that must satisfy `tolerance`.
    pub patience: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_target: Option<LossTarget>,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        ConvergenceCriterion { tolerance: 0.05, patience: 50, loss_target: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergenceCeiling {
    pub loss: f64,
    pub param_inf_norm: f64,
}

impl Default for DivergenceCeiling {
    fn default() -> Self {
        DivergenceCeiling { loss: 1e8, param_inf_norm: 1e8 }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_stride() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerConfig,
    pub max_steps: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub convergence: ConvergenceCriterion,
    #[serde(default)]
    pub divergence: DivergenceCeiling,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec, kind: OptimizerKind, params: HyperParams, max_steps: u64) -> Self {
        ExperimentConfig {
            problem,
            optimizer: OptimizerConfig { kind, params },
            max_steps,
            seeds: default_seeds(),
            convergence: ConvergenceCriterion::default(),
            divergence: DivergenceCeiling::default(),
            record_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride must be >= 1"));
        }
        let c = &self.convergence;
        if !(c.tolerance > 0.0) {
            return Err(Error::config(format!("convergence tolerance must be > 0, got {}", c.tolerance)));
        }
        if c.patience == 0 {
            return Err(Error::config("convergence patience must be >= 1"));
        }
        if let Some(target) = c.loss_target {
            if target.window == 0 || !target.threshold.is_finite() {
                return Err(Error::config("loss_target needs window >= 1 and a finite threshold"));
            }
        }
        let d = &self.divergence;
        if !(d.loss > 0.0 && d.param_inf_norm > 0.0) {
            return Err(Error::config("divergence ceilings must be positive"));
        }
        self.optimizer.params.validate_for(self.optimizer.kind)?;
        self.problem.validate()
    }
}
