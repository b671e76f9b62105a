//! Update rules for LaProp and its comparison family.
//!
//! Every optimizer is a step function from `(state, gradient)` to a parameter
//! displacement. The rules live in [`rules`] as independent implementations;
//! none of them delegates to another, so limit equivalences between them can
//! be checked numerically.

mod rules;
mod schedule;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use rules::{
    adam_step, amsgrad_step, amsprop_step, centered_laprop_step, laprop_step, lapropw_step,
    rmsprop_step, sgd_step, sgdm_step, ssg_step, ssgm_step, step_into,
};
pub use schedule::{schedule_eval, ScheduleSpec};

/// Default denominator guard.
pub const DEFAULT_EPSILON: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[serde(rename = "sgdm")]
    SgdM,
    Ssg,
    #[serde(rename = "ssgm")]
    SsgM,
    #[serde(rename = "rmsprop")]
    RmsProp,
    Adam,
    #[serde(rename = "amsgrad")]
    AmsGrad,
    #[serde(rename = "laprop")]
    LaProp,
    #[serde(rename = "laprop_w")]
    LaPropW,
    #[serde(rename = "amsprop")]
    AmsProp,
    #[serde(rename = "centered_laprop")]
    CenteredLaProp,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 11] = [
        OptimizerKind::Sgd,
        OptimizerKind::SgdM,
        OptimizerKind::Ssg,
        OptimizerKind::SsgM,
        OptimizerKind::RmsProp,
        OptimizerKind::Adam,
        OptimizerKind::AmsGrad,
        OptimizerKind::LaProp,
        OptimizerKind::LaPropW,
        OptimizerKind::AmsProp,
        OptimizerKind::CenteredLaProp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::SgdM => "sgdm",
            OptimizerKind::Ssg => "ssg",
            OptimizerKind::SsgM => "ssgm",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::Adam => "adam",
            OptimizerKind::AmsGrad => "amsgrad",
            OptimizerKind::LaProp => "laprop",
            OptimizerKind::LaPropW => "laprop_w",
            OptimizerKind::AmsProp => "amsprop",
            OptimizerKind::CenteredLaProp => "centered_laprop",
        }
    }

    /// Kinds that keep the running maximum of the preconditioner.
    pub fn tracks_max(self) -> bool {
        matches!(self, OptimizerKind::AmsGrad | OptimizerKind::AmsProp)
    }

    pub fn tracks_mean(self) -> bool {
        matches!(self, OptimizerKind::CenteredLaProp)
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown optimizer `{s}`")))
    }
}

/// Hyperparameters shared by every optimizer. Fields that a rule does not use
/// are ignored by it (e.g. `nu` for SGD, `weight_decay` outside LaProp-W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub lr_schedule: ScheduleSpec,
    pub mu_schedule: ScheduleSpec,
    pub weight_decay: f64,
    pub bias_correct: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            lambda: 4e-4,
            mu: 0.9,
            nu: 0.999,
            epsilon: DEFAULT_EPSILON,
            lr_schedule: ScheduleSpec::Constant,
            mu_schedule: ScheduleSpec::Constant,
            weight_decay: 0.0,
            bias_correct: true,
        }
    }
}

impl HyperParams {
    pub fn new(lambda: f64, mu: f64, nu: f64, epsilon: f64) -> Result<Self> {
        let hp = HyperParams { lambda, mu, nu, epsilon, ..HyperParams::default() };
        hp.validate()?;
        Ok(hp)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::config(format!("mu must lie in [0, 1), got {}", self.mu)));
        }
        if !(0.0..1.0).contains(&self.nu) {
            return Err(Error::config(format!("nu must lie in [0, 1), got {}", self.nu)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return Err(Error::config(format!(
                "weight_decay must lie in [0, 1), got {}",
                self.weight_decay
            )));
        }
        self.lr_schedule.validate()?;
        self.mu_schedule.validate()
    }

    /// Validation plus constraints that only apply to one kind.
    pub fn validate_for(&self, kind: OptimizerKind) -> Result<()> {
        self.validate()?;
        if kind == OptimizerKind::CenteredLaProp && self.epsilon <= 0.0 {
            return Err(Error::config(
                "centered_laprop requires epsilon > 0: the centered second moment vanishes on a constant gradient",
            ));
        }
        Ok(())
    }
}

/// Per-parameter accumulators plus step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub t: u64,
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    /// Running maximum of `n`, AMSGrad and AmsProp only.
    pub n_max: Option<Vec<f64>>,
    /// Running mean of the gradient, centered LaProp only.
    pub n_bar: Option<Vec<f64>>,
    /// Weight sum behind the momentum bias correction.
    pub cm_acc: f64,
    /// Weight sum behind the preconditioner bias correction.
    pub cn_acc: f64,
}

impl OptimizerState {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

pub fn init_state(param_count: usize, kind: OptimizerKind) -> Result<OptimizerState> {
    if param_count == 0 {
        return Err(Error::invalid("param_count must be >= 1"));
    }
    Ok(OptimizerState {
        kind,
        t: 0,
        m: vec![0.0; param_count],
        n: vec![0.0; param_count],
        n_max: kind.tracks_max().then(|| vec![0.0; param_count]),
        n_bar: kind.tracks_mean().then(|| vec![0.0; param_count]),
        cm_acc: 0.0,
        cn_acc: 0.0,
    })
}

/// Advances the bias-correction weight sums by one step and returns
/// `(c_m, c_n)`.
///
/// `cm_acc <- mu_t * cm_acc + (1 - mu_t)` reduces to `1 - mu^t` for a constant
/// momentum and stays a proper weight sum when `mu_t` varies. With
/// `bias_correct == false` the sums still advance but `(1, 1)` is returned.
pub fn bias_corrections(
    state: &mut OptimizerState,
    mu_t: f64,
    nu: f64,
    bias_correct: bool,
) -> (f64, f64) {
    state.cm_acc = mu_t * state.cm_acc + (1.0 - mu_t);
    state.cn_acc = nu * state.cn_acc + (1.0 - nu);
    if bias_correct {
        (state.cm_acc, state.cn_acc)
    } else {
        (1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Signed displacement `theta_t - theta_{t-1}`.
    pub delta: Vec<f64>,
    /// `max_i |delta_i| / lambda_t`.
    pub update_inf_norm: f64,
}

/// An optimizer kind bound to its hyperparameters and state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    hp: HyperParams,
    state: OptimizerState,
    delta: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, hp: HyperParams, param_count: usize) -> Result<Self> {
        hp.validate_for(kind)?;
        let state = init_state(param_count, kind)?;
        Ok(Optimizer { hp, state, delta: vec![0.0; param_count] })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.state.kind
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// Delta produced by the most recent step.
    pub fn last_delta(&self) -> &[f64] {
        &self.delta
    }

    /// Computes the update for `grad`, applies it to `params` and returns the
    /// normalized update magnitude.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<f64> {
        if params.len() != self.delta.len() {
            return Err(Error::invalid(format!(
                "parameter length {} does not match optimizer length {}",
                params.len(),
                self.delta.len()
            )));
        }
        let norm = step_into(&mut self.state, grad, &self.hp, Some(params), &mut self.delta)?;
        for (p, d) in params.iter_mut().zip(&self.delta) {
            *p += d;
        }
        Ok(norm)
    }
}
