use super::{bias_corrections, HyperParams, OptimizerKind, OptimizerState, StepOutput};
use crate::error::{Error, Result};

/// Per-step quantities shared by all rules.
struct StepCtx {
    lr: f64,
    mu: f64,
}

/// Validates the inputs, then increments `t` and evaluates the schedules.
/// The state is left untouched when validation fails.
fn begin(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &[f64],
    expected: OptimizerKind,
) -> Result<StepCtx> {
    if state.kind != expected {
        return Err(Error::invalid(format!(
            "state belongs to {} but {} step was requested",
            state.kind, expected
        )));
    }
    if grad.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "gradient length {} does not match state length {}",
            grad.len(),
            state.m.len()
        )));
    }
    if delta.len() != grad.len() {
        return Err(Error::invalid("delta buffer length does not match gradient"));
    }
    if let Some((index, &value)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFiniteInput { index, value });
    }
    let t = state.t + 1;
    let lr = hp.lr_schedule.eval(hp.lambda, t)?;
    let mu = hp.mu_schedule.eval(hp.mu, t)?;
    state.t = t;
    Ok(StepCtx { lr, mu })
}

/// Checks the produced delta and returns `max |delta| / lr`.
fn finish(delta: &[f64], lr: f64) -> Result<f64> {
    let mut max = 0.0f64;
    for (index, d) in delta.iter().enumerate() {
        if !d.is_finite() {
            return Err(Error::NonFiniteUpdate { index });
        }
        max = max.max(d.abs());
    }
    Ok(if max == 0.0 { 0.0 } else { max / lr })
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `num / den` with an exact zero numerator mapping to zero, so that a zero
/// gradient on an empty history does not produce 0/0.
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn ema_sq(n: &mut f64, g: f64, nu: f64) {
    *n = nu * *n + (1.0 - nu) * g * g;
}

pub(super) fn laprop_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &mut [f64],
) -> Result<f64> {
    let ctx = begin(state, grad, hp, delta, OptimizerKind::LaProp)?;
    let (cm, cn) = bias_corrections(state, ctx.mu, hp.nu, hp.bias_correct);
    for i in 0..grad.len() {
        let g = grad[i];
        ema_sq(&mut state.n[i], g, hp.nu);
        let normed = ratio(g, (state.n[i] / cn).sqrt() + hp.epsilon);
        state.m[i] = ctx.mu * state.m[i] + (1.0 - ctx.mu) * normed;
        delta[i] = -ctx.lr * (state.m[i] / cm);
    }
    finish(delta, ctx.lr)
}

fn adam_like_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &mut [f64],
    kind: OptimizerKind,
) -> Result<f64> {
    let ctx = begin(state, grad, hp, delta, kind)?;
    let (cm, cn) = bias_corrections(state, ctx.mu, hp.nu, hp.bias_correct);
    for i in 0..grad.len() {
        let g = grad[i];
        ema_sq(&mut state.n[i], g, hp.nu);
        state.m[i] = ctx.mu * state.m[i] + (1.0 - ctx.mu) * g;
        let second = match state.n_max.as_mut() {
            Some(n_max) => {
                n_max[i] = n_max[i].max(state.n[i]);
                n_max[i]
            }
            None => state.n[i],
        };
        let denom = (second / cn).sqrt() + hp.epsilon;
        delta[i] = -ctx.lr * ratio(state.m[i] / cm, denom);
    }
    finish(delta, ctx.lr)
}

fn rmsprop_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &mut [f64],
) -> Result<f64> {
    let ctx = begin(state, grad, hp, delta, OptimizerKind::RmsProp)?;
    let (_, cn) = bias_corrections(state, 0.0, hp.nu, hp.bias_correct);
    for i in 0..grad.len() {
        let g = grad[i];
        ema_sq(&mut state.n[i], g, hp.nu);
        delta[i] = -ctx.lr * ratio(g, (state.n[i] / cn).sqrt() + hp.epsilon);
    }
    finish(delta, ctx.lr)
}

fn sgd_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &mut [f64],
) -> Result<f64> {
    let ctx = begin(state, grad, hp, delta, OptimizerKind::Sgd)?;
    for (d, g) in delta.iter_mut().zip(grad) {
        *d = -ctx.lr * g;
    }
    finish(delta, ctx.lr)
}

fn sgdm_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &mut [f64],
) -> Result<f64> {
    let ctx = begin(state, grad, hp, delta, OptimizerKind::SgdM)?;
    for i in 0..grad.len() {
        state.m[i] = ctx.mu * state.m[i] + grad[i];
        delta[i] = -ctx.lr * state.m[i];
    }
    finish(delta, ctx.lr)
}

fn ssg_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &mut [f64],
) -> Result<f64> {
    let ctx = begin(state, grad, hp, delta, OptimizerKind::Ssg)?;
    for (d, g) in delta.iter_mut().zip(grad) {
        *d = -ctx.lr * sgn(*g);
    }
    finish(delta, ctx.lr)
}

fn ssgm_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &mut [f64],
) -> Result<f64> {
    let ctx = begin(state, grad, hp, delta, OptimizerKind::SsgM)?;
    let (cm, _) = bias_corrections(state, ctx.mu, hp.nu, hp.bias_correct);
    for i in 0..grad.len() {
        state.m[i] = ctx.mu * state.m[i] + (1.0 - ctx.mu) * sgn(grad[i]);
        delta[i] = -ctx.lr * (state.m[i] / cm);
    }
    finish(delta, ctx.lr)
}

fn lapropw_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    params: &[f64],
    delta: &mut [f64],
) -> Result<f64> {
    if params.len() != grad.len() {
        return Err(Error::invalid(format!(
            "parameter length {} does not match gradient length {}",
            params.len(),
            grad.len()
        )));
    }
    let ctx = begin(state, grad, hp, delta, OptimizerKind::LaPropW)?;
    let (cm, cn) = bias_corrections(state, ctx.mu, hp.nu, hp.bias_correct);
    let keep = 1.0 - hp.weight_decay;
    for i in 0..grad.len() {
        let g = grad[i];
        ema_sq(&mut state.n[i], g, hp.nu);
        let normed = ratio(g, (state.n[i] / cn).sqrt() + hp.epsilon);
        state.m[i] = ctx.mu * state.m[i] + (1.0 - ctx.mu) * normed;
        let theta = params[i];
        delta[i] = (theta - ctx.lr * (state.m[i] / cm)) * keep - theta;
    }
    finish(delta, ctx.lr)
}

fn amsprop_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &mut [f64],
) -> Result<f64> {
    let ctx = begin(state, grad, hp, delta, OptimizerKind::AmsProp)?;
    let (cm, cn) = bias_corrections(state, ctx.mu, hp.nu, hp.bias_correct);
    let n_max = state.n_max.as_mut().ok_or_else(|| Error::invalid("amsprop state lacks n_max"))?;
    for i in 0..grad.len() {
        let g = grad[i];
        ema_sq(&mut state.n[i], g, hp.nu);
        n_max[i] = n_max[i].max(state.n[i]);
        let normed = ratio(g, (n_max[i] / cn).sqrt() + hp.epsilon);
        state.m[i] = ctx.mu * state.m[i] + (1.0 - ctx.mu) * normed;
        delta[i] = -ctx.lr * (state.m[i] / cm);
    }
    finish(delta, ctx.lr)
}

fn centered_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    delta: &mut [f64],
) -> Result<f64> {
    if hp.epsilon <= 0.0 {
        return Err(Error::config("centered_laprop requires epsilon > 0"));
    }
    let ctx = begin(state, grad, hp, delta, OptimizerKind::CenteredLaProp)?;
    let (cm, cn) = bias_corrections(state, ctx.mu, hp.nu, hp.bias_correct);
    let n_bar = state.n_bar.as_mut().ok_or_else(|| Error::invalid("centered state lacks n_bar"))?;
    for i in 0..grad.len() {
        let g = grad[i];
        ema_sq(&mut state.n[i], g, hp.nu);
        n_bar[i] = hp.nu * n_bar[i] + (1.0 - hp.nu) * g;
        // Exact algebra keeps this nonnegative; clamp the rounding residue.
        let var = (state.n[i] - n_bar[i] * n_bar[i]).max(0.0);
        let normed = ratio(g, (var / cn).sqrt() + hp.epsilon);
        state.m[i] = ctx.mu * state.m[i] + (1.0 - ctx.mu) * normed;
        delta[i] = -ctx.lr * (state.m[i] / cm);
    }
    finish(delta, ctx.lr)
}

/// Dispatches on `state.kind`, writing the displacement into `delta` and
/// returning the normalized update magnitude. `params` is required for
/// LaProp-W only.
pub fn step_into(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    params: Option<&[f64]>,
    delta: &mut [f64],
) -> Result<f64> {
    match state.kind {
        OptimizerKind::Sgd => sgd_into(state, grad, hp, delta),
        OptimizerKind::SgdM => sgdm_into(state, grad, hp, delta),
        OptimizerKind::Ssg => ssg_into(state, grad, hp, delta),
        OptimizerKind::SsgM => ssgm_into(state, grad, hp, delta),
        OptimizerKind::RmsProp => rmsprop_into(state, grad, hp, delta),
        OptimizerKind::Adam => adam_like_into(state, grad, hp, delta, OptimizerKind::Adam),
        OptimizerKind::AmsGrad => adam_like_into(state, grad, hp, delta, OptimizerKind::AmsGrad),
        OptimizerKind::LaProp => laprop_into(state, grad, hp, delta),
        OptimizerKind::LaPropW => {
            let params =
                params.ok_or_else(|| Error::invalid("laprop_w needs the current parameters"))?;
            lapropw_into(state, grad, hp, params, delta)
        }
        OptimizerKind::AmsProp => amsprop_into(state, grad, hp, delta),
        OptimizerKind::CenteredLaProp => centered_into(state, grad, hp, delta),
    }
}

fn with_output(
    grad: &[f64],
    f: impl FnOnce(&mut [f64]) -> Result<f64>,
) -> Result<StepOutput> {
    let mut delta = vec![0.0; grad.len()];
    let update_inf_norm = f(&mut delta)?;
    Ok(StepOutput { delta, update_inf_norm })
}

pub fn laprop_step(state: &mut OptimizerState, grad: &[f64], hp: &HyperParams) -> Result<StepOutput> {
    with_output(grad, |d| laprop_into(state, grad, hp, d))
}

pub fn adam_step(state: &mut OptimizerState, grad: &[f64], hp: &HyperParams) -> Result<StepOutput> {
    with_output(grad, |d| adam_like_into(state, grad, hp, d, OptimizerKind::Adam))
}

pub fn amsgrad_step(state: &mut OptimizerState, grad: &[f64], hp: &HyperParams) -> Result<StepOutput> {
    with_output(grad, |d| adam_like_into(state, grad, hp, d, OptimizerKind::AmsGrad))
}

pub fn rmsprop_step(state: &mut OptimizerState, grad: &[f64], hp: &HyperParams) -> Result<StepOutput> {
    with_output(grad, |d| rmsprop_into(state, grad, hp, d))
}

pub fn sgd_step(state: &mut OptimizerState, grad: &[f64], hp: &HyperParams) -> Result<StepOutput> {
    with_output(grad, |d| sgd_into(state, grad, hp, d))
}

pub fn sgdm_step(state: &mut OptimizerState, grad: &[f64], hp: &HyperParams) -> Result<StepOutput> {
    with_output(grad, |d| sgdm_into(state, grad, hp, d))
}

pub fn ssg_step(state: &mut OptimizerState, grad: &[f64], hp: &HyperParams) -> Result<StepOutput> {
    with_output(grad, |d| ssg_into(state, grad, hp, d))
}

pub fn ssgm_step(state: &mut OptimizerState, grad: &[f64], hp: &HyperParams) -> Result<StepOutput> {
    with_output(grad, |d| ssgm_into(state, grad, hp, d))
}

pub fn lapropw_step(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
    params: &[f64],
) -> Result<StepOutput> {
    with_output(grad, |d| lapropw_into(state, grad, hp, params, d))
}

pub fn amsprop_step(state: &mut OptimizerState, grad: &[f64], hp: &HyperParams) -> Result<StepOutput> {
    with_output(grad, |d| amsprop_into(state, grad, hp, d))
}

pub fn centered_laprop_step(
    state: &mut OptimizerState,
    grad: &[f64],
    hp: &HyperParams,
) -> Result<StepOutput> {
    with_output(grad, |d| centered_into(state, grad, hp, d))
}
