use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{init_state, step_into, HyperParams, OptimizerKind};
use crate::rng::{self, streams};

/// Exact limit identities between rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    /// LaProp at `nu = 0, eps = 0` is signed momentum.
    LaPropNoAdaptivityIsSsgm,
    /// LaProp at `mu = 0` is bias-corrected RMSProp.
    LaPropNoMomentumIsRmsProp,
    /// LaProp at `mu = nu = eps = 0` is signed descent.
    LaPropBareIsSsg,
    /// Adam at `mu = 0` is bias-corrected RMSProp.
    AdamNoMomentumIsRmsProp,
}

impl Identity {
    /// Largest relative deviation accepted: the signed identities must agree
    /// bit for bit, the RMSProp ones up to one rounding.
    pub fn tolerance(self) -> f64 {
        match self {
            Identity::LaPropNoAdaptivityIsSsgm | Identity::LaPropBareIsSsg => 0.0,
            Identity::LaPropNoMomentumIsRmsProp | Identity::AdamNoMomentumIsRmsProp => 1e-15,
        }
    }
}

pub type Configured = (OptimizerKind, HyperParams);

fn same_lr(a: &HyperParams, b: &HyperParams) -> bool {
    a.lambda == b.lambda && a.lr_schedule == b.lr_schedule
}

fn match_ordered(a: &Configured, b: &Configured) -> Option<Identity> {
    use OptimizerKind::*;
    let (ha, hb) = (&a.1, &b.1);
    if !same_lr(ha, hb) {
        return None;
    }
    match (a.0, b.0) {
        (LaProp, SsgM)
            if ha.nu == 0.0
                && ha.epsilon == 0.0
                && ha.mu == hb.mu
                && ha.mu_schedule == hb.mu_schedule
                && ha.bias_correct == hb.bias_correct =>
        {
            Some(Identity::LaPropNoAdaptivityIsSsgm)
        }
        (LaProp, Ssg) if ha.mu == 0.0 && ha.nu == 0.0 && ha.epsilon == 0.0 => Some(Identity::LaPropBareIsSsg),
        (LaProp, RmsProp) | (Adam, RmsProp)
            if ha.mu == 0.0 && ha.nu == hb.nu && ha.epsilon == hb.epsilon && ha.bias_correct == hb.bias_correct =>
        {
            Some(if a.0 == LaProp {
                Identity::LaPropNoMomentumIsRmsProp
            } else {
                Identity::AdamNoMomentumIsRmsProp
            })
        }
        _ => None,
    }
}

pub fn identify(a: &Configured, b: &Configured) -> Option<Identity> {
    match_ordered(a, b).or_else(|| match_ordered(b, a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub identity: Identity,
    pub n_sequences: usize,
    pub n_steps: usize,
    pub max_deviation: f64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.identity.tolerance()
    }
}

pub const EQUIVALENCE_STEPS: usize = 100;
const EQUIVALENCE_DIM: usize = 4;

/// Runs both configured rules on the same random gradient sequences and
/// returns the largest elementwise relative deviation between their deltas.
pub fn equivalence_check(a: Configured, b: Configured, n_sequences: usize, seed: u64) -> Result<EquivalenceReport> {
    let identity = identify(&a, &b).ok_or_else(|| {
        Error::invalid(format!("({}, {}) with these hyperparameters is not a known identity", a.0, b.0))
    })?;
    a.1.validate_for(a.0)?;
    b.1.validate_for(b.0)?;
    let mut rng = rng::seeded(seed, streams::GRADIENTS);
    let mut grad = [0.0; EQUIVALENCE_DIM];
    let (mut da, mut db) = ([0.0; EQUIVALENCE_DIM], [0.0; EQUIVALENCE_DIM]);
    let mut worst = 0.0f64;
    for _ in 0..n_sequences {
        // each sequence gets its own gradient scale
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let mut sa = init_state(EQUIVALENCE_DIM, a.0)?;
        let mut sb = init_state(EQUIVALENCE_DIM, b.0)?;
        for _ in 0..EQUIVALENCE_STEPS {
            grad.iter_mut().for_each(|g| *g = scale * rng.sample::<f64, _>(StandardNormal));
            step_into(&mut sa, &grad, &a.1, None, &mut da)?;
            step_into(&mut sb, &grad, &b.1, None, &mut db)?;
            for (x, y) in da.iter().zip(&db) {
                let m = x.abs().max(y.abs());
                if m > 0.0 {
                    worst = worst.max((x - y).abs() / m);
                }
            }
        }
    }
    Ok(EquivalenceReport { identity, n_sequences, n_steps: EQUIVALENCE_STEPS, max_deviation: worst })
}

/// The four identities with representative hyperparameters.
pub fn identity_battery(n_sequences: usize, seed: u64) -> Result<Vec<EquivalenceReport>> {
    let base = HyperParams { lambda: 0.01, ..HyperParams::default() };
    let pairs: [(Configured, Configured); 4] = [
        (
            (OptimizerKind::LaProp, base.with_mu(0.9).with_nu(0.0).with_epsilon(0.0)),
            (OptimizerKind::SsgM, base.with_mu(0.9)),
        ),
        (
            (OptimizerKind::LaProp, base.with_mu(0.0).with_nu(0.99)),
            (OptimizerKind::RmsProp, base.with_nu(0.99)),
        ),
        (
            (OptimizerKind::LaProp, base.with_mu(0.0).with_nu(0.0).with_epsilon(0.0)),
            (OptimizerKind::Ssg, base),
        ),
        (
            (OptimizerKind::Adam, base.with_mu(0.0).with_nu(0.99)),
            (OptimizerKind::RmsProp, base.with_nu(0.99)),
        ),
    ];
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| equivalence_check(a, b, n_sequences, seed.wrapping_add(i as u64)))
        .collect()
}
