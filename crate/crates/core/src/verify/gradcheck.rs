use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::finite_diff::{finite_diff_grad, max_relative_error};
use crate::error::Result;
use crate::mlp::{self, Batch, NetworkSpec};
use crate::rng::{self, streams};

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Denominator floor for the relative error; below it the comparison is
/// effectively absolute.
pub const GRADCHECK_FLOOR: f64 = 1e-6;
const MAX_PARAMS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckCase {
    pub spec: NetworkSpec,
    pub seed: u64,
    pub batch_size: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub cases: Vec<GradCheckCase>,
    pub passed: bool,
}

/// Compares backprop against central differences on `n_nets` random small
/// networks (at most 200 parameters each).
pub fn gradcheck_battery(n_nets: usize, seed: u64) -> Result<GradCheckReport> {
    let mut rng = rng::seeded(seed, streams::DATA);
    let mut cases = Vec::with_capacity(n_nets);
    while cases.len() < n_nets {
        let spec = NetworkSpec::new(
            rng.random_range(1..=5),
            rng.random_range(1..=6),
            rng.random_range(1..=3),
            rng.random_range(2..=4),
        )?;
        if spec.param_count() > MAX_PARAMS {
            continue;
        }
        let net_seed: u64 = rng.random();
        let params = mlp::kaiming_uniform_init(spec, net_seed);
        let batch_size = rng.random_range(1..=4);
        let inputs = Array2::from_shape_fn((batch_size, spec.input_dim), |_| rng.sample::<f64, _>(StandardNormal));
        let labels = (0..batch_size).map(|_| rng.random_range(0..spec.output_dim)).collect();
        let batch = Batch::new(inputs, labels)?;

        let (_, cache) = mlp::forward(&params, &batch)?;
        let analytic = mlp::backward(&params, &batch, &cache)?;
        let numeric = finite_diff_grad(
            |theta| {
                let p = mlp::NetworkParams::from_flat(spec, theta.to_vec()).expect("same spec");
                mlp::forward(&p, &batch).map(|(l, _)| l).unwrap_or(f64::NAN)
            },
            params.flat(),
            GRADCHECK_STEP,
        )?;
        cases.push(GradCheckCase {
            spec,
            seed: net_seed,
            batch_size,
            max_relative_error: max_relative_error(&analytic, &numeric, GRADCHECK_FLOOR),
        });
    }
    let passed = cases.iter().all(|c| c.max_relative_error <= GRADCHECK_TOLERANCE);
    Ok(GradCheckReport { step: GRADCHECK_STEP, tolerance: GRADCHECK_TOLERANCE, cases, passed })
}
