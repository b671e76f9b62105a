use std::sync::Arc;

use rand::seq::index;

use super::{DatasetHandle, Objective};
use crate::error::{Error, Result};
use crate::mlp::{self, NetworkParams, NetworkSpec};
use crate::rng::{self, streams};

/// Minibatch training of a ReLU MLP; the reported loss is the minibatch loss
/// before the update.
#[derive(Debug, Clone)]
pub struct ClassificationObjective {
    spec: NetworkSpec,
    data: Arc<DatasetHandle>,
    batch_size: usize,
    init: Vec<f64>,
    rng: rng::Rng,
}

impl ClassificationObjective {
    pub fn new(data: Arc<DatasetHandle>, width: usize, depth: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::config("dataset is empty"));
        }
        if batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        let spec = NetworkSpec::new(data.input_dim(), width, depth, data.classes)?;
        let init = mlp::kaiming_uniform_init(spec, seed).into_flat();
        Ok(ClassificationObjective {
            spec,
            data,
            batch_size,
            init,
            rng: rng::seeded(seed, streams::BATCHES),
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }
}

impl Objective for ClassificationObjective {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn initial_point(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn loss_grad(&mut self, _t: u64, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let n = self.data.len();
        let batch = if self.batch_size >= n {
            self.data.full_batch()
        } else {
            let idx = index::sample(&mut self.rng, n, self.batch_size).into_vec();
            self.data.batch(&idx)
        };
        let params = NetworkParams::from_flat(self.spec, theta.to_vec())?;
        let (loss, cache) = mlp::forward(&params, &batch)?;
        mlp::backward_into(&params, &batch, &cache, grad)?;
        Ok(loss)
    }
}
