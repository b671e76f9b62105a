//! Fully-connected ReLU network with softmax cross-entropy and hand-written
//! backpropagation. Parameters live in one flat vector so they can be handed
//! straight to an optimizer.

use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// `input_dim -> depth x width (ReLU) -> output_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub width: usize,
    pub depth: usize,
    pub output_dim: usize,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, width: usize, depth: usize, output_dim: usize) -> Result<Self> {
        let spec = NetworkSpec { input_dim, width, depth, output_dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.depth == 0 || self.output_dim == 0 {
            return Err(Error::config(format!("all network dimensions must be >= 1, got {self:?}")));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every affine layer, input first.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.depth + 1);
        dims.push((self.input_dim, self.width));
        dims.extend(std::iter::repeat_n((self.width, self.width), self.depth - 1));
        dims.push((self.width, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    fn offsets(&self) -> Vec<LayerOffsets> {
        let mut at = 0;
        self.layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let w = at..at + fan_in * fan_out;
                let b = w.end..w.end + fan_out;
                at = b.end;
                LayerOffsets { fan_in, fan_out, weights: w, bias: b }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct LayerOffsets {
    fan_in: usize,
    fan_out: usize,
    weights: Range<usize>,
    bias: Range<usize>,
}

/// One affine layer; `weights` is `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    spec: NetworkSpec,
    data: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(spec: NetworkSpec) -> Self {
        NetworkParams { spec, data: vec![0.0; spec.param_count()] }
    }

    pub fn from_flat(spec: NetworkSpec, data: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if data.len() != spec.param_count() {
            return Err(Error::invalid(format!(
                "flat parameter length {} does not match network size {}",
                data.len(),
                spec.param_count()
            )));
        }
        Ok(NetworkParams { spec, data })
    }

    pub fn from_layers(spec: NetworkSpec, layers: &[Layer]) -> Result<Self> {
        let dims = spec.layer_dims();
        if layers.len() != dims.len() {
            return Err(Error::invalid("layer count does not match network spec"));
        }
        let mut data = Vec::with_capacity(spec.param_count());
        for (layer, &(fan_in, fan_out)) in layers.iter().zip(&dims) {
            if layer.weights.dim() != (fan_out, fan_in) || layer.bias.len() != fan_out {
                return Err(Error::invalid("layer shape does not match network spec"));
            }
            data.extend(layer.weights.iter());
            data.extend(layer.bias.iter());
        }
        Ok(NetworkParams { spec, data })
    }

    pub fn to_layers(&self) -> Vec<Layer> {
        self.spec
            .offsets()
            .into_iter()
            .map(|o| Layer {
                weights: Array2::from_shape_vec((o.fan_out, o.fan_in), self.data[o.weights].to_vec())
                    .expect("offsets match spec"),
                bias: Array1::from(self.data[o.bias].to_vec()),
            })
            .collect()
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }
}

/// Weights uniform on `[-b, b]` with `b = sqrt(6 / fan_in)`; biases uniform on
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn kaiming_uniform_init(spec: NetworkSpec, seed: u64) -> NetworkParams {
    let mut rng = rng::seeded(seed, streams::INIT);
    let mut params = NetworkParams::zeros(spec);
    for o in spec.offsets() {
        let fan_in = o.fan_in as f64;
        let wb = (6.0 / fan_in).sqrt();
        let bb = 1.0 / fan_in.sqrt();
        for w in &mut params.data[o.weights] {
            *w = rng.random_range(-wb..=wb);
        }
        for b in &mut params.data[o.bias] {
            *b = rng.random_range(-bb..=bb);
        }
    }
    params
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} input rows but {} labels",
                inputs.nrows(),
                labels.len()
            )));
        }
        Ok(Batch { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Activations kept by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to every affine layer (the batch itself, then post-ReLU values).
    activations: Vec<Array2<f64>>,
    probs: Array2<f64>,
}

impl ForwardCache {
    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }
}

fn weights_view<'a>(data: &'a [f64], o: &LayerOffsets) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((o.fan_out, o.fan_in), &data[o.weights.clone()]).expect("offsets match spec")
}

fn check_batch(spec: &NetworkSpec, batch: &Batch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if batch.inputs.nrows() != batch.labels.len() {
        return Err(Error::invalid("input rows and labels differ in length"));
    }
    if batch.inputs.ncols() != spec.input_dim {
        return Err(Error::invalid(format!(
            "batch has {} features, network expects {}",
            batch.inputs.ncols(),
            spec.input_dim
        )));
    }
    if let Some(l) = batch.labels.iter().find(|&&l| l >= spec.output_dim) {
        return Err(Error::invalid(format!("label {l} outside 0..{}", spec.output_dim)));
    }
    Ok(())
}

/// Mean softmax cross-entropy of the batch.
pub fn forward(params: &NetworkParams, batch: &Batch) -> Result<(f64, ForwardCache)> {
    let spec = &params.spec;
    check_batch(spec, batch)?;
    let offsets = spec.offsets();
    let last = offsets.len() - 1;
    let mut activations = Vec::with_capacity(offsets.len());
    let mut a = batch.inputs.clone();
    for (l, o) in offsets.iter().enumerate() {
        let w = weights_view(&params.data, o);
        let bias = ArrayView2::from_shape((1, o.fan_out), &params.data[o.bias.clone()]).expect("bias shape");
        let mut z = Array2::from_shape_fn((a.nrows(), o.fan_out), |(_, j)| bias[[0, j]]);
        general_mat_mul(1.0, &a, &w.t(), 1.0, &mut z);
        if l < last {
            z.mapv_inplace(|v| v.max(0.0));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteForward { layer: l });
        }
        activations.push(a);
        a = z;
    }
    // log-sum-exp stabilized softmax
    let mut logits = a;
    let mut loss = 0.0;
    for (mut row, &label) in logits.rows_mut().into_iter().zip(&batch.labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[label];
        row.mapv_inplace(|v| (v - lse).exp());
    }
    let loss = loss / batch.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteForward { layer: last });
    }
    Ok((loss, ForwardCache { activations, probs: logits }))
}

/// Gradient of the mean loss with respect to the flattened parameters.
pub fn backward(params: &NetworkParams, batch: &Batch, cache: &ForwardCache) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; params.data.len()];
    backward_into(params, batch, cache, &mut grad)?;
    Ok(grad)
}

pub fn backward_into(params: &NetworkParams, batch: &Batch, cache: &ForwardCache, grad: &mut [f64]) -> Result<()> {
    let spec = &params.spec;
    let offsets = spec.offsets();
    let n = batch.len();
    let consistent = cache.activations.len() == offsets.len()
        && cache.probs.dim() == (n, spec.output_dim)
        && cache.activations[0].dim() == batch.inputs.dim()
        && cache.activations.iter().zip(&offsets).all(|(a, o)| a.dim() == (n, o.fan_in));
    if !consistent {
        return Err(Error::invalid("forward cache does not match this network and batch"));
    }
    if grad.len() != params.data.len() {
        return Err(Error::invalid("gradient buffer has wrong length"));
    }
    let mut delta = cache.probs.clone();
    for (mut row, &label) in delta.rows_mut().into_iter().zip(&batch.labels) {
        row[label] -= 1.0;
    }
    delta /= n as f64;
    for (l, o) in offsets.iter().enumerate().rev() {
        let a = &cache.activations[l];
        {
            let mut gw = ArrayViewMut2::from_shape((o.fan_out, o.fan_in), &mut grad[o.weights.clone()])
                .expect("offsets match spec");
            general_mat_mul(1.0, &delta.t(), a, 0.0, &mut gw);
        }
        for (gb, col) in grad[o.bias.clone()].iter_mut().zip(delta.axis_iter(Axis(1))) {
            *gb = col.sum();
        }
        if l > 0 {
            let w = weights_view(&params.data, o);
            let mut prev = delta.dot(&w);
            // ReLU mask: the layer input is the post-activation of layer l-1
            prev.zip_mut_with(a, |d, &act| {
                if act <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = prev;
        }
    }
    Ok(())
}

/// Index of the largest logit per row.
pub fn predict(params: &NetworkParams, inputs: &Array2<f64>) -> Result<Vec<usize>> {
    let labels = vec![0; inputs.nrows()];
    let (_, cache) = forward(params, &Batch { inputs: inputs.clone(), labels })?;
    Ok(cache
        .probs
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
                .0
        })
        .collect())
}

pub fn accuracy(params: &NetworkParams, batch: &Batch) -> Result<f64> {
    let pred = predict(params, &batch.inputs)?;
    let hits = pred.iter().zip(&batch.labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> NetworkSpec {
        NetworkSpec::new(2, 3, 1, 2).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = kaiming_uniform_init(tiny(), 5);
        assert_eq!(a, kaiming_uniform_init(tiny(), 5));
        assert_ne!(a, kaiming_uniform_init(tiny(), 6));

        let spec = NetworkSpec::new(784, 16, 1, 10).unwrap();
        let p = kaiming_uniform_init(spec, 1);
        let b = (6.0f64 / 784.0).sqrt();
        let first = &p.to_layers()[0];
        assert!(first.weights.iter().all(|w| w.abs() <= b));
        assert!(first.bias.iter().all(|x| x.abs() <= 1.0 / 28.0));
    }

    #[test]
    fn init_variance_matches_uniform_moments() {
        // fan_in 100, fan_out 10_000: 10^6 weights in the first layer
        let spec = NetworkSpec::new(100, 10_000, 1, 1).unwrap();
        let p = kaiming_uniform_init(spec, 3);
        let w = &p.to_layers()[0].weights;
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let b2 = 6.0 / 100.0;
        assert!((var / (b2 / 3.0) - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn flatten_round_trip() {
        let spec = NetworkSpec::new(3, 4, 3, 2).unwrap();
        let p = kaiming_uniform_init(spec, 9);
        let layers = p.to_layers();
        assert_eq!(layers.len(), 4);
        assert_eq!(NetworkParams::from_layers(spec, &layers).unwrap(), p);
        assert_eq!(p.flat().len(), 3 * 4 + 4 + 2 * (4 * 4 + 4) + 4 * 2 + 2);
        assert!(NetworkParams::from_flat(spec, vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_network_loss_is_log_classes() {
        let spec = NetworkSpec::new(4, 5, 2, 7).unwrap();
        let batch = Batch::new(Array2::from_elem((3, 4), 0.7), vec![0, 3, 6]).unwrap();
        let (loss, _) = forward(&NetworkParams::zeros(spec), &batch).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-15);

        let spec = NetworkSpec::new(1, 1, 1, 2).unwrap();
        let batch = Batch::new(array![[1.0]], vec![0]).unwrap();
        let (loss, _) = forward(&NetworkParams::zeros(spec), &batch).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_input_gives_zero_input_weight_gradient() {
        let spec = NetworkSpec::new(3, 4, 2, 3).unwrap();
        let p = kaiming_uniform_init(spec, 2);
        let batch = Batch::new(Array2::zeros((5, 3)), vec![0, 1, 2, 0, 1]).unwrap();
        let (_, cache) = forward(&p, &batch).unwrap();
        let g = backward(&p, &batch, &cache).unwrap();
        assert!(g[..12].iter().all(|&x| x == 0.0));
        // the output bias always receives softmax minus one-hot
        let out_bias = &g[g.len() - 3..];
        assert!(out_bias.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn duplicated_batch_gives_same_gradient() {
        let spec = NetworkSpec::new(3, 4, 2, 3).unwrap();
        let p = kaiming_uniform_init(spec, 8);
        let x = array![[0.1, -0.5, 2.0], [1.0, 0.3, -0.2]];
        let b1 = Batch::new(x.clone(), vec![2, 0]).unwrap();
        let b2 = Batch::new(ndarray::concatenate![Axis(0), x, x], vec![2, 0, 2, 0]).unwrap();
        let g1 = backward(&p, &b1, &forward(&p, &b1).unwrap().1).unwrap();
        let g2 = backward(&p, &b2, &forward(&p, &b2).unwrap().1).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn mismatched_cache_rejected() {
        let p = kaiming_uniform_init(tiny(), 1);
        let b1 = Batch::new(array![[1.0, 2.0]], vec![0]).unwrap();
        let b2 = Batch::new(array![[1.0, 2.0], [0.0, 1.0]], vec![0, 1]).unwrap();
        let (_, cache) = forward(&p, &b1).unwrap();
        assert!(matches!(backward(&p, &b2, &cache), Err(Error::InvalidArgument(_))));
        let other = kaiming_uniform_init(NetworkSpec::new(2, 3, 2, 2).unwrap(), 1);
        assert!(backward(&other, &b1, &cache).is_err());
    }

    #[test]
    fn bad_batches_rejected() {
        let p = kaiming_uniform_init(tiny(), 1);
        assert!(forward(&p, &Batch { inputs: array![[1.0, 2.0]], labels: vec![2] }).is_err());
        assert!(forward(&p, &Batch { inputs: array![[1.0]], labels: vec![0] }).is_err());
        assert!(Batch::new(array![[1.0, 2.0]], vec![0, 1]).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        let spec = NetworkSpec::new(1, 1, 1, 2).unwrap();
        let p = NetworkParams::from_flat(spec, vec![1e300, 0.0, 1e300, 1e300, 0.0, 0.0]).unwrap();
        let batch = Batch::new(array![[1e300]], vec![0]).unwrap();
        assert!(matches!(forward(&p, &batch), Err(Error::NonFiniteForward { .. })));
    }
}
