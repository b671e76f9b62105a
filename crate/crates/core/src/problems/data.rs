use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::Batch;
use crate::rng::{self, streams};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic { seed: u64, spread: f64 },
    MnistIdx { images: PathBuf, labels: PathBuf },
}

/// In-memory labelled dataset.
#[derive(Debug, Clone)]
pub struct DatasetHandle {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub source: DataSource,
    /// Raw feature values were divided by this.
    pub scale: f64,
}

impl DatasetHandle {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn full_batch(&self) -> Batch {
        Batch { inputs: self.inputs.clone(), labels: self.labels.clone() }
    }

    /// Keeps the first `limit` examples.
    pub fn truncate(&mut self, limit: usize) {
        if limit < self.len() {
            self.inputs = self.inputs.slice(ndarray::s![..limit, ..]).to_owned();
            self.labels.truncate(limit);
        }
    }
}

/// Gaussian class blobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub input_dim: usize,
    pub classes: usize,
    /// Per-coordinate noise around each centroid, in units of the centroid
    /// coordinate scale. `None` picks the spread at which two centroids sit
    /// six noise standard deviations apart.
    #[serde(default)]
    pub spread: Option<f64>,
}

impl SynthSpec {
    pub fn default_spread(input_dim: usize) -> f64 {
        (2.0 * input_dim as f64).sqrt() / 6.0
    }

    pub fn generate(&self, seed: u64) -> Result<DatasetHandle> {
        let &SynthSpec { n, input_dim, classes, spread } = self;
        if classes == 0 || input_dim == 0 {
            return Err(Error::config("synthetic data needs classes >= 1 and input_dim >= 1"));
        }
        if n < classes {
            return Err(Error::config(format!("need n >= classes, got n = {n}, classes = {classes}")));
        }
        let spread = spread.unwrap_or_else(|| SynthSpec::default_spread(input_dim));
        if !(spread >= 0.0 && spread.is_finite()) {
            return Err(Error::config(format!("spread must be >= 0, got {spread}")));
        }
        let mut rng = rng::seeded(seed, streams::DATA);
        let centroids: Vec<f64> =
            (0..classes * input_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        labels.shuffle(&mut rng);
        // unit per-coordinate variance overall
        let norm = (1.0 + spread * spread).sqrt();
        let mut inputs = Array2::zeros((n, input_dim));
        for (mut row, &label) in inputs.rows_mut().into_iter().zip(&labels) {
            let c = &centroids[label * input_dim..(label + 1) * input_dim];
            for (x, &cj) in row.iter_mut().zip(c) {
                let z: f64 = rng.sample(StandardNormal);
                *x = (cj + spread * z) / norm;
            }
        }
        Ok(DatasetHandle {
            inputs,
            labels,
            classes,
            source: DataSource::Synthetic { seed, spread },
            scale: 1.0,
        })
    }
}

pub fn synth_classification(n: usize, input_dim: usize, classes: usize, seed: u64) -> Result<DatasetHandle> {
    SynthSpec { n, input_dim, classes, spread: None }.generate(seed)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn format_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), offset, message: message.into() }
}

fn read_header(path: &Path, bytes: &[u8], fields: usize, magic: u32) -> Result<Vec<u32>> {
    let mut cur = Cursor::new(bytes);
    let mut out = Vec::with_capacity(fields);
    for i in 0..fields {
        let offset = cur.position();
        let v = cur.read_u32::<BigEndian>().map_err(|_| {
            format_err(path, offset, format!("truncated header: need {} bytes, file has {}", 4 * fields, bytes.len()))
        })?;
        if i == 0 && v != magic {
            return Err(format_err(path, 0, format!("bad magic 0x{v:08x}, expected 0x{magic:08x}")));
        }
        out.push(v);
    }
    Ok(out)
}

/// Reads an IDX image/label file pair. Pixels are scaled to `[0, 1]`; at most
/// `limit` examples are kept.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<DatasetHandle> {
    let img = read_file(images_path)?;
    let lab = read_file(labels_path)?;
    let ih = read_header(images_path, &img, 4, IDX_IMAGES_MAGIC)?;
    let lh = read_header(labels_path, &lab, 2, IDX_LABELS_MAGIC)?;
    let (count, rows, cols) = (ih[1] as usize, ih[2] as usize, ih[3] as usize);
    if lh[1] as usize != count {
        return Err(format_err(
            labels_path,
            4,
            format!("label count {} does not match image count {count}", lh[1]),
        ));
    }
    let dim = rows * cols;
    let pixels = &img[16..];
    let expected = count * dim;
    if pixels.len() < expected {
        return Err(format_err(
            images_path,
            16 + pixels.len() as u64,
            format!("truncated image payload: expected {expected} bytes, found {}", pixels.len()),
        ));
    }
    let label_bytes = &lab[8..];
    if label_bytes.len() < count {
        return Err(format_err(
            labels_path,
            8 + label_bytes.len() as u64,
            format!("truncated label payload: expected {count} bytes, found {}", label_bytes.len()),
        ));
    }
    let keep = limit.map_or(count, |l| l.min(count));
    let mut labels = Vec::with_capacity(keep);
    for (i, &b) in label_bytes[..keep].iter().enumerate() {
        if b > 9 {
            return Err(format_err(labels_path, 8 + i as u64, format!("label {b} outside 0..=9")));
        }
        labels.push(b as usize);
    }
    let inputs = Array2::from_shape_fn((keep, dim), |(i, j)| pixels[i * dim + j] as f64 / 255.0);
    Ok(DatasetHandle {
        inputs,
        labels,
        classes: 10,
        source: DataSource::MnistIdx { images: images_path.to_path_buf(), labels: labels_path.to_path_buf() },
        scale: 255.0,
    })
}

pub fn write_idx_images(path: &Path, rows: u32, cols: u32, pixels: &[u8]) -> Result<()> {
    let dim = (rows * cols) as usize;
    if dim == 0 || !pixels.len().is_multiple_of(dim) {
        return Err(Error::invalid("pixel buffer is not a whole number of images"));
    }
    let mut buf = Vec::with_capacity(16 + pixels.len());
    buf.write_u32::<BigEndian>(IDX_IMAGES_MAGIC).unwrap();
    buf.write_u32::<BigEndian>((pixels.len() / dim) as u32).unwrap();
    buf.write_u32::<BigEndian>(rows).unwrap();
    buf.write_u32::<BigEndian>(cols).unwrap();
    buf.write_all(pixels).unwrap();
    fs::write(path, buf).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + labels.len());
    buf.write_u32::<BigEndian>(IDX_LABELS_MAGIC).unwrap();
    buf.write_u32::<BigEndian>(labels.len() as u32).unwrap();
    buf.extend_from_slice(labels);
    fs::write(path, buf).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
