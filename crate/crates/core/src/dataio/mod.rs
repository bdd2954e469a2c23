//! Datasets: MNIST ingest from IDX files, the synthetic pixel-noise
//! distributions, and a binary cache format for both.

mod cache;
mod idx;
pub mod sampling;

use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cache::{load_dataset, save_dataset, DATASET_FORMAT_VERSION};
pub use idx::{load_mnist, load_mnist_dir, MnistSplit};

/// Flattened 28x28 image size.
pub const PIXELS: usize = 784;

/// Sample count of the full MNIST set (train + test).
pub const MNIST_TOTAL: usize = 70_000;

/// Sample count of the standard MNIST training split.
pub const MNIST_TRAIN: usize = 60_000;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: truncated file ({detail})")]
    Truncated { path: PathBuf, detail: String },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: unexpected image shape {rows}x{cols}, expected 28x28")]
    ImageShape { path: PathBuf, rows: usize, cols: usize },
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: unsupported dataset format version {found} (expected {expected})")]
    FormatVersion { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: malformed dataset file: {detail}")]
    Malformed { path: PathBuf, detail: String },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One input image: exactly 784 values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample(Vec<f64>);

impl Sample {
    pub fn new(pixels: Vec<f64>) -> Result<Self, DataError> {
        if pixels.len() != PIXELS {
            return Err(DataError::InvalidSample(format!(
                "expected {PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(DataError::InvalidSample(format!(
                "pixel {i} = {} outside [0, 1]",
                pixels[i]
            )));
        }
        Ok(Self(pixels))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// The distribution a dataset's pixels come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetKind {
    Mnist,
    Bernoulli { p: f64 },
    Beta { alpha: f64, beta: f64 },
    TruncatedNormal { mu: f64, sigma: f64 },
    Uniform,
}

impl DatasetKind {
    /// Expected pixel value. `None` for MNIST, whose mean is empirical.
    pub fn analytic_mean(&self) -> Option<f64> {
        match *self {
            DatasetKind::Mnist => None,
            DatasetKind::Bernoulli { p } => Some(p),
            DatasetKind::Beta { alpha, beta } => Some(alpha / (alpha + beta)),
            DatasetKind::TruncatedNormal { mu, sigma } => Some(truncated_normal_mean(mu, sigma, 0.0, 1.0)),
            DatasetKind::Uniform => Some(0.5),
        }
    }

    /// Expected pixel variance, where it has a simple closed form.
    pub fn analytic_variance(&self) -> Option<f64> {
        match *self {
            DatasetKind::Bernoulli { p } => Some(p * (1.0 - p)),
            DatasetKind::Beta { alpha, beta } => {
                let s = alpha + beta;
                Some(alpha * beta / (s * s * (s + 1.0)))
            }
            DatasetKind::Uniform => Some(1.0 / 12.0),
            DatasetKind::Mnist | DatasetKind::TruncatedNormal { .. } => None,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidSpec(msg));
        match *self {
            DatasetKind::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                bad(format!("bernoulli p = {p} must lie in [0, 1]"))
            }
            DatasetKind::Beta { alpha, .. } if !(alpha > 0.0 && alpha.is_finite()) => {
                bad(format!("beta alpha = {alpha} must be positive"))
            }
            DatasetKind::Beta { beta, .. } if !(beta > 0.0 && beta.is_finite()) => {
                bad(format!("beta beta = {beta} must be positive"))
            }
            DatasetKind::TruncatedNormal { sigma, .. } if !(sigma > 0.0 && sigma.is_finite()) => {
                bad(format!("truncated normal sigma = {sigma} must be positive"))
            }
            DatasetKind::TruncatedNormal { mu, .. } if !(mu > 0.0 && mu < 1.0) => {
                bad(format!("truncated normal mu = {mu} must lie in (0, 1)"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DatasetKind::Mnist => write!(f, "mnist"),
            DatasetKind::Bernoulli { p } => write!(f, "bernoulli_{p}"),
            DatasetKind::Beta { alpha, beta } => write!(f, "beta_{alpha}_{beta}"),
            DatasetKind::TruncatedNormal { mu, sigma } => write!(f, "truncnorm_{mu}_{sigma}"),
            DatasetKind::Uniform => write!(f, "uniform"),
        }
    }
}

/// Mean of `N(mu, sigma^2)` truncated to `[lo, hi]`.
fn truncated_normal_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let cdf = |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
    mu + sigma * (phi(a) - phi(b)) / (cdf(b) - cdf(a))
}

/// Abramowitz-Stegun 7.1.26; absolute error below 1.5e-7.
fn erf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let poly =
        t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let y = 1.0 - poly * (-x * x).exp();
    y.copysign(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub kind: DatasetKind,
    pub count: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, count: usize, seed: u64) -> Self {
        Self { kind, count, seed }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.count == 0 {
            return Err(DataError::InvalidSpec("count must be at least 1".into()));
        }
        self.kind.validate()
    }

    /// Stable identifier used in file names and result rows.
    pub fn id(&self) -> String {
        self.kind.to_string()
    }
}

/// The ten synthetic evaluation distributions, in a fixed order: five
/// Bernoulli, three Beta, the truncated normal and the uniform.
pub fn ood_kinds() -> Vec<DatasetKind> {
    vec![
        DatasetKind::Bernoulli { p: 0.13 },
        DatasetKind::Bernoulli { p: 0.25 },
        DatasetKind::Bernoulli { p: 0.5 },
        DatasetKind::Bernoulli { p: 0.75 },
        DatasetKind::Bernoulli { p: 0.87 },
        DatasetKind::Beta { alpha: 0.8, beta: 5.0 },
        DatasetKind::Beta { alpha: 0.5, beta: 0.5 },
        DatasetKind::Beta { alpha: 5.0, beta: 0.8 },
        DatasetKind::TruncatedNormal { mu: 0.5, sigma: 1.0 },
        DatasetKind::Uniform,
    ]
}

/// Specs for the ten synthetic datasets. Each gets its own seed derived from
/// `base_seed` and its position.
pub fn ood_specs(count: usize, base_seed: u64) -> Vec<DatasetSpec> {
    ood_kinds()
        .into_iter()
        .enumerate()
        .map(|(i, kind)| DatasetSpec::new(kind, count, base_seed * 100 + i as u64 + 1))
        .collect()
}

/// Flat row-major pixel storage plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pixels: Vec<f64>,
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn from_pixels(spec: DatasetSpec, pixels: Vec<f64>, labels: Option<Vec<u8>>) -> Result<Self, DataError> {
        if pixels.len() != spec.count * PIXELS {
            return Err(DataError::InvalidSpec(format!(
                "pixel buffer holds {} values, expected {} x {PIXELS}",
                pixels.len(),
                spec.count
            )));
        }
        if let Some(l) = &labels {
            if l.len() != spec.count {
                return Err(DataError::CountMismatch {
                    images: spec.count,
                    labels: l.len(),
                });
            }
        }
        Ok(Self { spec, pixels, labels })
    }

    pub fn len(&self) -> usize {
        self.spec.count
    }

    pub fn is_empty(&self) -> bool {
        self.spec.count == 0
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.pixels[i * PIXELS..(i + 1) * PIXELS]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.pixels.chunks_exact(PIXELS)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn mean_pixel(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// A new dataset holding the given samples, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut pixels = Vec::with_capacity(indices.len() * PIXELS);
        for &i in indices {
            pixels.extend_from_slice(self.sample(i));
        }
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Dataset {
            spec: DatasetSpec {
                count: indices.len(),
                ..self.spec
            },
            pixels,
            labels,
        }
    }

    /// The first `n` samples.
    pub fn prefix(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        self.select(&(0..n).collect::<Vec<_>>())
    }
}

/// Draws `spec.count` images, pixel by pixel, from one sequential ChaCha8
/// stream seeded with `spec.seed`.
pub fn sample_dataset(spec: &DatasetSpec) -> Result<Dataset, DataError> {
    sample_dataset_prefix(spec, spec.count)
}

/// The first `n` images of [`sample_dataset`]`(spec)` without generating the
/// rest. Because the stream is sequential the result is bit-identical to a
/// prefix of the full dataset.
pub fn sample_dataset_prefix(spec: &DatasetSpec, n: usize) -> Result<Dataset, DataError> {
    spec.validate()?;
    if spec.kind == DatasetKind::Mnist {
        return Err(DataError::InvalidSpec(
            "mnist datasets are loaded from IDX files, not sampled".into(),
        ));
    }
    let n = n.min(spec.count);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pixels: Vec<f64> = (0..n * PIXELS)
        .map(|_| sampling::draw_pixel(&spec.kind, &mut rng))
        .collect();
    Dataset::from_pixels(DatasetSpec { count: n, ..*spec }, pixels, None)
}
