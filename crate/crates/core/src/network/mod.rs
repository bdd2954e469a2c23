//! The dense autoencoder: layers, forward evaluation and initialization.
//!
//! The standard architecture maps `784 -> 128 -> 64 -> 32 -> d` with ReLU on
//! the first three encoder layers and no activation on the latent layer, and
//! `d -> 32 -> 64 -> 128 -> 784` with ReLU and a final tanh. [`Autoencoder`]
//! also accepts other layer stacks so that small test variants can be built
//! with the same code paths.

mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

pub use checkpoint::{load_checkpoint, load_checkpoint_for_dim, save_checkpoint, CHECKPOINT_VERSION};

/// Encoder layer inputs and decoder layer outputs; the parts that do not depend on `d`.
pub const ENCODER_DIMS: [usize; 4] = [784, 128, 64, 32];
pub const DECODER_DIMS: [usize; 4] = [32, 64, 128, 784];

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("{context}: expected length {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("latent dimension {0} outside 2..=784")]
    LatentDim(usize),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: corrupt checkpoint: {detail}")]
    Corrupt { path: std::path::PathBuf, detail: String },
    #[error("{path}: checkpoint format version {found}, expected {expected}")]
    Version {
        path: std::path::PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: checkpoint has latent dimension {found}, expected {expected}")]
    LatentMismatch {
        path: std::path::PathBuf,
        found: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Activation::Relu => t.max(0.0),
            Activation::Tanh => t.tanh(),
            Activation::Identity => t,
        }
    }

    /// Derivative as a function of the pre-activation. ReLU uses the
    /// Heaviside step with `H(0) = 1`.
    #[inline]
    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Activation::Relu => {
                if t >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let th = t.tanh();
                1.0 - th * th
            }
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// `x -> act(W x + b)` with `W` of shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self, NetworkError> {
        if bias.len() != weights.rows() {
            return Err(NetworkError::DimMismatch {
                context: "layer bias",
                expected: weights.rows(),
                got: bias.len(),
            });
        }
        if !weights.all_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(NetworkError::Architecture("non-finite layer parameters".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    /// `W x + b`.
    pub fn preactivation(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim());
        (0..self.out_dim())
            .map(|r| {
                let row = self.weights.row(r);
                self.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

/// Provenance recorded in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub epochs: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    encoder: Vec<DenseLayer>,
    decoder: Vec<DenseLayer>,
    pub meta: ModelMeta,
}

/// Cached quantities from one forward pass: the pre-activation of every
/// layer, the latent code `z` and the reconstruction `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub encoder_pre: Vec<Vec<f64>>,
    pub decoder_pre: Vec<Vec<f64>>,
    pub latent: Vec<f64>,
    pub reconstruction: Vec<f64>,
}

impl ForwardTrace {
    pub fn layer_count(&self) -> usize {
        self.encoder_pre.len() + self.decoder_pre.len()
    }
}

fn run_stack(layers: &[DenseLayer], x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut pre = Vec::with_capacity(layers.len());
    let mut h = x.to_vec();
    for layer in layers {
        let p = layer.preactivation(&h);
        h = p.iter().map(|&t| layer.activation.apply(t)).collect();
        pre.push(p);
    }
    (pre, h)
}

impl Autoencoder {
    /// Validates that layer dimensions chain and that the decoder returns to
    /// the input dimension.
    pub fn new(encoder: Vec<DenseLayer>, decoder: Vec<DenseLayer>) -> Result<Self, NetworkError> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(NetworkError::Architecture(
                "encoder and decoder need at least one layer".into(),
            ));
        }
        let chain = encoder.iter().chain(decoder.iter()).collect::<Vec<_>>();
        for pair in chain.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NetworkError::Architecture(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        let input = encoder[0].in_dim();
        let output = decoder.last().unwrap().out_dim();
        if input != output {
            return Err(NetworkError::Architecture(format!(
                "decoder output {output} differs from encoder input {input}"
            )));
        }
        Ok(Self {
            encoder,
            decoder,
            meta: ModelMeta::default(),
        })
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[DenseLayer] {
        &self.decoder
    }

    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().unwrap().out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(DenseLayer::param_count).sum()
    }

    /// True for the `784-128-64-32-d` / `d-32-64-128-784` stack with the
    /// standard activations.
    pub fn is_standard(&self) -> bool {
        let acts = |layers: &[DenseLayer]| layers.iter().map(|l| l.activation).collect::<Vec<_>>();
        use Activation::*;
        self.encoder.len() == 4
            && self.decoder.len() == 4
            && self.encoder.iter().map(|l| l.in_dim()).eq(ENCODER_DIMS)
            && self.decoder.iter().map(|l| l.out_dim()).eq(DECODER_DIMS)
            && acts(&self.encoder) == [Relu, Relu, Relu, Identity]
            && acts(&self.decoder) == [Relu, Relu, Relu, Tanh]
    }

    fn check_input(&self, x: &[f64], context: &'static str, expected: usize) -> Result<(), NetworkError> {
        if x.len() != expected {
            return Err(NetworkError::DimMismatch {
                context,
                expected,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace, NetworkError> {
        self.check_input(x, "forward input", self.input_dim())?;
        let (encoder_pre, latent) = run_stack(&self.encoder, x);
        let (decoder_pre, reconstruction) = run_stack(&self.decoder, &latent);
        Ok(ForwardTrace {
            encoder_pre,
            decoder_pre,
            latent,
            reconstruction,
        })
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(x, "encode input", self.input_dim())?;
        Ok(run_stack(&self.encoder, x).1)
    }

    /// Encoder pre-activations and latent code at `x`.
    pub fn encode_trace(&self, x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>), NetworkError> {
        self.check_input(x, "encode input", self.input_dim())?;
        Ok(run_stack(&self.encoder, x))
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(z, "decode input", self.latent_dim())?;
        Ok(run_stack(&self.decoder, z).1)
    }

    /// Decoder pre-activations and reconstruction at `z`.
    pub fn decode_trace(&self, z: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>), NetworkError> {
        self.check_input(z, "decode input", self.latent_dim())?;
        Ok(run_stack(&self.decoder, z))
    }
}

fn uniform_layer(rng: &mut ChaCha8Rng, out_dim: usize, in_dim: usize, act: Activation) -> DenseLayer {
    let bound = 1.0 / (in_dim as f64).sqrt();
    let weights = Matrix::from_fn(out_dim, in_dim, |_, _| rng.gen_range(-bound..bound));
    DenseLayer {
        weights,
        bias: vec![0.0; out_dim],
        activation: act,
    }
}

/// Builds the standard architecture with latent dimension `d`. Weights are
/// drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` in layer order from a
/// ChaCha8 stream seeded with `seed`; biases start at zero.
pub fn init_autoencoder(d: usize, seed: u64) -> Result<Autoencoder, NetworkError> {
    if !(2..=784).contains(&d) {
        return Err(NetworkError::LatentDim(d));
    }
    init_with_dims(&[784, 128, 64, 32, d], seed, Activation::Relu, Activation::Tanh)
}

/// Mirrored encoder/decoder over `dims = [input, hidden.., latent]` with
/// `hidden` activations on inner layers, identity on the latent layer and
/// `output` on the last decoder layer.
pub fn init_with_dims(
    dims: &[usize],
    seed: u64,
    hidden: Activation,
    output: Activation,
) -> Result<Autoencoder, NetworkError> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(NetworkError::Architecture(format!("bad layer dims {dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.len() - 1;
    let encoder = (0..n)
        .map(|i| {
            let act = if i + 1 == n { Activation::Identity } else { hidden };
            uniform_layer(&mut rng, dims[i + 1], dims[i], act)
        })
        .collect();
    let decoder = (0..n)
        .map(|i| {
            let (from, to) = (dims[n - i], dims[n - i - 1]);
            let act = if i + 1 == n { output } else { hidden };
            uniform_layer(&mut rng, to, from, act)
        })
        .collect();
    let mut model = Autoencoder::new(encoder, decoder)?;
    model.meta.seed = seed;
    Ok(model)
}
