//! Reconstruction training: batched backpropagation and the optimizer loop.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::linalg::{gemm, Matrix, Operand};
use crate::network::{Autoencoder, NetworkError};

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("{context}: expected length {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 128,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::InvalidConfig(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        // Zero is allowed so that a run can be checked to leave parameters alone.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and nonnegative");
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return bad("adam needs 0 <= beta < 1 and eps > 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    /// Mean per-sample loss over each epoch, measured before each batch update.
    pub epoch_losses: Vec<f64>,
    /// Per-sample losses of the final model on the training set.
    pub final_sample_losses: Vec<f64>,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn write_loss_csv(&self, path: &Path) -> Result<(), TrainingError> {
        let mut s = String::from("epoch,mean_loss\n");
        for (i, l) in self.epoch_losses.iter().enumerate() {
            s.push_str(&format!("{},{l:e}\n", i + 1));
        }
        std::fs::write(path, s).map_err(|source| TrainingError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// `(1/n) * sum (y_i - x_i)^2`.
pub fn mse_loss(y: &[f64], x: &[f64]) -> Result<f64, TrainingError> {
    if y.len() != x.len() {
        return Err(TrainingError::DimMismatch {
            context: "mse_loss",
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    Ok(y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every layer, encoder first, in the order of
/// [`Autoencoder::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

struct BatchPass {
    sample_losses: Vec<f64>,
    grads: Option<Gradients>,
}

/// Forward pass over `b` row-major samples and, if asked, reverse-mode
/// gradients of the batch loss (mean over pixels and samples).
fn batch_pass(model: &Autoencoder, xs: &[f64], b: usize, want_grads: bool) -> BatchPass {
    let layers: Vec<_> = model.layers().collect();
    let n = model.input_dim();
    debug_assert_eq!(xs.len(), b * n);

    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    let mut pres: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    let mut h = xs.to_vec();
    for layer in &layers {
        let (out, inp) = layer.weights.shape();
        let mut p = vec![0.0; b * out];
        gemm(
            1.0,
            Operand::row_major(&h, b, inp),
            Operand::transposed(&layer.weights),
            0.0,
            &mut p,
            (b, out),
        );
        for row in p.chunks_exact_mut(out) {
            for (v, bias) in row.iter_mut().zip(&layer.bias) {
                *v += bias;
            }
        }
        let next = p.iter().map(|&t| layer.activation.apply(t)).collect();
        inputs.push(std::mem::replace(&mut h, next));
        pres.push(p);
    }
    let y = h;

    let sample_losses = y
        .chunks_exact(n)
        .zip(xs.chunks_exact(n))
        .map(|(yr, xr)| yr.iter().zip(xr).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / n as f64)
        .collect();
    if !want_grads {
        return BatchPass {
            sample_losses,
            grads: None,
        };
    }

    let scale = 2.0 / (n * b) as f64;
    let mut dh: Vec<f64> = y.iter().zip(xs).map(|(a, c)| scale * (a - c)).collect();
    let mut grads = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate().rev() {
        let (out, inp) = layer.weights.shape();
        let dp: Vec<f64> = dh
            .iter()
            .zip(&pres[l])
            .map(|(g, &t)| g * layer.activation.derivative(t))
            .collect();
        let mut dw = Matrix::zeros(out, inp);
        gemm(
            1.0,
            Operand::row_major(&dp, b, out).t(),
            Operand::row_major(&inputs[l], b, inp),
            0.0,
            dw.as_mut_slice(),
            (out, inp),
        );
        let mut db = vec![0.0; out];
        for row in dp.chunks_exact(out) {
            for (acc, v) in db.iter_mut().zip(row) {
                *acc += v;
            }
        }
        if l > 0 {
            let mut prev = vec![0.0; b * inp];
            gemm(
                1.0,
                Operand::row_major(&dp, b, out),
                Operand::plain(&layer.weights),
                0.0,
                &mut prev,
                (b, inp),
            );
            dh = prev;
        }
        grads.push(LayerGrad { weights: dw, bias: db });
    }
    grads.reverse();
    BatchPass {
        sample_losses,
        grads: Some(Gradients { layers: grads }),
    }
}

/// Loss and parameter gradients for a single sample.
pub fn backprop(model: &Autoencoder, x: &[f64]) -> Result<(f64, Gradients), TrainingError> {
    if x.len() != model.input_dim() {
        return Err(TrainingError::DimMismatch {
            context: "backprop input",
            expected: model.input_dim(),
            got: x.len(),
        });
    }
    let pass = batch_pass(model, x, 1, true);
    Ok((pass.sample_losses[0], pass.grads.unwrap()))
}

/// Per-sample losses for row-major samples, evaluated in chunks.
pub fn sample_losses(model: &Autoencoder, rows: &[f64]) -> Result<Vec<f64>, TrainingError> {
    let n = model.input_dim();
    if rows.len() % n != 0 {
        return Err(TrainingError::DimMismatch {
            context: "sample rows",
            expected: n,
            got: rows.len() % n,
        });
    }
    const CHUNK: usize = 256;
    let mut out = Vec::with_capacity(rows.len() / n);
    for chunk in rows.chunks(CHUNK * n) {
        out.extend(batch_pass(model, chunk, chunk.len() / n, false).sample_losses);
    }
    Ok(out)
}

enum OptState {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: i32,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

impl OptState {
    fn new(opt: Optimizer, model: &Autoencoder) -> Self {
        match opt {
            Optimizer::Sgd => OptState::Sgd,
            Optimizer::Adam { beta1, beta2, eps } => {
                let zeros = || model.layers().map(|l| vec![0.0; l.param_count()]).collect();
                OptState::Adam {
                    beta1,
                    beta2,
                    eps,
                    step: 0,
                    m: zeros(),
                    v: zeros(),
                }
            }
        }
    }

    fn apply(&mut self, model: &mut Autoencoder, grads: &Gradients, lr: f64) {
        match self {
            OptState::Sgd => {
                for (layer, g) in model.layers_mut().zip(&grads.layers) {
                    let params = layer.weights.as_mut_slice().iter_mut().chain(layer.bias.iter_mut());
                    for (p, gv) in params.zip(g.weights.as_slice().iter().chain(&g.bias)) {
                        *p -= lr * gv;
                    }
                }
            }
            OptState::Adam {
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step);
                let c2 = 1.0 - beta2.powi(*step);
                for (((layer, g), ml), vl) in model
                    .layers_mut()
                    .zip(&grads.layers)
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                {
                    let params = layer.weights.as_mut_slice().iter_mut().chain(layer.bias.iter_mut());
                    let gs = g.weights.as_slice().iter().chain(&g.bias);
                    for (((p, &gv), mi), vi) in params.zip(gs).zip(ml.iter_mut()).zip(vl.iter_mut()) {
                        *mi = *beta1 * *mi + (1.0 - *beta1) * gv;
                        *vi = *beta2 * *vi + (1.0 - *beta2) * gv * gv;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *p -= lr * mhat / (vhat.sqrt() + *eps);
                    }
                }
            }
        }
    }
}

/// Trains on row-major samples of length `model.input_dim()`.
///
/// The shuffle order of every epoch is drawn from one ChaCha8 stream seeded
/// with `cfg.seed`, so a run is a deterministic function of the initial
/// model, the data and the config.
pub fn train_rows(model: &mut Autoencoder, rows: &[f64], cfg: &TrainConfig) -> Result<TrainReport, TrainingError> {
    cfg.validate()?;
    let n = model.input_dim();
    if rows.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    if rows.len() % n != 0 {
        return Err(TrainingError::DimMismatch {
            context: "training rows",
            expected: n,
            got: rows.len() % n,
        });
    }
    let count = rows.len() / n;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..count).collect();
    let mut opt = OptState::new(cfg.optimizer, model);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size * n);

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            batch.clear();
            for &i in idx {
                batch.extend_from_slice(&rows[i * n..(i + 1) * n]);
            }
            let pass = batch_pass(model, &batch, idx.len(), true);
            let batch_loss: f64 = pass.sample_losses.iter().sum();
            if !batch_loss.is_finite() {
                return Err(TrainingError::Diverged { epoch: epoch + 1 });
            }
            total += batch_loss;
            opt.apply(model, pass.grads.as_ref().unwrap(), cfg.learning_rate);
        }
        let mean = total / count as f64;
        log::info!("epoch {}/{}: mean loss {mean:.6e}", epoch + 1, cfg.epochs);
        epoch_losses.push(mean);
        model.meta.epochs += 1;
    }

    let final_sample_losses = sample_losses(model, rows)?;
    if final_sample_losses.iter().any(|l| !l.is_finite()) {
        return Err(TrainingError::Diverged { epoch: cfg.epochs });
    }
    Ok(TrainReport {
        config: cfg.clone(),
        epoch_losses,
        final_sample_losses,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn train(model: &mut Autoencoder, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport, TrainingError> {
    train_rows(model, data.pixels(), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl ErrorStats {
    pub fn from_losses(losses: &[f64]) -> Option<Self> {
        if losses.is_empty() {
            return None;
        }
        let mut sorted = losses.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        Some(Self {
            mean: losses.iter().sum::<f64>() / k as f64,
            median,
            max: sorted[k - 1],
        })
    }
}

/// Mean, median and max of the per-sample reconstruction loss.
pub fn reconstruction_error_stats(model: &Autoencoder, ds: &Dataset) -> Result<ErrorStats, TrainingError> {
    let losses = sample_losses(model, ds.pixels())?;
    ErrorStats::from_losses(&losses).ok_or(TrainingError::EmptyDataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{sample_dataset, DatasetKind, DatasetSpec};
    use crate::network::{init_autoencoder, init_with_dims, Activation, DenseLayer};
    use rand::Rng;

    fn tiny_model(seed: u64) -> Autoencoder {
        let mut m = init_with_dims(&[6, 4, 2], seed, Activation::Relu, Activation::Tanh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for layer in m.layers_mut() {
            for w in layer.weights.as_mut_slice() {
                *w = rng.gen_range(-1.0..1.0);
            }
            for b in &mut layer.bias {
                *b = rng.gen_range(-0.5..0.5);
            }
        }
        m
    }

    fn loss_of(model: &Autoencoder, x: &[f64]) -> f64 {
        mse_loss(&model.forward(x).unwrap().reconstruction, x).unwrap()
    }

    fn min_abs_pre(model: &Autoencoder, x: &[f64]) -> f64 {
        let t = model.forward(x).unwrap();
        t.encoder_pre
            .iter()
            .chain(&t.decoder_pre)
            .flatten()
            .fold(f64::INFINITY, |a, v| a.min(v.abs()))
    }

    /// Central differences over every parameter, in `layers()` order.
    fn fd_gradients(model: &Autoencoder, x: &[f64], h: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let total = model.layers().count();
        for l in 0..total {
            let count = model.layers().nth(l).unwrap().param_count();
            for k in 0..count {
                let bump = |delta: f64| {
                    let mut m = model.clone();
                    let layer = m.layers_mut().nth(l).unwrap();
                    let nw = layer.weights.as_slice().len();
                    if k < nw {
                        layer.weights.as_mut_slice()[k] += delta;
                    } else {
                        layer.bias[k - nw] += delta;
                    }
                    loss_of(&m, x)
                };
                out.push((bump(h) - bump(-h)) / (2.0 * h));
            }
        }
        out
    }

    fn flatten(g: &Gradients) -> Vec<f64> {
        g.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias).copied().collect::<Vec<_>>())
            .collect()
    }

    #[test]
    fn mse_examples() {
        let x = [0.1, 0.2, 0.3];
        assert_eq!(mse_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(mse_loss(&[1.0; 784], &[0.0; 784]).unwrap(), 1.0);
        assert!(mse_loss(&[1.0; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn mse_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..784).map(|_| rng.gen()).collect();
        let y: Vec<f64> = (0..784).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut acc = 0.0;
        for i in 0..784 {
            let d = y[i] - x[i];
            acc += d * d;
        }
        assert!((mse_loss(&y, &x).unwrap() - acc / 784.0).abs() < 1e-12);
    }

    #[test]
    fn zero_model_has_zero_gradients() {
        let mut m = init_autoencoder(4, 0).unwrap();
        for layer in m.layers_mut() {
            layer.weights.as_mut_slice().fill(0.0);
        }
        let (loss, g) = backprop(&m, &[0.0; 784]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(flatten(&g).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = tiny_model(1);
        let x: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
        assert!(min_abs_pre(&m, &x) > 1e-4);
        let (_, g) = backprop(&m, &x).unwrap();
        let analytic = flatten(&g);
        let fd = fd_gradients(&m, &x, 1e-5);
        assert_eq!(analytic.len(), fd.len());
        for (a, f) in analytic.iter().zip(&fd) {
            assert!((a - f).abs() < 1e-4, "{a} vs {f}");
        }
    }

    #[test]
    fn gradient_relative_error_over_random_pairs() {
        // A parameter step of 1e-5 moves pre-activations by about 1e-5, so
        // pairs with a pre-activation near a ReLU kink are redrawn.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut accepted = 0;
        let mut worst: f64 = 0.0;
        let mut seed = 100;
        while accepted < 100 {
            seed += 1;
            let m = tiny_model(seed);
            let x: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
            if min_abs_pre(&m, &x) < 1e-3 {
                continue;
            }
            accepted += 1;
            let analytic = flatten(&backprop(&m, &x).unwrap().1);
            let fd = fd_gradients(&m, &x, 1e-5);
            for (a, f) in analytic.iter().zip(&fd) {
                let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-3, "worst relative error {worst}");
    }

    #[test]
    fn output_bias_gradient_by_hand() {
        // Encoder copies the input; decoder is a single tanh layer.
        let n = 5;
        let enc = DenseLayer::new(Matrix::identity(n), vec![0.0; n], Activation::Identity).unwrap();
        let w = Matrix::from_fn(n, n, |i, j| 0.1 * (i as f64) - 0.05 * (j as f64));
        let b = vec![0.2, -0.1, 0.0, 0.3, -0.4];
        let dec = DenseLayer::new(w.clone(), b.clone(), Activation::Tanh).unwrap();
        let m = Autoencoder::new(vec![enc], vec![dec]).unwrap();
        let x = [0.9, 0.1, 0.5, 0.0, 0.7];
        let y: Vec<f64> = (0..n)
            .map(|i| (b[i] + (0..n).map(|j| w[(i, j)] * x[j]).sum::<f64>()).tanh())
            .collect();
        let (_, g) = backprop(&m, &x).unwrap();
        for i in 0..n {
            let want = 2.0 / n as f64 * (y[i] - x[i]) * (1.0 - y[i] * y[i]);
            assert!((g.layers[1].bias[i] - want).abs() < 1e-14);
        }
    }

    fn uniform_rows(count: usize, seed: u64) -> Dataset {
        sample_dataset(&DatasetSpec::new(DatasetKind::Uniform, count, seed)).unwrap()
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let ds = uniform_rows(40, 1);
        let m0 = init_autoencoder(4, 0).unwrap();
        let mut m = m0.clone();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let r = train(&mut m, &ds, &cfg).unwrap();
        assert!(m0
            .layers()
            .zip(m.layers())
            .all(|(a, b)| a.weights == b.weights && a.bias == b.bias));
        assert!(r.epoch_losses.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-15));
        assert_eq!(m.meta.epochs, 3);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let ds = uniform_rows(60, 2);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = init_autoencoder(4, 7).unwrap();
            let r = train(&mut m, &ds, &cfg).unwrap();
            (m, r.epoch_losses)
        };
        let (a, la) = run();
        let (b, lb) = run();
        assert_eq!(
            la.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            lb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        for (x, y) in a.layers().zip(b.layers()) {
            assert!(x
                .weights
                .as_slice()
                .iter()
                .zip(y.weights.as_slice())
                .all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn sgd_and_adam_reduce_loss_on_tiny_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<f64> = (0..6 * 32).map(|_| rng.gen()).collect();
        for optimizer in [Optimizer::Sgd, Optimizer::default()] {
            let mut m = init_with_dims(&[6, 4, 2], 3, Activation::Relu, Activation::Tanh).unwrap();
            let cfg = TrainConfig {
                epochs: 200,
                batch_size: 8,
                learning_rate: if optimizer == Optimizer::Sgd { 0.1 } else { 1e-2 },
                optimizer,
                ..TrainConfig::default()
            };
            let r = train_rows(&mut m, &rows, &cfg).unwrap();
            assert!(r.epoch_losses.last() < r.epoch_losses.first(), "{optimizer:?}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<f64> = (0..6 * 8).map(|_| rng.gen::<f64>() * 1e3).collect();
        let mut m = init_with_dims(&[6, 4, 2], 3, Activation::Identity, Activation::Identity).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 8,
            learning_rate: 1e3,
            optimizer: Optimizer::Sgd,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_rows(&mut m, &rows, &cfg),
            Err(TrainingError::Diverged { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let base = TrainConfig::default();
        assert!(base.validate().is_ok());
        assert!(TrainConfig {
            epochs: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            learning_rate: f64::NAN,
            ..base.clone()
        }
        .validate()
        .is_err());
        let mut m = init_autoencoder(2, 0).unwrap();
        assert!(matches!(
            train_rows(&mut m, &[], &base),
            Err(TrainingError::EmptyDataset)
        ));
    }

    #[test]
    fn error_stats() {
        let s = ErrorStats::from_losses(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!((s.mean, s.median, s.max), (4.0, 2.5, 10.0));
        assert!(ErrorStats::from_losses(&[]).is_none());

        // Identity network copies its input exactly.
        let id = |n| DenseLayer::new(Matrix::identity(n), vec![0.0; n], Activation::Identity).unwrap();
        let copy = Autoencoder::new(vec![id(784)], vec![id(784)]).unwrap();
        let ds = uniform_rows(5, 3);
        let s = reconstruction_error_stats(&copy, &ds).unwrap();
        assert_eq!((s.mean, s.median, s.max), (0.0, 0.0, 0.0));

        let m = init_autoencoder(4, 1).unwrap();
        let losses = sample_losses(&m, ds.pixels()).unwrap();
        let s = reconstruction_error_stats(&m, &ds).unwrap();
        assert!((s.mean - losses.iter().sum::<f64>() / 5.0).abs() < 1e-12);
        for (i, l) in losses.iter().enumerate() {
            assert!((l - loss_of(&m, ds.sample(i))).abs() < 1e-12);
        }
    }
}
