//! The experiment grid: training with checkpoint caching, per-point spectra
//! and aggregated result rows.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{changed_fields, ExperimentConfig};
use super::ExperimentError;
use crate::dataio::{load_mnist_dir, sample_dataset_prefix, Dataset, DatasetKind, DatasetSpec, MnistSplit};
use crate::network::{init_autoencoder, load_checkpoint_for_dim, save_checkpoint, Autoencoder, CHECKPOINT_VERSION};
use crate::spectra::{analyze_point, frobenius_bound_check, residual_of, PointAnalysis, Source, SpectralStats};
use crate::training::train;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.csv";
pub const THEOREM1_FILE: &str = "theorem1.csv";
const RESULTS_MANIFEST: &str = "results.json";

/// Grouping of datasets by mean pixel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cluster {
    Train,
    Dark,
    Mid,
    Bright,
}

impl Cluster {
    pub fn of(kind: &DatasetKind) -> Self {
        match kind.analytic_mean() {
            None => Cluster::Train,
            Some(m) if (m - 0.5).abs() < 1e-9 => Cluster::Mid,
            Some(m) if m < 0.5 => Cluster::Dark,
            Some(_) => Cluster::Bright,
        }
    }
}

/// One CSV row: statistics of one source over one (d, seed, dataset) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub d: usize,
    pub seed: u64,
    pub dataset: String,
    pub cluster: Cluster,
    /// Analytic mean pixel value; empirical for MNIST.
    pub dataset_mean: f64,
    pub source: Source,
    pub eval_points: usize,
    pub failed_points: usize,
    pub arith_mean_modulus: f64,
    pub arith_mean_modulus_median: f64,
    pub geo_mean_modulus: f64,
    pub log_modulus_median: f64,
    pub log_modulus_q1: f64,
    pub log_modulus_q3: f64,
    pub log_modulus_whisker_lo: f64,
    pub log_modulus_whisker_hi: f64,
    pub log_modulus_stdev: f64,
    pub abs_argument_median: f64,
    pub abs_argument_q1: f64,
    pub abs_argument_q3: f64,
    pub abs_argument_whisker_lo: f64,
    pub abs_argument_whisker_hi: f64,
    pub orientation_flip_fraction: f64,
    pub degenerate_fraction: f64,
    pub eig_diff_ratio_mean: f64,
    pub eig_diff_norm_ratio_mean: f64,
    pub recon_error_mean: f64,
    pub theorem1_residual_mean: f64,
    /// Fraction of latent-Jacobian pairs (this set's i-th point against the
    /// training set's i-th point) satisfying the Frobenius bound.
    pub theorem2_rate: f64,
}

impl ResultRow {
    fn new(
        d: usize,
        seed: u64,
        spec: &DatasetSpec,
        dataset_mean: f64,
        source: Source,
        stats: &SpectralStats,
        failed: usize,
        residual_mean: f64,
        theorem2_rate: f64,
    ) -> Self {
        Self {
            schema_version: RESULTS_SCHEMA_VERSION,
            d,
            seed,
            dataset: spec.id(),
            cluster: Cluster::of(&spec.kind),
            dataset_mean,
            source,
            eval_points: stats.sample_count,
            failed_points: failed,
            arith_mean_modulus: stats.arith_mean_modulus,
            arith_mean_modulus_median: stats.arith_mean_modulus_median,
            geo_mean_modulus: stats.geo_mean_modulus,
            log_modulus_median: stats.log_modulus.median,
            log_modulus_q1: stats.log_modulus.q1,
            log_modulus_q3: stats.log_modulus.q3,
            log_modulus_whisker_lo: stats.log_modulus.whisker_lo,
            log_modulus_whisker_hi: stats.log_modulus.whisker_hi,
            log_modulus_stdev: stats.log_modulus.stdev,
            abs_argument_median: stats.abs_argument.median,
            abs_argument_q1: stats.abs_argument.q1,
            abs_argument_q3: stats.abs_argument.q3,
            abs_argument_whisker_lo: stats.abs_argument.whisker_lo,
            abs_argument_whisker_hi: stats.abs_argument.whisker_hi,
            orientation_flip_fraction: stats.orientation_flip_fraction,
            degenerate_fraction: stats.degenerate_fraction,
            eig_diff_ratio_mean: stats.eig_diff_ratio_mean,
            eig_diff_norm_ratio_mean: stats.eig_diff_norm_ratio_mean,
            recon_error_mean: stats.recon_error_mean,
            theorem1_residual_mean: residual_mean,
            theorem2_rate,
        }
    }
}

/// Per-point Theorem 1 residual, for scatter plots and rank correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Point {
    pub d: usize,
    pub seed: u64,
    pub dataset: String,
    pub point: usize,
    pub residual: f64,
    pub recon_error: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub theorem1: Vec<Theorem1Point>,
    /// True when nothing was recomputed.
    pub cached: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Retrain even if a checkpoint exists with a different configuration.
    pub force: bool,
}

/// Fields that determine a trained checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrainManifest {
    checkpoint_version: u32,
    d: usize,
    seed: u64,
    epochs: usize,
    train_subsample: Option<usize>,
    data_seed: u64,
    batch_size: usize,
    learning_rate: f64,
    optimizer: crate::training::Optimizer,
}

impl TrainManifest {
    fn of(cfg: &ExperimentConfig, d: usize, seed: u64) -> Self {
        Self {
            checkpoint_version: CHECKPOINT_VERSION,
            d,
            seed,
            epochs: cfg.epochs,
            train_subsample: cfg.train_subsample,
            data_seed: cfg.data_seed,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            optimizer: cfg.optimizer,
        }
    }
}

pub fn checkpoint_path(cfg: &ExperimentConfig, d: usize, seed: u64) -> PathBuf {
    cfg.output_dir.join("checkpoints").join(format!("ae_d{d}_s{seed}.ckpt"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ExperimentError::io(parent, e))?;
    }
    let tmp = path.with_extension("partial");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| ExperimentError::io(path, e))
}

/// MNIST training pool and evaluation points.
pub struct MnistData {
    pub train: Dataset,
    pub eval: Dataset,
}

/// Loads all 70,000 images and applies the seeded permutation: the first
/// `train_subsample` images are trained on and the first `eval_subsample`
/// of those are evaluated.
pub fn load_mnist_data(cfg: &ExperimentConfig) -> Result<MnistData, ExperimentError> {
    let dir = cfg.mnist_dir();
    let all = load_mnist_dir(&dir, MnistSplit::All).map_err(|e| ExperimentError::MissingMnist {
        dir: dir.clone(),
        detail: e.to_string(),
    })?;
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.data_seed));
    let n_train = cfg.train_subsample.unwrap_or(all.len()).min(all.len());
    let train = all.select(&order[..n_train]);
    drop(all);
    let eval = train.prefix(cfg.eval_subsample);
    Ok(MnistData { train, eval })
}

/// Loads the cached model for `(d, seed)` or trains and caches it.
pub fn train_or_load(
    cfg: &ExperimentConfig,
    mnist: &MnistData,
    d: usize,
    seed: u64,
    opts: &RunOptions,
) -> Result<Autoencoder, ExperimentError> {
    let path = checkpoint_path(cfg, d, seed);
    let manifest_path = path.with_extension("json");
    let manifest = serde_json::to_value(TrainManifest::of(cfg, d, seed))?;
    if path.exists() && manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(|e| ExperimentError::io(&manifest_path, e))?;
        let old: serde_json::Value = serde_json::from_str(&text)?;
        let changed = changed_fields(&old, &manifest);
        if changed.is_empty() {
            log::info!("d={d} seed={seed}: using cached checkpoint {}", path.display());
            return Ok(load_checkpoint_for_dim(&path, d)?);
        }
        if !opts.force {
            return Err(ExperimentError::CacheMismatch {
                path: manifest_path,
                fields: changed,
            });
        }
        log::warn!("d={d} seed={seed}: retraining, changed fields {changed:?}");
    }
    log::info!(
        "d={d} seed={seed}: training on {} images for {} epochs",
        mnist.train.len(),
        cfg.epochs
    );
    let mut model = init_autoencoder(d, seed)?;
    let report = train(&mut model, &mnist.train, &cfg.train_config(seed))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    }
    save_checkpoint(&model, &path)?;
    report.write_loss_csv(&path.with_extension("loss.csv"))?;
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(model)
}

/// Evaluation points of a dataset entry.
pub fn eval_points(cfg: &ExperimentConfig, spec: &DatasetSpec, mnist: &MnistData) -> Result<Dataset, ExperimentError> {
    if spec.kind == DatasetKind::Mnist {
        return Ok(mnist.eval.clone());
    }
    Ok(sample_dataset_prefix(spec, cfg.eval_subsample)?)
}

/// Per-point analyses; failures are logged and counted.
fn analyze_dataset(model: &Autoencoder, ds: &Dataset) -> (Vec<PointAnalysis>, Vec<usize>, usize) {
    let results: Vec<_> = (0..ds.len())
        .into_par_iter()
        .map(|i| analyze_point(model, ds.sample(i)))
        .collect();
    let mut points = Vec::with_capacity(results.len());
    let mut index = Vec::with_capacity(results.len());
    let mut failed = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => {
                points.push(p);
                index.push(i);
            }
            Err(e) => {
                log::warn!("{}: point {i} skipped: {e}", ds.spec.id());
                failed += 1;
            }
        }
    }
    (points, index, failed)
}

fn theorem2_rate(points: &[PointAnalysis], reference: &[PointAnalysis], same_set: bool) -> f64 {
    let pairs: Vec<(&PointAnalysis, &PointAnalysis)> = if same_set {
        points.iter().zip(points.iter().skip(1)).collect()
    } else {
        points.iter().zip(reference.iter()).collect()
    };
    if pairs.is_empty() {
        return f64::NAN;
    }
    let holds = pairs
        .iter()
        .filter(|(a, b)| {
            frobenius_bound_check(&a.latent_jacobian, &b.latent_jacobian)
                .map(|c| c.holds)
                .unwrap_or(false)
        })
        .count();
    holds as f64 / pairs.len() as f64
}

struct CellOutput {
    rows: Vec<ResultRow>,
    theorem1: Vec<Theorem1Point>,
    spectra_dump: Option<String>,
}

fn evaluate_cell(
    cfg: &ExperimentConfig,
    model: &Autoencoder,
    d: usize,
    seed: u64,
    sets: &[(DatasetSpec, Dataset)],
) -> Result<CellOutput, ExperimentError> {
    let analyses: Vec<_> = sets
        .iter()
        .map(|(spec, ds)| {
            log::info!("d={d} seed={seed}: {} ({} points)", spec.id(), ds.len());
            analyze_dataset(model, ds)
        })
        .collect();
    let reference = sets
        .iter()
        .position(|(s, _)| s.kind == DatasetKind::Mnist)
        .map(|i| &analyses[i].0);

    let mut out = CellOutput {
        rows: Vec::new(),
        theorem1: Vec::new(),
        spectra_dump: cfg.dump_spectra.then(String::new),
    };
    for ((spec, ds), (points, index, failed)) in sets.iter().zip(&analyses) {
        let mean = spec.kind.analytic_mean().unwrap_or_else(|| ds.mean_pixel());
        let mut residuals = Vec::with_capacity(points.len());
        for (p, &i) in points.iter().zip(index) {
            let r = residual_of(p)?;
            residuals.push(r.residual);
            out.theorem1.push(Theorem1Point {
                d,
                seed,
                dataset: spec.id(),
                point: i,
                residual: r.residual,
                recon_error: r.recon_error,
            });
        }
        let residual_mean = if residuals.is_empty() {
            f64::NAN
        } else {
            residuals.iter().sum::<f64>() / residuals.len() as f64
        };
        let t2 = match reference {
            Some(r) => theorem2_rate(points, r, spec.kind == DatasetKind::Mnist),
            None => f64::NAN,
        };
        for source in Source::ALL {
            let Some(stats) = SpectralStats::aggregate(points, source)? else {
                return Err(ExperimentError::Config(format!(
                    "d={d} seed={seed} {}: every evaluation point failed",
                    spec.id()
                )));
            };
            out.rows.push(ResultRow::new(
                d,
                seed,
                spec,
                mean,
                source,
                &stats,
                *failed,
                residual_mean,
                t2,
            ));
        }
        if let Some(dump) = out.spectra_dump.as_mut() {
            for (p, &i) in points.iter().zip(index) {
                for source in Source::ALL {
                    for (k, e) in p.spectrum(source).eigenvalues.iter().enumerate() {
                        dump.push_str(&format!(
                            "{d},{seed},{},{i},{},{k},{},{},{}\n",
                            spec.id(),
                            source.label(),
                            e.re,
                            e.im,
                            p.input.reconstruction_error
                        ));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| ExperimentError::Config(e.to_string()))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| ExperimentError::Csv(e))?;
    let rows: Result<Vec<ResultRow>, _> = r.deserialize().collect();
    let rows = rows?;
    if let Some(row) = rows.iter().find(|r| r.schema_version != RESULTS_SCHEMA_VERSION) {
        return Err(ExperimentError::Config(format!(
            "{}: schema version {}, expected {RESULTS_SCHEMA_VERSION}",
            path.display(),
            row.schema_version
        )));
    }
    Ok(rows)
}

pub fn read_theorem1(path: &Path) -> Result<Vec<Theorem1Point>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Result<Vec<Theorem1Point>, _> = r.deserialize().collect();
    Ok(rows?)
}

/// Runs the whole grid. Results are cached under the config hash; a rerun
/// with the same config reads them back without touching the models.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentResults, ExperimentError> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| ExperimentError::io(out, e))?;
    let results_path = out.join(RESULTS_FILE);
    let theorem1_path = out.join(THEOREM1_FILE);
    let manifest_path = out.join(RESULTS_MANIFEST);
    let manifest = serde_json::json!({
        "schema_version": RESULTS_SCHEMA_VERSION,
        "config_hash": cfg.hash(),
        "config": cfg.result_fields(),
    });

    let spectra_wanted = cfg.dump_spectra && !out.join("spectra.csv").exists();
    if results_path.exists() && theorem1_path.exists() && manifest_path.exists() && !spectra_wanted {
        let text = fs::read_to_string(&manifest_path).map_err(|e| ExperimentError::io(&manifest_path, e))?;
        let old: serde_json::Value = serde_json::from_str(&text)?;
        if old.get("config_hash") == manifest.get("config_hash") {
            log::info!("results cached in {}", results_path.display());
            return Ok(ExperimentResults {
                rows: read_results(&results_path)?,
                theorem1: read_theorem1(&theorem1_path)?,
                cached: true,
            });
        }
        let changed = changed_fields(
            old.get("config").unwrap_or(&serde_json::Value::Null),
            &manifest["config"],
        );
        log::info!("config changed ({}); recomputing results", changed.join(", "));
    }

    let mnist = load_mnist_data(cfg)?;
    let mut sets = Vec::with_capacity(cfg.datasets.len());
    for spec in &cfg.datasets {
        sets.push((*spec, eval_points(cfg, spec, &mnist)?));
    }

    let mut rows = Vec::with_capacity(cfg.planned_rows());
    let mut theorem1 = Vec::new();
    let mut dump = cfg
        .dump_spectra
        .then(|| String::from("d,seed,dataset,point,source,index,re,im,recon_error\n"));
    for &d in &cfg.latent_dims {
        for &seed in &cfg.seeds {
            let model = train_or_load(cfg, &mnist, d, seed, opts)?;
            let cell = evaluate_cell(cfg, &model, d, seed, &sets)?;
            rows.extend(cell.rows);
            theorem1.extend(cell.theorem1);
            if let (Some(all), Some(part)) = (dump.as_mut(), cell.spectra_dump) {
                all.push_str(&part);
            }
        }
    }

    write_atomic(&results_path, &rows_to_csv(&rows)?)?;
    write_atomic(&theorem1_path, &rows_to_csv(&theorem1)?)?;
    if let Some(text) = dump {
        write_atomic(&out.join("spectra.csv"), text.as_bytes())?;
    }
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(ExperimentResults {
        rows,
        theorem1,
        cached: false,
    })
}

/// Writes every synthetic dataset of the config as a binary cache file and
/// returns the paths.
pub fn generate_datasets(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
    let dir = cfg.output_dir.join("data");
    fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
    let mut paths = Vec::new();
    for spec in cfg.datasets.iter().filter(|s| s.kind != DatasetKind::Mnist) {
        let path = dir.join(format!("{}_n{}_s{}.bin", spec.id(), spec.count, spec.seed));
        let ds = crate::dataio::sample_dataset(spec)?;
        crate::dataio::save_dataset(&ds, &path)?;
        log::info!("wrote {}", path.display());
        paths.push(path);
    }
    Ok(paths)
}
