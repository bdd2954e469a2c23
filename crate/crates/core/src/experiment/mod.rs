//! Experiment orchestration: the (d, seed, dataset) grid, cached results,
//! rendered figures and the property checks behind `verify`.

use std::path::{Path, PathBuf};

mod config;
mod render;
mod run;
pub mod verify;

pub use config::{ExperimentConfig, Profile, DEFAULT_MNIST_DIR, MNIST_DIR_ENV};
pub use render::{render_figures, render_recon_grid, write_pgm, FigureFamily, GrayImage};
pub use run::{
    checkpoint_path, eval_points, generate_datasets, load_mnist_data, read_results, read_theorem1, run_experiment,
    train_or_load, Cluster, ExperimentResults, MnistData, ResultRow, RunOptions, Theorem1Point, RESULTS_FILE,
    RESULTS_SCHEMA_VERSION, THEOREM1_FILE,
};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("MNIST not found in {dir}: {detail}. Place the four idx files there or set {MNIST_DIR_ENV}")]
    MissingMnist { dir: PathBuf, detail: String },
    #[error("{path}: cached checkpoint was trained with different settings ({}); rerun with --force to retrain", fields.join(", "))]
    CacheMismatch { path: PathBuf, fields: Vec<String> },
    #[error(transparent)]
    Data(#[from] crate::dataio::DataError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
    #[error(transparent)]
    Training(#[from] crate::training::TrainingError),
    #[error(transparent)]
    Spectra(#[from] crate::spectra::SpectraError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
