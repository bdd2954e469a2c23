//! Experiment configuration: profile presets, JSON overrides and hashing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::dataio::{ood_specs, DatasetKind, DatasetSpec, MNIST_TOTAL};
use crate::training::{Optimizer, TrainConfig};

/// Env var that overrides the MNIST directory.
pub const MNIST_DIR_ENV: &str = "AEGEO_MNIST_DIR";
pub const DEFAULT_MNIST_DIR: &str = "data/mnist";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Full,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(format!("unknown profile {other:?} (expected desk or full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub latent_dims: Vec<usize>,
    /// Model seeds: initialization and shuffle order.
    pub seeds: Vec<u64>,
    pub epochs: usize,
    /// Evaluation sets. A `mnist` entry stands for the training data; its
    /// count and seed are ignored.
    pub datasets: Vec<DatasetSpec>,
    /// Points per dataset used for Jacobian statistics.
    pub eval_subsample: usize,
    /// Number of MNIST images trained on; `None` uses all 70,000.
    pub train_subsample: Option<usize>,
    /// Seed for choosing the training subset and the MNIST evaluation points.
    pub data_seed: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub output_dir: PathBuf,
    /// MNIST directory; falls back to the env var, then `data/mnist`.
    pub mnist_dir: Option<PathBuf>,
    /// Also write every per-point eigenvalue.
    pub dump_spectra: bool,
}

/// Every field optional; present fields override the profile preset.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    profile: Option<Profile>,
    latent_dims: Option<Vec<usize>>,
    seeds: Option<Vec<u64>>,
    epochs: Option<usize>,
    datasets: Option<Vec<DatasetSpec>>,
    eval_subsample: Option<usize>,
    /// `null` selects all images, so presence is tracked separately.
    #[serde(default, deserialize_with = "present")]
    train_subsample: Option<Option<usize>>,
    data_seed: Option<u64>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    optimizer: Option<Optimizer>,
    output_dir: Option<PathBuf>,
    mnist_dir: Option<PathBuf>,
    dump_spectra: Option<bool>,
}

fn present<'de, D, T>(d: D) -> Result<Option<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    T::deserialize(d).map(Some)
}

fn default_datasets(ood_count: usize, data_seed: u64) -> Vec<DatasetSpec> {
    let mut v = vec![DatasetSpec::new(DatasetKind::Mnist, MNIST_TOTAL, 0)];
    v.extend(ood_specs(ood_count, data_seed));
    v
}

impl ExperimentConfig {
    pub fn preset(profile: Profile) -> Self {
        let defaults = TrainConfig::default();
        match profile {
            Profile::Full => Self {
                profile,
                latent_dims: (2..=20).collect(),
                seeds: vec![0, 1],
                epochs: 300,
                datasets: default_datasets(MNIST_TOTAL, 0),
                eval_subsample: 2000,
                train_subsample: None,
                data_seed: 0,
                batch_size: defaults.batch_size,
                learning_rate: defaults.learning_rate,
                optimizer: defaults.optimizer,
                output_dir: PathBuf::from("out/full"),
                mnist_dir: None,
                dump_spectra: false,
            },
            Profile::Desk => Self {
                profile,
                latent_dims: vec![4, 8, 16],
                seeds: vec![0],
                epochs: 30,
                // Only the evaluated points of each synthetic set are generated.
                datasets: default_datasets(500, 0),
                eval_subsample: 500,
                train_subsample: Some(10_000),
                data_seed: 0,
                batch_size: defaults.batch_size,
                learning_rate: defaults.learning_rate,
                optimizer: defaults.optimizer,
                output_dir: PathBuf::from("out/desk"),
                mnist_dir: None,
                dump_spectra: false,
            },
        }
    }

    /// Preset of the file's profile (or `fallback`), overlaid with the file.
    pub fn from_json(text: &str, fallback: Profile) -> Result<Self, ExperimentError> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        let mut cfg = Self::preset(file.profile.unwrap_or(fallback));
        macro_rules! overlay {
            ($($field:ident),*) => { $( if let Some(v) = file.$field { cfg.$field = v; } )* };
        }
        overlay!(
            latent_dims,
            seeds,
            epochs,
            datasets,
            eval_subsample,
            train_subsample,
            data_seed,
            batch_size,
            learning_rate,
            optimizer,
            output_dir,
            dump_spectra
        );
        if file.mnist_dir.is_some() {
            cfg.mnist_dir = file.mnist_dir;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, fallback: Profile) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_json(&text, fallback).map_err(|e| match e {
            ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Replaces the seed lists with a single seed, re-deriving synthetic
    /// dataset seeds from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = vec![seed];
        self.data_seed = seed;
        let ood: Vec<DatasetSpec> = self
            .datasets
            .iter()
            .filter(|s| s.kind != DatasetKind::Mnist)
            .cloned()
            .collect();
        if let Some(count) = ood.first().map(|s| s.count) {
            let defaults = ood_specs(count, 0);
            // Only rewrite seeds of a default-shaped list; custom lists keep theirs.
            if ood.iter().map(|s| s.kind).eq(defaults.iter().map(|s| s.kind)) {
                let fresh = ood_specs(count, seed);
                let mut it = fresh.into_iter();
                for spec in self.datasets.iter_mut().filter(|s| s.kind != DatasetKind::Mnist) {
                    *spec = it.next().unwrap();
                }
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.latent_dims.is_empty() || self.seeds.is_empty() || self.datasets.is_empty() {
            return bad("latent_dims, seeds and datasets must be nonempty".into());
        }
        if let Some(d) = self.latent_dims.iter().find(|d| !(2..=784).contains(*d)) {
            return bad(format!("latent dimension {d} outside 2..=784"));
        }
        if self.eval_subsample == 0 {
            return bad("eval_subsample must be at least 1".into());
        }
        if self.train_subsample == Some(0) {
            return bad("train_subsample must be at least 1".into());
        }
        if let Some(n) = self.train_subsample {
            if n > MNIST_TOTAL {
                return bad(format!("train_subsample {n} exceeds {MNIST_TOTAL}"));
            }
        }
        for spec in &self.datasets {
            if spec.kind == DatasetKind::Mnist {
                continue;
            }
            spec.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        let mut ids: Vec<String> = self.datasets.iter().map(DatasetSpec::id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset ids must be distinct".into());
        }
        self.train_config(0)
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            seed,
            shuffle: true,
        }
    }

    pub fn mnist_dir(&self) -> PathBuf {
        self.mnist_dir
            .clone()
            .or_else(|| std::env::var_os(MNIST_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_MNIST_DIR))
    }

    /// Number of result rows the grid produces.
    pub fn planned_rows(&self) -> usize {
        self.latent_dims.len() * self.seeds.len() * self.datasets.len() * 2
    }

    /// The fields that determine results; paths and output switches excluded.
    pub fn result_fields(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().unwrap();
        for key in ["output_dir", "mnist_dir", "dump_spectra", "profile"] {
            obj.remove(key);
        }
        v
    }

    pub fn hash(&self) -> String {
        hash_value(&self.result_fields())
    }
}

fn hash_value(v: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(v).expect("json value serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Top-level keys whose values differ between two JSON objects.
pub(crate) fn changed_fields(old: &serde_json::Value, new: &serde_json::Value) -> Vec<String> {
    let empty = serde_json::Map::new();
    let (a, b) = (old.as_object().unwrap_or(&empty), new.as_object().unwrap_or(&empty));
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let desk = ExperimentConfig::preset(Profile::Desk);
        assert_eq!(desk.latent_dims, vec![4, 8, 16]);
        assert_eq!(desk.datasets.len(), 11);
        assert_eq!(desk.planned_rows(), 66);
        desk.validate().unwrap();
        let full = ExperimentConfig::preset(Profile::Full);
        assert_eq!(full.latent_dims.len(), 19);
        assert_eq!(full.planned_rows(), 836);
        full.validate().unwrap();
    }

    #[test]
    fn json_overlays_preset() {
        let cfg = ExperimentConfig::from_json(
            r#"{"profile": "desk", "latent_dims": [2, 3], "epochs": 2}"#,
            Profile::Full,
        )
        .unwrap();
        assert_eq!(cfg.profile, Profile::Desk);
        assert_eq!(cfg.latent_dims, vec![2, 3]);
        assert_eq!(cfg.epochs, 2);
        assert_eq!(cfg.eval_subsample, 500);

        let err = ExperimentConfig::from_json(r#"{"epoch": 2}"#, Profile::Desk).unwrap_err();
        assert!(err.to_string().contains("epoch"), "{err}");
        assert!(ExperimentConfig::from_json(r#"{"latent_dims": []}"#, Profile::Desk).is_err());
        let all = ExperimentConfig::from_json(r#"{"train_subsample": null}"#, Profile::Desk).unwrap();
        assert_eq!(all.train_subsample, None);
        let some = ExperimentConfig::from_json(r#"{"train_subsample": 5}"#, Profile::Full).unwrap();
        assert_eq!(some.train_subsample, Some(5));
        assert!(ExperimentConfig::from_json(r#"{"eval_subsample": 0}"#, Profile::Desk).is_err());
    }

    #[test]
    fn full_config_round_trips_through_json() {
        let cfg = ExperimentConfig::preset(Profile::Desk);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text, Profile::Full).unwrap(), cfg);
    }

    #[test]
    fn hash_ignores_paths_and_tracks_changes() {
        let a = ExperimentConfig::preset(Profile::Desk);
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.epochs += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(
            changed_fields(&a.result_fields(), &b.result_fields()),
            vec!["epochs".to_string()]
        );
    }

    #[test]
    fn seed_override_rederives_dataset_seeds() {
        let cfg = ExperimentConfig::preset(Profile::Desk).with_seed(3);
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.datasets[1].seed, 301);
        assert_eq!(cfg.datasets.len(), 11);
    }
}
