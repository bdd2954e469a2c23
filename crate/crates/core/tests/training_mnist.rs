mod common;

use aegeo::dataio::{sample_dataset, DatasetKind, DatasetSpec};
use aegeo::network::{init_autoencoder, init_with_dims, Activation};
use aegeo::training::{reconstruction_error_stats, train, TrainConfig};

#[test]
fn short_run_lowers_loss() {
    let ds = common::mnist_train().prefix(1000);
    let mut model = init_autoencoder(8, 0).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &ds, &cfg).unwrap();
    let first = report.epoch_losses[0];
    let last = *report.epoch_losses.last().unwrap();
    assert!(last < first, "first {first}, last {last}");
    assert!(report.final_sample_losses.iter().all(|l| l.is_finite() && *l >= 0.0));

    let ood = sample_dataset(&DatasetSpec::new(DatasetKind::Beta { alpha: 5.0, beta: 0.8 }, 200, 1)).unwrap();
    let train_stats = reconstruction_error_stats(&model, &ds).unwrap();
    let ood_stats = reconstruction_error_stats(&model, &ood).unwrap();
    assert!(train_stats.mean < ood_stats.mean, "{train_stats:?} vs {ood_stats:?}");
}

#[test]
fn overparameterized_linear_pair_fits_exactly() {
    let ds = common::mnist_train().prefix(50);
    let mut model = init_with_dims(&[784, 784], 0, Activation::Identity, Activation::Identity).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &ds, &cfg).unwrap();
    let last = *report.epoch_losses.last().unwrap();
    let stats = reconstruction_error_stats(&model, &ds).unwrap();
    eprintln!("last epoch {last:e}, final mean {:e}", stats.mean);
    assert!(stats.mean < 1e-3, "final mean loss {}", stats.mean);
}
