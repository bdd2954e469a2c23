use std::path::PathBuf;

use aegeo::dataio::{load_mnist_dir, Dataset, MnistSplit};

/// MNIST directory: `AEGEO_MNIST_DIR` or `data/mnist` at the workspace root.
#[allow(dead_code)]
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("AEGEO_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

#[allow(dead_code)]
pub fn mnist_train() -> Dataset {
    let dir = mnist_dir();
    load_mnist_dir(&dir, MnistSplit::Train).unwrap_or_else(|e| {
        panic!(
            "MNIST not found in {} ({e}); place the four idx files there or set AEGEO_MNIST_DIR",
            dir.display()
        )
    })
}
