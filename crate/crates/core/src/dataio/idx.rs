//! IDX reader for the MNIST image and label files.

use std::fs;
use std::path::Path;

use super::{DataError, Dataset, DatasetKind, DatasetSpec, PIXELS};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Which part of MNIST to load from a directory holding the four standard
/// files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
    /// Train followed by test: the full 70,000 images.
    All,
}

fn read_u32_be(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn header(bytes: &[u8], path: &Path, magic: u32, dims: usize) -> Result<Vec<usize>, DataError> {
    let need = 4 + 4 * dims;
    if bytes.len() < need {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            detail: format!("header needs {need} bytes, file has {}", bytes.len()),
        });
    }
    let found = read_u32_be(bytes, 0);
    if found != magic {
        return Err(DataError::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    Ok((0..dims).map(|i| read_u32_be(bytes, 4 + 4 * i) as usize).collect())
}

fn read_images(path: &Path) -> Result<(usize, Vec<f64>), DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    let dims = header(&bytes, path, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    if rows * cols != PIXELS {
        return Err(DataError::ImageShape {
            path: path.to_path_buf(),
            rows,
            cols,
        });
    }
    let body = &bytes[16..];
    if body.len() < count * PIXELS {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            detail: format!(
                "header declares {count} images ({} bytes), body has {}",
                count * PIXELS,
                body.len()
            ),
        });
    }
    let pixels = body[..count * PIXELS].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((count, pixels))
}

fn read_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    let count = header(&bytes, path, LABELS_MAGIC, 1)?[0];
    let body = &bytes[8..];
    if body.len() < count {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            detail: format!("header declares {count} labels, body has {}", body.len()),
        });
    }
    Ok(body[..count].to_vec())
}

/// Loads one image/label file pair. Pixels are scaled to `[0, 1]` by
/// dividing by 255; each 28x28 image is flattened row-major.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Dataset, DataError> {
    let (count, pixels) = read_images(images_path)?;
    let labels = read_labels(labels_path)?;
    if labels.len() != count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    Dataset::from_pixels(DatasetSpec::new(DatasetKind::Mnist, count, 0), pixels, Some(labels))
}

/// Loads a split from a directory with the standard file names
/// (`train-images-idx3-ubyte`, ...). Gzipped files are not supported.
pub fn load_mnist_dir(dir: &Path, split: MnistSplit) -> Result<Dataset, DataError> {
    let part = |prefix: &str| {
        load_mnist(
            &dir.join(format!("{prefix}-images-idx3-ubyte")),
            &dir.join(format!("{prefix}-labels-idx1-ubyte")),
        )
    };
    match split {
        MnistSplit::Train => part("train"),
        MnistSplit::Test => part("t10k"),
        MnistSplit::All => {
            let train = part("train")?;
            let test = part("t10k")?;
            let count = train.len() + test.len();
            let mut pixels = train.pixels().to_vec();
            pixels.extend_from_slice(test.pixels());
            let mut labels = train.labels.unwrap_or_default();
            labels.extend(test.labels.unwrap_or_default());
            Dataset::from_pixels(DatasetSpec::new(DatasetKind::Mnist, count, 0), pixels, Some(labels))
        }
    }
}
