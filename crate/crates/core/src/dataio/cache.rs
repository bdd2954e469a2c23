//! Binary dataset cache.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "AEGDSET\0"
//! version    u32
//! kind       u8       0 mnist, 1 bernoulli, 2 beta, 3 truncated normal, 4 uniform
//! param_a    f64      p | alpha | mu | 0
//! param_b    f64      0 | beta  | sigma | 0
//! count      u64
//! seed       u64
//! labels     u8       1 when a label block follows the pixels
//! pixels     count * 784 f64
//! labels     count u8 (optional)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DataError, Dataset, DatasetKind, DatasetSpec, PIXELS};

const MAGIC: &[u8; 8] = b"AEGDSET\0";
pub const DATASET_FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 1 + 8 + 8 + 8 + 8 + 1;

fn encode_kind(kind: &DatasetKind) -> (u8, f64, f64) {
    match *kind {
        DatasetKind::Mnist => (0, 0.0, 0.0),
        DatasetKind::Bernoulli { p } => (1, p, 0.0),
        DatasetKind::Beta { alpha, beta } => (2, alpha, beta),
        DatasetKind::TruncatedNormal { mu, sigma } => (3, mu, sigma),
        DatasetKind::Uniform => (4, 0.0, 0.0),
    }
}

fn decode_kind(tag: u8, a: f64, b: f64) -> Option<DatasetKind> {
    Some(match tag {
        0 => DatasetKind::Mnist,
        1 => DatasetKind::Bernoulli { p: a },
        2 => DatasetKind::Beta { alpha: a, beta: b },
        3 => DatasetKind::TruncatedNormal { mu: a, sigma: b },
        4 => DatasetKind::Uniform,
        _ => return None,
    })
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let (tag, a, b) = encode_kind(&ds.spec.kind);
    let label_len = ds.labels.as_ref().map_or(0, Vec::len);
    let mut buf = Vec::with_capacity(HEADER_LEN + ds.pixels().len() * 8 + label_len);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&DATASET_FORMAT_VERSION.to_le_bytes());
    buf.push(tag);
    buf.extend_from_slice(&a.to_le_bytes());
    buf.extend_from_slice(&b.to_le_bytes());
    buf.extend_from_slice(&(ds.spec.count as u64).to_le_bytes());
    buf.extend_from_slice(&ds.spec.seed.to_le_bytes());
    buf.push(u8::from(ds.labels.is_some()));
    for v in ds.pixels() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = &ds.labels {
        buf.extend_from_slice(labels);
    }

    let tmp = path.with_extension("partial");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| DataError::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    let malformed = |detail: String| DataError::Malformed {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < HEADER_LEN {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            detail: format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(malformed("not a dataset cache file".into()));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != DATASET_FORMAT_VERSION {
        return Err(DataError::FormatVersion {
            path: path.to_path_buf(),
            found: version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    let kind = decode_kind(bytes[12], f64_at(13), f64_at(21))
        .ok_or_else(|| malformed(format!("unknown kind tag {}", bytes[12])))?;
    let count = usize::try_from(u64_at(29)).map_err(|_| malformed("count overflows".into()))?;
    let seed = u64_at(37);
    let has_labels = match bytes[45] {
        0 => false,
        1 => true,
        other => return Err(malformed(format!("bad label flag {other}"))),
    };

    let pixel_bytes = count
        .checked_mul(PIXELS * 8)
        .ok_or_else(|| malformed("count overflows".into()))?;
    let expected = HEADER_LEN + pixel_bytes + if has_labels { count } else { 0 };
    if bytes.len() != expected {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            detail: format!("expected {expected} bytes, file has {}", bytes.len()),
        });
    }
    let body = &bytes[HEADER_LEN..HEADER_LEN + pixel_bytes];
    let pixels: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels = has_labels.then(|| bytes[HEADER_LEN + pixel_bytes..].to_vec());

    let spec = DatasetSpec { kind, count, seed };
    spec.validate().map_err(|e| malformed(e.to_string()))?;
    Dataset::from_pixels(spec, pixels, labels)
}
