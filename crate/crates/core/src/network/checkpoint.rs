//! Model checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic         8 bytes  "AEGCKPT\0"
//! version       u32
//! latent_dim    u32
//! seed          u64
//! epochs        u32
//! enc_layers    u32
//! dec_layers    u32
//! per layer:    out u32, in u32, activation u8
//! parameters    per layer: weights row-major (out * in f64), then bias (out f64)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Activation, Autoencoder, DenseLayer, ModelMeta, NetworkError};
use crate::linalg::Matrix;

const MAGIC: &[u8; 8] = b"AEGCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const FIXED_HEADER: usize = 8 + 4 + 4 + 8 + 4 + 4 + 4;
const LAYER_RECORD: usize = 9;
// Guards against absurd allocations from a corrupted header.
const MAX_LAYERS: usize = 64;

pub fn save_checkpoint(model: &Autoencoder, path: &Path) -> Result<(), NetworkError> {
    let mut buf = Vec::with_capacity(FIXED_HEADER + 8 * model.param_count() + 16 * LAYER_RECORD);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.latent_dim() as u32).to_le_bytes());
    buf.extend_from_slice(&model.meta.seed.to_le_bytes());
    buf.extend_from_slice(&model.meta.epochs.to_le_bytes());
    buf.extend_from_slice(&(model.encoder().len() as u32).to_le_bytes());
    buf.extend_from_slice(&(model.decoder().len() as u32).to_le_bytes());
    for layer in model.layers() {
        buf.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        buf.push(layer.activation.tag());
    }
    for layer in model.layers() {
        for v in layer.weights.as_slice().iter().chain(&layer.bias) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    let tmp = path.with_extension("partial");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|source| NetworkError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetworkError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.corrupt(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetworkError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NetworkError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn corrupt(&self, detail: String) -> NetworkError {
        NetworkError::Corrupt {
            path: self.path.to_path_buf(),
            detail,
        }
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Autoencoder, NetworkError> {
    let bytes = fs::read(path).map_err(|source| NetworkError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if r.take(8)? != MAGIC {
        return Err(r.corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NetworkError::Version {
            path: path.to_path_buf(),
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let latent = r.u32()? as usize;
    let seed = r.u64()?;
    let epochs = r.u32()?;
    let n_enc = r.u32()? as usize;
    let n_dec = r.u32()? as usize;
    if n_enc == 0 || n_dec == 0 || n_enc + n_dec > MAX_LAYERS {
        return Err(r.corrupt(format!("bad layer counts {n_enc}/{n_dec}")));
    }
    let mut shapes = Vec::with_capacity(n_enc + n_dec);
    for _ in 0..n_enc + n_dec {
        let out = r.u32()? as usize;
        let inp = r.u32()? as usize;
        let tag = r.take(1)?[0];
        let act = Activation::from_tag(tag).ok_or_else(|| r.corrupt(format!("unknown activation tag {tag}")))?;
        shapes.push((out, inp, act));
    }
    let params: usize = shapes.iter().map(|(o, i, _)| o * i + o).sum();
    if bytes.len() - r.pos != params * 8 {
        return Err(r.corrupt(format!(
            "expected {} parameter bytes, found {}",
            params * 8,
            bytes.len() - r.pos
        )));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for (out, inp, act) in shapes {
        let mut read = |n: usize| -> Result<Vec<f64>, NetworkError> {
            Ok(r.take(8 * n)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let w = read(out * inp)?;
        let b = read(out)?;
        let weights = Matrix::from_vec(out, inp, w).map_err(|e| r.corrupt(e.to_string()))?;
        layers.push(DenseLayer::new(weights, b, act)?);
    }
    let decoder = layers.split_off(n_enc);
    let mut model = Autoencoder::new(layers, decoder)?;
    if model.latent_dim() != latent {
        return Err(r.corrupt(format!(
            "header latent dimension {latent} disagrees with layer shapes ({})",
            model.latent_dim()
        )));
    }
    model.meta = ModelMeta { seed, epochs };
    Ok(model)
}

/// Loads a checkpoint and refuses it unless its latent dimension is `d`.
pub fn load_checkpoint_for_dim(path: &Path, d: usize) -> Result<Autoencoder, NetworkError> {
    let model = load_checkpoint(path)?;
    if model.latent_dim() != d {
        return Err(NetworkError::LatentMismatch {
            path: path.to_path_buf(),
            found: model.latent_dim(),
            expected: d,
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_autoencoder;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut m = init_autoencoder(8, 5).unwrap();
        m.meta.epochs = 12;
        m.layers_mut().next().unwrap().bias[3] = -0.0;
        save_checkpoint(&m, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.meta, ModelMeta { seed: 5, epochs: 12 });
        for (a, b) in m.layers().zip(back.layers()) {
            assert_eq!(a.activation, b.activation);
            let bits = |l: &DenseLayer| {
                l.weights
                    .as_slice()
                    .iter()
                    .chain(&l.bias)
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            };
            assert_eq!(bits(a), bits(b));
        }
        assert!(back.is_standard());
    }

    #[test]
    fn corrupted_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&init_autoencoder(4, 0).unwrap(), &path).unwrap();
        let good = fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(NetworkError::Corrupt { .. })));

        let mut bad = good.clone();
        bad[8] = 7;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(NetworkError::Version { found: 7, .. })
        ));

        let mut bad = good.clone();
        // First layer's output dimension.
        bad[FIXED_HEADER] = 99;
        fs::write(&path, &bad).unwrap();
        assert!(load_checkpoint(&path).is_err());

        fs::write(&path, &good[..good.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(NetworkError::Corrupt { .. })));

        fs::write(&path, &good[..10]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(NetworkError::Corrupt { .. })));
    }

    #[test]
    fn latent_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&init_autoencoder(8, 0).unwrap(), &path).unwrap();
        assert!(load_checkpoint_for_dim(&path, 8).is_ok());
        assert!(matches!(
            load_checkpoint_for_dim(&path, 9),
            Err(NetworkError::LatentMismatch {
                found: 8,
                expected: 9,
                ..
            })
        ));
    }
}
