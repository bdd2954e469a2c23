//! Input Jacobians of the encoder, the decoder and their compositions.
//!
//! Each layer contributes `diag(act'(p)) * A` where `p` is its cached
//! pre-activation; stacks multiply these in order. Statistics use the `d x d`
//! products `Denc(x) Ddec(z)` and `Denc(y) Ddec(z)`; the full `784 x 784`
//! matrix `Ddec(z) Denc(x)` is only built for oracle checks.

use crate::linalg::{matmul, LinalgError, Matrix};
use crate::network::{Autoencoder, DenseLayer, ForwardTrace, NetworkError};

#[derive(Debug, thiserror::Error)]
pub enum JacobianError {
    #[error("{context}: expected length {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `diag(act'(pre)) * W`.
pub fn layer_jacobian(layer: &DenseLayer, pre: &[f64]) -> Result<Matrix, JacobianError> {
    if pre.len() != layer.out_dim() {
        return Err(JacobianError::DimMismatch {
            context: "layer pre-activation",
            expected: layer.out_dim(),
            got: pre.len(),
        });
    }
    let mut j = layer.weights.clone();
    let scale: Vec<f64> = pre.iter().map(|&t| layer.activation.derivative(t)).collect();
    j.scale_rows(&scale);
    Ok(j)
}

/// Product `L_k ... L_1` of the layer Jacobians of a stack.
fn stack_jacobian(layers: &[DenseLayer], pres: &[Vec<f64>]) -> Result<Matrix, JacobianError> {
    if layers.len() != pres.len() {
        return Err(JacobianError::DimMismatch {
            context: "trace layer count",
            expected: layers.len(),
            got: pres.len(),
        });
    }
    let mut acc = layer_jacobian(&layers[0], &pres[0])?;
    for (layer, pre) in layers.iter().zip(pres).skip(1) {
        acc = matmul(&layer_jacobian(layer, pre)?, &acc)?;
    }
    Ok(acc)
}

/// `Denc` at the point the trace was taken, `d x n`.
pub fn encoder_jacobian(model: &Autoencoder, trace: &ForwardTrace) -> Result<Matrix, JacobianError> {
    stack_jacobian(model.encoder(), &trace.encoder_pre)
}

/// `Ddec` at the latent code of the trace, `n x d`.
pub fn decoder_jacobian(model: &Autoencoder, trace: &ForwardTrace) -> Result<Matrix, JacobianError> {
    stack_jacobian(model.decoder(), &trace.decoder_pre)
}

pub fn encoder_jacobian_at(model: &Autoencoder, x: &[f64]) -> Result<Matrix, JacobianError> {
    let (pre, _) = model.encode_trace(x)?;
    stack_jacobian(model.encoder(), &pre)
}

pub fn decoder_jacobian_at(model: &Autoencoder, z: &[f64]) -> Result<Matrix, JacobianError> {
    let (pre, _) = model.decode_trace(z)?;
    stack_jacobian(model.decoder(), &pre)
}

/// The three factors needed at a sample `x`, with `z = f_enc(x)` and
/// `y = f_dec(z)`.
#[derive(Debug, Clone)]
pub struct JacobianPair {
    pub d_enc_at_x: Matrix,
    pub d_dec_at_z: Matrix,
    pub d_enc_at_y: Matrix,
    /// Mean squared reconstruction error at `x`.
    pub reconstruction_error: f64,
    pub trace: ForwardTrace,
}

impl JacobianPair {
    pub fn new(model: &Autoencoder, x: &[f64]) -> Result<Self, JacobianError> {
        let trace = model.forward(x)?;
        let d_enc_at_x = encoder_jacobian(model, &trace)?;
        let d_dec_at_z = decoder_jacobian(model, &trace)?;
        let (pre_y, _) = model.encode_trace(&trace.reconstruction)?;
        let d_enc_at_y = stack_jacobian(model.encoder(), &pre_y)?;
        let n = x.len() as f64;
        let reconstruction_error = trace
            .reconstruction
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        Ok(Self {
            d_enc_at_x,
            d_dec_at_z,
            d_enc_at_y,
            reconstruction_error,
            trace,
        })
    }

    /// `Ddec(z) Denc(x)`, `n x n`.
    pub fn input_full(&self) -> Matrix {
        matmul(&self.d_dec_at_z, &self.d_enc_at_x).expect("factor shapes chain")
    }

    /// `Denc(x) Ddec(z)`, `d x d`; same nonzero spectrum as [`Self::input_full`].
    pub fn input_compressed(&self) -> Matrix {
        matmul(&self.d_enc_at_x, &self.d_dec_at_z).expect("factor shapes chain")
    }

    /// `Denc(y) Ddec(z)`, `d x d`.
    pub fn latent(&self) -> Matrix {
        matmul(&self.d_enc_at_y, &self.d_dec_at_z).expect("factor shapes chain")
    }
}

pub fn jacobian_input(model: &Autoencoder, x: &[f64]) -> Result<Matrix, JacobianError> {
    Ok(JacobianPair::new(model, x)?.input_full())
}

pub fn jacobian_input_compressed(model: &Autoencoder, x: &[f64]) -> Result<Matrix, JacobianError> {
    Ok(JacobianPair::new(model, x)?.input_compressed())
}

pub fn jacobian_latent(model: &Autoencoder, x: &[f64]) -> Result<Matrix, JacobianError> {
    Ok(JacobianPair::new(model, x)?.latent())
}

/// Central differences, one column per input coordinate.
pub fn finite_diff_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, point: &[f64], step: f64) -> Result<Matrix, JacobianError> {
    if !(step > 0.0) {
        return Err(JacobianError::BadStep(step));
    }
    let m = f(point).len();
    let mut j = Matrix::zeros(m, point.len());
    let mut p = point.to_vec();
    for c in 0..point.len() {
        p[c] = point[c] + step;
        let plus = f(&p);
        p[c] = point[c] - step;
        let minus = f(&p);
        p[c] = point[c];
        for r in 0..m {
            j[(r, c)] = (plus[r] - minus[r]) / (2.0 * step);
        }
    }
    Ok(j)
}
