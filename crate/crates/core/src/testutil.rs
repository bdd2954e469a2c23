//! Oracles shared by unit tests.

use rand::Rng;

use crate::linalg::Matrix;

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            c[(i, j)] = s;
        }
    }
    c
}

/// One-sided Jacobi SVD; returns singular values only.
pub fn jacobi_singular_values(a: &Matrix) -> Vec<f64> {
    let mut u = a.clone();
    let n = u.cols();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..u.rows() {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..u.rows() {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    (0..n)
        .map(|j| u.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// Mirrored model over `dims` with weights and biases drawn from `U(-1, 1)`
/// and `U(-0.5, 0.5)`.
pub fn random_model(dims: &[usize], seed: u64) -> crate::network::Autoencoder {
    use crate::network::{init_with_dims, Activation};
    use rand::SeedableRng;
    let mut m = init_with_dims(dims, seed, Activation::Relu, Activation::Tanh).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
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

/// Smallest |pre-activation| over all layers at `x`, including the encoder
/// pass at the reconstruction.
pub fn kink_margin(model: &crate::network::Autoencoder, x: &[f64]) -> f64 {
    let t = model.forward(x).unwrap();
    let (at_y, _) = model.encode_trace(&t.reconstruction).unwrap();
    t.encoder_pre
        .iter()
        .chain(&t.decoder_pre)
        .chain(&at_y)
        .flatten()
        .fold(f64::INFINITY, |a, v| a.min(v.abs()))
}
