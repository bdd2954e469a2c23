//! Numerical property checks run by `aegeo verify` and the acceptance suite.
//! Every check is seeded, so its report is byte-identical across runs.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::{load_mnist_dir, ood_kinds, sampling::draw_pixel, MnistSplit, MNIST_TOTAL};
use crate::jacobian::{
    decoder_jacobian_at, encoder_jacobian_at, finite_diff_jacobian, jacobian_input, jacobian_input_compressed,
    jacobian_latent,
};
use crate::linalg::{eigenvalues, matmul, sort_by_modulus_desc, Matrix};
use crate::network::{init_with_dims, Activation, Autoencoder, DenseLayer};
use crate::spectra::{
    abs_arguments, frobenius_bound_check, orientation_flip, spectrum_input, spectrum_latent, Orientation, Source,
};
use crate::training::{backprop, mse_loss};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Measured and reported only.
    Report,
    Skip,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Report => "INFO",
            Outcome::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            outcome: if passed { Outcome::Pass } else { Outcome::Fail },
            detail,
        }
    }

    fn report(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            outcome: Outcome::Report,
            detail,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome != Outcome::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<4}  {:<34} {}", self.outcome, self.name, self.detail)
    }
}

/// Small model with ReLU hidden layers, identity latent layer, tanh output
/// and weights U(-1, 1), biases U(-0.5, 0.5).
pub fn random_small_model(dims: &[usize], seed: u64) -> Autoencoder {
    let mut m = init_with_dims(dims, seed, Activation::Relu, Activation::Tanh).expect("valid dims");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
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

/// Smallest |pre-activation| at `x`, over the forward pass and the encoder
/// pass at the reconstruction.
pub fn kink_margin(model: &Autoencoder, x: &[f64]) -> f64 {
    let t = model.forward(x).expect("dims match");
    let (at_y, _) = model.encode_trace(&t.reconstruction).expect("dims match");
    t.encoder_pre
        .iter()
        .chain(&t.decoder_pre)
        .chain(&at_y)
        .flatten()
        .fold(f64::INFINITY, |a, v| a.min(v.abs()))
}

/// `d` orthonormal rows in dimension `n` by Gram-Schmidt on random vectors.
pub fn orthonormal_rows(d: usize, n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    while rows.len() < d {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for r in &rows {
                let dot: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(r).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        rows.push(v.into_iter().map(|a| a / norm).collect());
    }
    Matrix::from_fn(d, n, |i, j| rows[i][j])
}

/// Linear autoencoder `x -> U^T U x` with identity activations.
pub fn linear_projection_model(d: usize, n: usize, seed: u64) -> Autoencoder {
    let u = orthonormal_rows(d, n, seed);
    Autoencoder::new(
        vec![DenseLayer::new(u.clone(), vec![0.0; d], Activation::Identity).expect("shapes")],
        vec![DenseLayer::new(u.transpose(), vec![0.0; n], Activation::Identity).expect("shapes")],
    )
    .expect("chained")
}

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Analytic encoder, decoder, input and latent Jacobians against central
/// differences on 100 random (model, point) pairs.
pub fn check_jacobian_finite_differences() -> Check {
    const STEP: f64 = 1e-5;
    const MARGIN: f64 = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut accepted = 0;
    let mut redrawn = 0;
    let mut seed = 0;
    while accepted < 100 {
        seed += 1;
        let m = random_small_model(&[16, 12, 8, 4], seed);
        let x: Vec<f64> = (0..16).map(|_| rng.gen()).collect();
        if kink_margin(&m, &x) < MARGIN {
            redrawn += 1;
            continue;
        }
        accepted += 1;
        let z = m.encode(&x).unwrap();
        let pairs = [
            (
                encoder_jacobian_at(&m, &x).unwrap(),
                finite_diff_jacobian(|p| m.encode(p).unwrap(), &x, STEP),
            ),
            (
                decoder_jacobian_at(&m, &z).unwrap(),
                finite_diff_jacobian(|p| m.decode(p).unwrap(), &z, STEP),
            ),
            (
                jacobian_input(&m, &x).unwrap(),
                finite_diff_jacobian(|p| m.forward(p).unwrap().reconstruction, &x, STEP),
            ),
            (
                jacobian_latent(&m, &x).unwrap(),
                finite_diff_jacobian(|p| m.encode(&m.decode(p).unwrap()).unwrap(), &z, STEP),
            ),
        ];
        for (analytic, fd) in pairs {
            worst = worst.max(max_abs_diff(&analytic, &fd.unwrap()));
        }
    }
    Check::new(
        "jacobian finite differences",
        worst <= 1e-4,
        format!("max abs error {worst:.3e} (tol 1e-4) over 100 pairs, {redrawn} redrawn near kinks"),
    )
}

/// Nonzero spectrum of the full input Jacobian against the compressed d x d
/// product on 50 models with input dimension 20.
pub fn check_ab_ba() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let d = 2 + (seed as usize % 5);
        let m = random_small_model(&[20, 12, 8, d], 200 + seed);
        let x: Vec<f64> = (0..20).map(|_| rng.gen()).collect();
        let full = sort_by_modulus_desc(eigenvalues(&jacobian_input(&m, &x).unwrap()).unwrap());
        let small = sort_by_modulus_desc(eigenvalues(&jacobian_input_compressed(&m, &x).unwrap()).unwrap());
        for (a, b) in full.iter().zip(&small) {
            worst = worst.max((a - b).norm());
        }
    }
    Check::new(
        "AB/BA spectral identity",
        worst <= 1e-8,
        format!("max |diff| {worst:.3e} (tol 1e-8) over 50 models"),
    )
}

const PROJECTION_DIMS: [usize; 4] = [1, 2, 5, 16];
const PROJECTION_INPUT: usize = 64;

/// For exact linear reconstruction the nonzero input spectrum equals the
/// latent spectrum.
pub fn check_theorem1_linear() -> Check {
    let mut worst: f64 = 0.0;
    for (i, &d) in PROJECTION_DIMS.iter().enumerate() {
        let m = linear_projection_model(d, PROJECTION_INPUT, 300 + i as u64);
        let x: Vec<f64> = (0..PROJECTION_INPUT).map(|k| (k as f64 * 0.37).sin()).collect();
        let full = sort_by_modulus_desc(eigenvalues(&jacobian_input(&m, &x).unwrap()).unwrap());
        let latent = spectrum_latent(&m, &x).unwrap();
        let diff: f64 = full
            .iter()
            .zip(&latent.eigenvalues)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff);
    }
    Check::new(
        "theorem 1 at equality",
        worst < 1e-9,
        format!("max eigenvalue vector distance {worst:.3e} (tol 1e-9), d in {PROJECTION_DIMS:?}"),
    )
}

/// Exact projections keep orientation and have real positive eigenvalues;
/// negating one decoder column flips orientation.
pub fn check_theorem3_orientation() -> Check {
    let mut ok = true;
    let mut worst_arg: f64 = 0.0;
    for (i, &d) in PROJECTION_DIMS.iter().enumerate() {
        let mut m = linear_projection_model(d, PROJECTION_INPUT, 300 + i as u64);
        let x: Vec<f64> = (0..PROJECTION_INPUT).map(|k| (k as f64 * 0.37).cos()).collect();
        for source in Source::ALL {
            ok &= orientation_flip(&m, &x, source).unwrap() == Orientation::NoFlip;
        }
        for s in [spectrum_input(&m, &x).unwrap(), spectrum_latent(&m, &x).unwrap()] {
            worst_arg = abs_arguments(&s).fold(worst_arg, f64::max);
        }
        let dec = m.layers_mut().nth(1).unwrap();
        for r in 0..dec.weights.rows() {
            dec.weights.row_mut(r)[0] *= -1.0;
        }
        ok &= orientation_flip(&m, &x, Source::InputJacobian).unwrap() == Orientation::Flip;
    }
    Check::new(
        "theorem 3 orientation",
        ok && worst_arg < 1e-9,
        format!("no flip on projections, flip after column negation: {ok}; max |Arg| {worst_arg:.3e} (tol 1e-9)"),
    )
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Frobenius bound on 200 random symmetric positive semidefinite pairs,
/// where it is the Hoffman-Wielandt inequality. Also reports the rate on
/// indefinite symmetric pairs and on latent Jacobians of random models.
pub fn check_theorem2() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut psd_holds = 0;
    let mut indef_holds = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..9);
        let gram = |rng: &mut ChaCha8Rng| {
            let m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            matmul(&m.transpose(), &m).unwrap()
        };
        let (a, b) = (gram(&mut rng), gram(&mut rng));
        psd_holds += frobenius_bound_check(&a, &b).unwrap().holds as usize;
        let (a, b) = (random_symmetric(&mut rng, n), random_symmetric(&mut rng, n));
        indef_holds += frobenius_bound_check(&a, &b).unwrap().holds as usize;
    }
    let mut latent_holds = 0;
    for seed in 0..200u64 {
        let m = random_small_model(&[20, 12, 8, 5], 500 + seed);
        let x: Vec<f64> = (0..20).map(|_| rng.gen()).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.gen()).collect();
        let (a, b) = (jacobian_latent(&m, &x).unwrap(), jacobian_latent(&m, &y).unwrap());
        latent_holds += frobenius_bound_check(&a, &b).unwrap().holds as usize;
    }
    vec![
        Check::new(
            "theorem 2 semidefinite pairs",
            psd_holds == 200,
            format!("rate {:.3} ({psd_holds}/200, required 1.0)", psd_holds as f64 / 200.0),
        ),
        Check::report(
            "theorem 2 indefinite pairs",
            format!("rate {:.3} ({indef_holds}/200)", indef_holds as f64 / 200.0),
        ),
        Check::report(
            "theorem 2 random latent jacobians",
            format!("rate {:.3} ({latent_holds}/200)", latent_holds as f64 / 200.0),
        ),
    ]
}

/// Empirical mean of 10^6 draws within 3 standard errors of the analytic
/// mean, for every synthetic distribution.
pub fn check_sampler_moments() -> Vec<Check> {
    const N: usize = 1_000_000;
    ood_kinds()
        .into_iter()
        .enumerate()
        .map(|(i, kind)| {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + i as u64);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..N {
                let v = draw_pixel(&kind, &mut rng);
                sum += v;
                sq += v * v;
            }
            let mean = sum / N as f64;
            let var = (sq / N as f64 - mean * mean) * N as f64 / (N - 1) as f64;
            let se = (var / N as f64).sqrt();
            let want = kind.analytic_mean().expect("synthetic kinds have a mean");
            let z = (mean - want) / se;
            Check::new(
                &format!("sampler mean {kind}"),
                z.abs() <= 3.0,
                format!("mean {mean:.5} vs {want:.5}, {z:+.2} standard errors"),
            )
        })
        .collect()
}

/// Backprop gradients against central differences of the loss.
pub fn check_gradients() -> Check {
    const STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst: f64 = 0.0;
    let mut accepted = 0;
    let mut seed = 0;
    while accepted < 20 {
        seed += 1;
        let mut m = random_small_model(&[8, 6, 3], 700 + seed);
        let x: Vec<f64> = (0..8).map(|_| rng.gen()).collect();
        if kink_margin(&m, &x) < 1e-3 {
            continue;
        }
        accepted += 1;
        let (_, grads) = backprop(&m, &x).unwrap();
        let analytic: Vec<f64> = grads
            .layers
            .iter()
            .flat_map(|g| g.weights.as_slice().iter().chain(&g.bias).copied())
            .collect();
        let loss = |m: &Autoencoder| mse_loss(&m.forward(&x).unwrap().reconstruction, &x).unwrap();
        let mut k = 0;
        let n_layers = m.layers().count();
        for l in 0..n_layers {
            let sizes = {
                let layer = m.layers().nth(l).unwrap();
                (layer.weights.as_slice().len(), layer.bias.len())
            };
            for p in 0..sizes.0 + sizes.1 {
                let nudge = |m: &mut Autoencoder, delta: f64| {
                    let layer = m.layers_mut().nth(l).unwrap();
                    if p < sizes.0 {
                        layer.weights.as_mut_slice()[p] += delta;
                    } else {
                        layer.bias[p - sizes.0] += delta;
                    }
                };
                nudge(&mut m, STEP);
                let plus = loss(&m);
                nudge(&mut m, -2.0 * STEP);
                let minus = loss(&m);
                nudge(&mut m, STEP);
                let fd = (plus - minus) / (2.0 * STEP);
                worst = worst.max((fd - analytic[k]).abs());
                k += 1;
            }
        }
    }
    Check::new(
        "backprop gradients",
        worst <= 1e-4,
        format!("max abs error {worst:.3e} (tol 1e-4) over 20 pairs"),
    )
}

/// Sample count and global pixel mean of the full MNIST pool.
pub fn check_mnist(dir: &Path) -> Check {
    let ds = match load_mnist_dir(dir, MnistSplit::All) {
        Ok(ds) => ds,
        Err(e) => {
            return Check {
                name: "mnist ingest".into(),
                outcome: Outcome::Skip,
                detail: format!("{}: {e}", dir.display()),
            }
        }
    };
    let mean = ds.mean_pixel();
    Check::new(
        "mnist ingest",
        ds.len() == MNIST_TOTAL && (mean - 0.13).abs() <= 0.01,
        format!(
            "{} samples (want {MNIST_TOTAL}), pixel mean {mean:.4} (want 0.13 +- 0.01)",
            ds.len()
        ),
    )
}

/// Every check in a fixed order.
pub fn run_all(mnist_dir: &Path) -> Vec<Check> {
    let mut out = vec![
        check_jacobian_finite_differences(),
        check_ab_ba(),
        check_theorem1_linear(),
        check_theorem3_orientation(),
    ];
    out.extend(check_theorem2());
    out.extend(check_sampler_moments());
    out.push(check_gradients());
    out.push(check_mnist(mnist_dir));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_rows_are_orthonormal() {
        let u = orthonormal_rows(5, 30, 1);
        let g = matmul(&u, &u.transpose()).unwrap();
        assert!(max_abs_diff(&g, &Matrix::identity(5)) < 1e-14);
    }

    #[test]
    fn missing_mnist_is_skipped() {
        let c = check_mnist(Path::new("/nonexistent/mnist"));
        assert_eq!(c.outcome, Outcome::Skip);
        assert!(c.passed());
    }

    #[test]
    fn fast_checks_pass() {
        for c in [
            check_ab_ba(),
            check_theorem1_linear(),
            check_theorem3_orientation(),
            check_gradients(),
        ] {
            assert_eq!(c.outcome, Outcome::Pass, "{c}");
        }
    }
}
