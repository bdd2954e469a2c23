//! Eigenvalue spectra of the input and latent Jacobians and the statistics
//! built from them.

mod summary;

use serde::{Deserialize, Serialize};

use crate::jacobian::{JacobianError, JacobianPair};
use crate::linalg::{
    det_sign, eigenvalues, frobenius_norm, sort_by_modulus_desc, Complex64, ComplexVec, LinalgError, Matrix,
};
use crate::network::Autoencoder;

pub use summary::{quantile_sorted, spearman, BoxSummary};

/// Moduli are clamped to this before taking logarithms.
pub const FLOOR: f64 = 1e-12;
/// Determinant pivots below this count as singular.
pub const DET_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum SpectraError {
    #[error("spectrum lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error(transparent)]
    Jacobian(#[from] JacobianError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    InputJacobian,
    LatentJacobian,
}

impl Source {
    pub const ALL: [Source; 2] = [Source::InputJacobian, Source::LatentJacobian];

    pub fn label(self) -> &'static str {
        match self {
            Source::InputJacobian => "J_I",
            Source::LatentJacobian => "J_L",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "J_I" | "input_jacobian" => Some(Source::InputJacobian),
            "J_L" | "latent_jacobian" => Some(Source::LatentJacobian),
            _ => None,
        }
    }
}

/// Eigenvalues sorted by decreasing modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: ComplexVec,
    pub source: Source,
    pub reconstruction_error: f64,
}

impl Spectrum {
    pub fn from_matrix(m: &Matrix, source: Source, reconstruction_error: f64) -> Result<Self, SpectraError> {
        Ok(Self {
            eigenvalues: sort_by_modulus_desc(eigenvalues(m)?),
            source,
            reconstruction_error,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Flip,
    NoFlip,
    Degenerate,
}

pub fn orientation_of(m: &Matrix) -> Result<Orientation, SpectraError> {
    Ok(match det_sign(m, DET_TOL)? {
        -1 => Orientation::Flip,
        1 => Orientation::NoFlip,
        _ => Orientation::Degenerate,
    })
}

pub fn spectrum_input(model: &Autoencoder, x: &[f64]) -> Result<Spectrum, SpectraError> {
    let pair = JacobianPair::new(model, x)?;
    Spectrum::from_matrix(
        &pair.input_compressed(),
        Source::InputJacobian,
        pair.reconstruction_error,
    )
}

pub fn spectrum_latent(model: &Autoencoder, x: &[f64]) -> Result<Spectrum, SpectraError> {
    let pair = JacobianPair::new(model, x)?;
    Spectrum::from_matrix(&pair.latent(), Source::LatentJacobian, pair.reconstruction_error)
}

pub fn orientation_flip(model: &Autoencoder, x: &[f64], source: Source) -> Result<Orientation, SpectraError> {
    let pair = JacobianPair::new(model, x)?;
    orientation_of(&match source {
        Source::InputJacobian => pair.input_compressed(),
        Source::LatentJacobian => pair.latent(),
    })
}

/// Everything computed at one evaluation point.
#[derive(Debug, Clone)]
pub struct PointAnalysis {
    pub input: Spectrum,
    pub latent: Spectrum,
    pub orientation_input: Orientation,
    pub orientation_latent: Orientation,
    pub latent_jacobian: Matrix,
}

impl PointAnalysis {
    pub fn spectrum(&self, source: Source) -> &Spectrum {
        match source {
            Source::InputJacobian => &self.input,
            Source::LatentJacobian => &self.latent,
        }
    }

    pub fn orientation(&self, source: Source) -> Orientation {
        match source {
            Source::InputJacobian => self.orientation_input,
            Source::LatentJacobian => self.orientation_latent,
        }
    }
}

pub fn analyze_point(model: &Autoencoder, x: &[f64]) -> Result<PointAnalysis, SpectraError> {
    let pair = JacobianPair::new(model, x)?;
    let ji = pair.input_compressed();
    let jl = pair.latent();
    let err = pair.reconstruction_error;
    Ok(PointAnalysis {
        input: Spectrum::from_matrix(&ji, Source::InputJacobian, err)?,
        latent: Spectrum::from_matrix(&jl, Source::LatentJacobian, err)?,
        orientation_input: orientation_of(&ji)?,
        orientation_latent: orientation_of(&jl)?,
        latent_jacobian: jl,
    })
}

fn diff_sq(a: &[Complex64], b: &[Complex64]) -> Result<f64, SpectraError> {
    if a.len() != b.len() {
        return Err(SpectraError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum())
}

/// `||lambda_I - lambda_L||^2 / d` over the sorted vectors.
pub fn eig_diff_ratio(si: &Spectrum, sl: &Spectrum) -> Result<f64, SpectraError> {
    Ok(diff_sq(&si.eigenvalues, &sl.eigenvalues)? / si.len().max(1) as f64)
}

/// `||lambda_I - lambda_L|| / d`, the unsquared variant.
pub fn eig_diff_norm_ratio(si: &Spectrum, sl: &Spectrum) -> Result<f64, SpectraError> {
    Ok(diff_sq(&si.eigenvalues, &sl.eigenvalues)?.sqrt() / si.len().max(1) as f64)
}

/// Arithmetic and geometric means of the eigenvalue moduli.
pub fn modulus_means(s: &Spectrum) -> (f64, f64) {
    let d = s.len().max(1) as f64;
    let arith = s.eigenvalues.iter().map(|e| e.norm()).sum::<f64>() / d;
    let geo = (s.eigenvalues.iter().map(|e| e.norm().max(FLOOR).ln()).sum::<f64>() / d).exp();
    (arith, geo)
}

pub fn log_moduli(s: &Spectrum) -> impl Iterator<Item = f64> + '_ {
    s.eigenvalues.iter().map(|e| e.norm().max(FLOOR).ln())
}

/// `|Arg(lambda)|` in `[0, pi]`, with `Arg(0) = 0`.
pub fn abs_arguments(s: &Spectrum) -> impl Iterator<Item = f64> + '_ {
    s.eigenvalues
        .iter()
        .map(|e| if e.re == 0.0 && e.im == 0.0 { 0.0 } else { e.arg().abs() })
}

/// Summary of `log|lambda|` pooled over every eigenvalue of every spectrum.
pub fn log_modulus_stats(spectra: &[Spectrum]) -> Option<BoxSummary> {
    let pooled: Vec<f64> = spectra.iter().flat_map(log_moduli).collect();
    BoxSummary::from_values(&pooled)
}

/// Summary of `|Arg(lambda)|` pooled over every eigenvalue of every spectrum.
pub fn argument_stats(spectra: &[Spectrum]) -> Option<BoxSummary> {
    let pooled: Vec<f64> = spectra.iter().flat_map(abs_arguments).collect();
    BoxSummary::from_values(&pooled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the squared distance of the sorted spectra of `a` and `b` with
/// `||a - b||_F^2`.
pub fn frobenius_bound_check(a: &Matrix, b: &Matrix) -> Result<FrobeniusCheck, SpectraError> {
    let diff = a.sub(b)?;
    let ea = sort_by_modulus_desc(eigenvalues(a)?);
    let eb = sort_by_modulus_desc(eigenvalues(b)?);
    let lhs = diff_sq(&ea, &eb)?;
    let rhs = frobenius_norm(&diff).powi(2);
    Ok(FrobeniusCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Residual {
    pub residual: f64,
    pub recon_error: f64,
}

pub fn theorem1_residual(model: &Autoencoder, x: &[f64]) -> Result<Theorem1Residual, SpectraError> {
    let p = analyze_point(model, x)?;
    Ok(residual_of(&p)?)
}

pub fn residual_of(p: &PointAnalysis) -> Result<Theorem1Residual, SpectraError> {
    Ok(Theorem1Residual {
        residual: diff_sq(&p.input.eigenvalues, &p.latent.eigenvalues)?.sqrt(),
        recon_error: p.input.reconstruction_error,
    })
}

/// Aggregate statistics of one source over the evaluation points of one
/// (model, dataset) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralStats {
    /// Mean over points of the per-point arithmetic mean modulus.
    pub arith_mean_modulus: f64,
    /// Median over points of the per-point arithmetic mean modulus.
    pub arith_mean_modulus_median: f64,
    /// Mean over points of the per-point geometric mean modulus.
    pub geo_mean_modulus: f64,
    pub log_modulus: BoxSummary,
    pub abs_argument: BoxSummary,
    /// Flips over non-degenerate points.
    pub orientation_flip_fraction: f64,
    /// Degenerate points over all points.
    pub degenerate_fraction: f64,
    pub eig_diff_ratio_mean: f64,
    pub eig_diff_norm_ratio_mean: f64,
    pub recon_error_mean: f64,
    pub sample_count: usize,
}

impl SpectralStats {
    /// `None` when `points` is empty.
    pub fn aggregate(points: &[PointAnalysis], source: Source) -> Result<Option<Self>, SpectraError> {
        if points.is_empty() {
            return Ok(None);
        }
        let n = points.len() as f64;
        let spectra: Vec<Spectrum> = points.iter().map(|p| p.spectrum(source).clone()).collect();
        let means: Vec<(f64, f64)> = spectra.iter().map(modulus_means).collect();
        let mut ariths: Vec<f64> = means.iter().map(|m| m.0).collect();
        ariths.sort_by(f64::total_cmp);
        let mut geos: Vec<f64> = means.iter().map(|m| m.1).collect();
        geos.sort_by(f64::total_cmp);

        let degenerate = points
            .iter()
            .filter(|p| p.orientation(source) == Orientation::Degenerate)
            .count();
        let flips = points
            .iter()
            .filter(|p| p.orientation(source) == Orientation::Flip)
            .count();
        let nondegenerate = points.len() - degenerate;

        let mut ratios = Vec::with_capacity(points.len());
        let mut norm_ratios = Vec::with_capacity(points.len());
        for p in points {
            ratios.push(eig_diff_ratio(&p.input, &p.latent)?);
            norm_ratios.push(eig_diff_norm_ratio(&p.input, &p.latent)?);
        }
        let mut errs: Vec<f64> = points.iter().map(|p| p.input.reconstruction_error).collect();
        // Sorted sums make every field independent of point order.
        for v in [&mut ratios, &mut norm_ratios, &mut errs] {
            v.sort_by(f64::total_cmp);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n;

        Ok(Some(Self {
            arith_mean_modulus: mean(&ariths),
            arith_mean_modulus_median: quantile_sorted(&ariths, 0.5),
            geo_mean_modulus: mean(&geos),
            log_modulus: log_modulus_stats(&spectra).expect("nonempty"),
            abs_argument: argument_stats(&spectra).expect("nonempty"),
            orientation_flip_fraction: if nondegenerate == 0 {
                0.0
            } else {
                flips as f64 / nondegenerate as f64
            },
            degenerate_fraction: degenerate as f64 / n,
            eig_diff_ratio_mean: mean(&ratios),
            eig_diff_norm_ratio_mean: mean(&norm_ratios),
            recon_error_mean: mean(&errs),
            sample_count: points.len(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobian::JacobianPair;
    use crate::network::{init_with_dims, Activation, DenseLayer};
    use crate::testutil::random_model;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, FRAC_PI_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spectrum(values: &[Complex64]) -> Spectrum {
        Spectrum {
            eigenvalues: sort_by_modulus_desc(values.to_vec()),
            source: Source::InputJacobian,
            reconstruction_error: 0.0,
        }
    }

    fn real_spectrum(values: &[f64]) -> Spectrum {
        spectrum(&values.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>())
    }

    fn linear_projection(d: usize, n: usize, seed: u64) -> Autoencoder {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        while rows.len() < d {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for r in &rows {
                let dot: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(r).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            rows.push(v.into_iter().map(|a| a / norm).collect());
        }
        let u = Matrix::from_fn(d, n, |i, j| rows[i][j]);
        Autoencoder::new(
            vec![DenseLayer::new(u.clone(), vec![0.0; d], Activation::Identity).unwrap()],
            vec![DenseLayer::new(u.transpose(), vec![0.0; n], Activation::Identity).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn projection_spectra_are_ones() {
        let m = linear_projection(4, 12, 1);
        let x = [0.3; 12];
        for s in [spectrum_input(&m, &x).unwrap(), spectrum_latent(&m, &x).unwrap()] {
            assert_eq!(s.len(), 4);
            assert!(s.eigenvalues.iter().all(|e| (e - c(1.0, 0.0)).norm() < 1e-12));
        }
        assert_eq!(
            orientation_flip(&m, &x, Source::InputJacobian).unwrap(),
            Orientation::NoFlip
        );
        assert!(theorem1_residual(&m, &x).unwrap().residual < 1e-9);
    }

    #[test]
    fn one_dimensional_latent() {
        let m = random_model(&[5, 3, 1], 2);
        let x = [0.1, 0.4, 0.2, 0.9, 0.5];
        let pair = JacobianPair::new(&m, &x).unwrap();
        let dot: f64 = pair
            .d_enc_at_x
            .row(0)
            .iter()
            .zip(pair.d_dec_at_z.column(0))
            .map(|(a, b)| a * b)
            .sum();
        let s = spectrum_input(&m, &x).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.eigenvalues[0] - c(dot, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_decoder_gives_zero_spectra() {
        let mut m = random_model(&[6, 4, 2], 3);
        let n_enc = m.encoder().len();
        for layer in m.layers_mut().skip(n_enc) {
            layer.weights.as_mut_slice().fill(0.0);
        }
        let x = [0.5; 6];
        let s = spectrum_latent(&m, &x).unwrap();
        assert!(s.eigenvalues.iter().all(|e| e.norm() == 0.0));
        assert_eq!(theorem1_residual(&m, &x).unwrap().residual, 0.0);
        assert_eq!(
            orientation_flip(&m, &x, Source::LatentJacobian).unwrap(),
            Orientation::Degenerate
        );
    }

    #[test]
    fn negated_decoder_column_flips() {
        let mut m = linear_projection(3, 9, 4);
        let n_enc = m.encoder().len();
        let dec = m.layers_mut().nth(n_enc).unwrap();
        for r in 0..dec.weights.rows() {
            dec.weights.row_mut(r)[0] *= -1.0;
        }
        let x = [0.2; 9];
        assert_eq!(
            orientation_flip(&m, &x, Source::InputJacobian).unwrap(),
            Orientation::Flip
        );
        assert_eq!(
            orientation_flip(&m, &x, Source::LatentJacobian).unwrap(),
            Orientation::Flip
        );
    }

    #[test]
    fn latent_spectrum_matches_finite_difference_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        let mut seed = 0;
        while checked < 20 {
            seed += 1;
            let m = random_model(&[8, 5, 3], seed);
            let x: Vec<f64> = (0..8).map(|_| rng.gen()).collect();
            if crate::testutil::kink_margin(&m, &x) < 1e-3 {
                continue;
            }
            checked += 1;
            let z = m.encode(&x).unwrap();
            let fd =
                crate::jacobian::finite_diff_jacobian(|p| m.encode(&m.decode(p).unwrap()).unwrap(), &z, 1e-5).unwrap();
            let oracle = sort_by_modulus_desc(eigenvalues(&fd).unwrap());
            let s = spectrum_latent(&m, &x).unwrap();
            for (a, b) in s.eigenvalues.iter().zip(&oracle) {
                assert!((a - b).norm() < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn eig_diff_examples() {
        let a = real_spectrum(&[2.0]);
        let b = real_spectrum(&[1.0]);
        assert_eq!(eig_diff_ratio(&a, &a).unwrap(), 0.0);
        assert_eq!(eig_diff_ratio(&a, &b).unwrap(), 1.0);
        let two = real_spectrum(&[3.0, 1.0]);
        let zero = real_spectrum(&[0.0, 0.0]);
        assert_eq!(eig_diff_ratio(&two, &zero).unwrap(), 5.0);
        assert_eq!(eig_diff_norm_ratio(&two, &zero).unwrap(), 10f64.sqrt() / 2.0);
        assert!(eig_diff_ratio(&a, &two).is_err());
    }

    #[test]
    fn modulus_mean_examples() {
        assert_eq!(modulus_means(&real_spectrum(&[1.0, 1.0, 1.0])), (1.0, 1.0));
        let (a, g) = modulus_means(&real_spectrum(&[4.0, 1.0]));
        assert_eq!(a, 2.5);
        assert!((g - 2.0).abs() < 1e-15);
        let (_, g) = modulus_means(&real_spectrum(&[1.0, 0.0]));
        assert!((g - FLOOR.sqrt()).abs() < 1e-18);
    }

    #[test]
    fn log_modulus_examples() {
        let s = log_modulus_stats(&[real_spectrum(&[E, E]), real_spectrum(&[-E])]).unwrap();
        assert!((s.median - 1.0).abs() < 1e-15);
        assert!(s.stdev < 1e-15);
        let s = log_modulus_stats(&[real_spectrum(&[1.0, E * E])]).unwrap();
        assert!((s.median - 1.0).abs() < 1e-15);
        assert!((s.stdev - 1.0).abs() < 1e-15);
    }

    #[test]
    fn argument_examples() {
        let s = argument_stats(&[real_spectrum(&[3.0, 0.5, 0.0])]).unwrap();
        assert_eq!((s.whisker_lo, s.whisker_hi), (0.0, 0.0));
        let s = argument_stats(&[spectrum(&[c(0.0, 1.0)])]).unwrap();
        assert!((s.median - FRAC_PI_2).abs() < 1e-15);
        let vals: Vec<f64> = abs_arguments(&spectrum(&[c(0.3, 0.4), c(0.3, -0.4)])).collect();
        assert_eq!(vals[0], vals[1]);
        assert!((vals[0] - 0.4f64.atan2(0.3)).abs() < 1e-15);
        // Negative reals sit at pi, not -pi.
        let v: Vec<f64> = abs_arguments(&real_spectrum(&[-2.0])).collect();
        assert_eq!(v, vec![std::f64::consts::PI]);
    }

    #[test]
    fn frobenius_examples() {
        let a = Matrix::from_diag(&[1.0, 2.0]);
        let b = Matrix::from_diag(&[2.0, 1.0]);
        let same = frobenius_bound_check(&a, &a).unwrap();
        assert_eq!((same.lhs, same.rhs, same.holds), (0.0, 0.0, true));
        let r = frobenius_bound_check(&a, &b).unwrap();
        assert!(r.lhs < 1e-24);
        assert!((r.rhs - 2.0).abs() < 1e-12);
        assert!(r.holds);
        assert!(frobenius_bound_check(&a, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn frobenius_holds_for_semidefinite_pairs() {
        // For semidefinite matrices the modulus order is the value order, so
        // the bound is the Hoffman-Wielandt inequality.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let n = rng.gen_range(2..8);
            let mut gram = || {
                let m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                crate::linalg::matmul(&m.transpose(), &m).unwrap()
            };
            let (a, b) = (gram(), gram());
            assert!(frobenius_bound_check(&a, &b).unwrap().holds);
        }
    }

    #[test]
    fn modulus_order_can_break_the_bound_for_indefinite_pairs() {
        let a = Matrix::from_diag(&[3.0, -2.9]);
        let b = Matrix::from_diag(&[2.9, -3.0]);
        let r = frobenius_bound_check(&a, &b).unwrap();
        assert!((r.lhs - (36.0 + 5.8 * 5.8)).abs() < 1e-9);
        assert!((r.rhs - 0.02).abs() < 1e-12);
        assert!(!r.holds);
    }

    #[test]
    fn spectra_are_conjugate_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..20 {
            let m = random_model(&[10, 8, 5], seed);
            let x: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
            let p = analyze_point(&m, &x).unwrap();
            for s in [&p.input, &p.latent] {
                for e in &s.eigenvalues {
                    let partner = s
                        .eigenvalues
                        .iter()
                        .map(|f| (f - e.conj()).norm())
                        .fold(f64::INFINITY, f64::min);
                    assert!(partner < 1e-9);
                }
            }
        }
    }

    #[test]
    fn moduli_scale_with_output_layer() {
        let m = init_with_dims(&[12, 7, 3], 1, Activation::Identity, Activation::Identity).unwrap();
        let x = [0.4; 12];
        let base = analyze_point(&m, &x).unwrap();
        let factor = 2.5;
        let mut scaled = m.clone();
        let last = scaled.layers_mut().last().unwrap();
        last.weights = last.weights.scaled(factor);
        last.bias.iter_mut().for_each(|b| *b *= factor);
        let p = analyze_point(&scaled, &x).unwrap();
        for (a, b) in [(&base.input, &p.input), (&base.latent, &p.latent)] {
            for (e, f) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((factor * e.norm() - f.norm()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orientation_survives_positive_layer_scaling() {
        // Zero biases and ReLU hidden layers: positive homogeneity keeps the
        // activation pattern, so each Jacobian is rescaled by a positive factor.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for seed in 0..20 {
            let mut m = random_model(&[10, 6, 3], seed);
            for layer in m.layers_mut() {
                layer.bias.fill(0.0);
                layer.activation = match layer.activation {
                    Activation::Tanh => Activation::Identity,
                    a => a,
                };
            }
            let x: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
            let before = analyze_point(&m, &x).unwrap();
            let k = rng.gen_range(0..m.layers().count());
            let cpos = rng.gen_range(0.1..5.0);
            let layer = m.layers_mut().nth(k).unwrap();
            layer.weights = layer.weights.scaled(cpos);
            let after = analyze_point(&m, &x).unwrap();
            assert_eq!(before.orientation_input, after.orientation_input);
            assert_eq!(before.orientation_latent, after.orientation_latent);
        }
    }

    #[test]
    fn aggregate_counts_and_fractions() {
        let m = random_model(&[10, 6, 3], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<PointAnalysis> = (0..30)
            .map(|_| {
                let x: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
                analyze_point(&m, &x).unwrap()
            })
            .collect();
        for source in Source::ALL {
            let s = SpectralStats::aggregate(&points, source).unwrap().unwrap();
            assert_eq!(s.sample_count, 30);
            assert!((0.0..=1.0).contains(&s.orientation_flip_fraction));
            assert!((0.0..=1.0).contains(&s.degenerate_fraction));
            assert_eq!(s.log_modulus.count, 90);
            assert!(s.arith_mean_modulus >= s.geo_mean_modulus);
        }
        assert!(SpectralStats::aggregate(&[], Source::InputJacobian).unwrap().is_none());
    }

    fn arb_spectrum() -> impl Strategy<Value = Spectrum> {
        proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..8)
            .prop_map(|v| spectrum(&v.into_iter().map(|(a, b)| c(a, b)).collect::<Vec<_>>()))
    }

    proptest! {
        #[test]
        fn arith_mean_dominates_geo(s in arb_spectrum()) {
            let (a, g) = modulus_means(&s);
            prop_assert!(a >= g * (1.0 - 1e-12));
        }

        #[test]
        fn pooled_stats_ignore_point_order(
            spectra in proptest::collection::vec(arb_spectrum(), 1..10),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = spectra.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(log_modulus_stats(&spectra), log_modulus_stats(&shuffled));
            prop_assert_eq!(argument_stats(&spectra), argument_stats(&shuffled));
        }
    }
}
