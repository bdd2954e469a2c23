//! Pixel samplers for the synthetic datasets.
//!
//! All draws come from a ChaCha8 stream seeded with the dataset seed. Normal
//! variates use the ziggurat sampler from `rand_distr`; gamma and beta
//! variates are built here on top of it.

use rand::Rng;
use rand_distr::StandardNormal;

use super::DatasetKind;

/// One pixel value in `[0, 1]` drawn from `kind`. `Mnist` has no generator
/// and is rejected before reaching this point.
pub(crate) fn draw_pixel<R: Rng + ?Sized>(kind: &DatasetKind, rng: &mut R) -> f64 {
    match *kind {
        DatasetKind::Bernoulli { p } => bernoulli(rng, p),
        DatasetKind::Beta { alpha, beta } => beta_variate(rng, alpha, beta),
        DatasetKind::TruncatedNormal { mu, sigma } => truncated_normal(rng, mu, sigma, 0.0, 1.0),
        DatasetKind::Uniform => rng.gen::<f64>(),
        DatasetKind::Mnist => unreachable!("MNIST pixels are loaded, not sampled"),
    }
}

pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> f64 {
    if rng.gen::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Rejection sampling of `N(mu, sigma^2)` restricted to `[lo, hi]`.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let x = mu + sigma * z;
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
}

/// Marsaglia-Tsang squeeze sampler for `Gamma(shape, 1)`. Shapes below one
/// are boosted: `G(a) = G(a + 1) * U^(1/a)`.
pub fn gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let boosted = gamma_variate(rng, shape + 1.0);
        let u: f64 = rng.gen();
        return boosted * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.gen();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// `Beta(alpha, beta)` as `X / (X + Y)` with independent gamma variates.
pub fn beta_variate<R: Rng + ?Sized>(rng: &mut R, alpha: f64, beta: f64) -> f64 {
    loop {
        let x = gamma_variate(rng, alpha);
        let y = gamma_variate(rng, beta);
        let s = x + y;
        // Both draws can underflow to zero for very small shapes.
        if s > 0.0 {
            return (x / s).clamp(0.0, 1.0);
        }
    }
}
