//! Eigenvalues of a general real square matrix.
//!
//! Three stages: diagonal similarity balancing, orthogonal reduction to upper
//! Hessenberg form with Householder reflectors, then the Francis implicit
//! double-shift QR iteration on the Hessenberg matrix. Only eigenvalues are
//! produced; no Schur vectors are accumulated.

use super::{Complex64, ComplexVec, LinalgError, Matrix};

const RADIX: f64 = 2.0;

/// Total Francis sweeps allowed per unit of matrix order.
const SWEEPS_PER_ORDER: usize = 30;

/// All `n` eigenvalues of `a`, with multiplicity, in no particular order.
/// Complex eigenvalues of the real input come out in exact conjugate pairs.
pub fn eigenvalues(a: &Matrix) -> Result<ComplexVec, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            op: "eigenvalues",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.all_finite() {
        return Err(LinalgError::InvalidData(
            "eigenvalues: input has non-finite entries".into(),
        ));
    }
    let n = a.rows();
    if n == 1 {
        return Ok(vec![Complex64::new(a[(0, 0)], 0.0)]);
    }
    let mut h = Square::from_matrix(a);
    balance(&mut h);
    reduce_to_hessenberg(&mut h);
    hessenberg_qr(&mut h)
}

/// Scratch storage indexed as `h.at(i, j)`.
struct Square {
    n: usize,
    data: Vec<f64>,
}

impl Square {
    fn from_matrix(a: &Matrix) -> Self {
        Self {
            n: a.rows(),
            data: a.as_slice().to_vec(),
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// Iterative row/column scaling by powers of two so that row and column
/// norms are comparable. Exact in floating point; the spectrum is unchanged.
fn balance(h: &mut Square) {
    let n = h.n;
    let sqrdx = RADIX * RADIX;
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += h.at(j, i).abs();
                    r += h.at(i, j).abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    h.set(i, j, h.at(i, j) * inv);
                }
                for j in 0..n {
                    h.set(j, i, h.at(j, i) * f);
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// Householder similarity reduction to upper Hessenberg form.
fn reduce_to_hessenberg(h: &mut Square) {
    let n = h.n;
    let mut ort = vec![0.0; n];
    for m in 1..n.saturating_sub(1) {
        let scale: f64 = (m..n).map(|i| h.at(i, m - 1).abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut norm_sq = 0.0;
        for i in (m..n).rev() {
            ort[i] = h.at(i, m - 1) / scale;
            norm_sq += ort[i] * ort[i];
        }
        let mut g = norm_sq.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        let hh = norm_sq - ort[m] * g;
        ort[m] -= g;

        // Left application: rows m..n.
        for j in m..n {
            let mut f = 0.0;
            for i in (m..n).rev() {
                f += ort[i] * h.at(i, j);
            }
            f /= hh;
            for i in m..n {
                h.set(i, j, h.at(i, j) - f * ort[i]);
            }
        }
        // Right application: columns m..n.
        for i in 0..n {
            let mut f = 0.0;
            for j in (m..n).rev() {
                f += ort[j] * h.at(i, j);
            }
            f /= hh;
            for j in m..n {
                h.set(i, j, h.at(i, j) - f * ort[j]);
            }
        }
        h.set(m, m - 1, scale * g);
        for i in m + 1..n {
            h.set(i, m - 1, 0.0);
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix, deflating from the
/// bottom. Exceptional shifts are applied after 10 and 20 stagnant sweeps on
/// the same active block.
fn hessenberg_qr(h: &mut Square) -> Result<ComplexVec, LinalgError> {
    let n = h.n;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h.at(i, j).abs();
        }
    }

    let max_sweeps = SWEEPS_PER_ORDER * n;
    let mut total_sweeps = 0usize;
    // `hi` is the bottom row of the active (unreduced) block; the loop runs
    // while at least one eigenvalue remains.
    let mut remaining = n;
    let mut shift_acc = 0.0;
    while remaining > 0 {
        let hi = remaining - 1;
        let mut its = 0usize;
        loop {
            // Find the start of the trailing unreduced block.
            let mut l = hi;
            while l > 0 {
                let mut s = h.at(l - 1, l - 1).abs() + h.at(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if h.at(l, l - 1).abs() <= f64::EPSILON * s {
                    h.set(l, l - 1, 0.0);
                    break;
                }
                l -= 1;
            }

            let x = h.at(hi, hi);
            if l == hi {
                wr[hi] = x + shift_acc;
                wi[hi] = 0.0;
                remaining -= 1;
                break;
            }
            let y = h.at(hi - 1, hi - 1);
            let w = h.at(hi, hi - 1) * h.at(hi - 1, hi);
            if l + 1 == hi {
                // 2x2 block: solve its characteristic polynomial directly.
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + shift_acc;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    wr[hi - 1] = x + z;
                    wr[hi] = if z != 0.0 { x - w / z } else { x + z };
                    wi[hi - 1] = 0.0;
                    wi[hi] = 0.0;
                } else {
                    wr[hi - 1] = x + p;
                    wr[hi] = x + p;
                    wi[hi - 1] = z;
                    wi[hi] = -z;
                }
                remaining -= 2;
                break;
            }

            if total_sweeps >= max_sweeps {
                return Err(LinalgError::NoConvergence {
                    converged: n - remaining,
                    n,
                    iterations: total_sweeps,
                });
            }

            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                shift_acc += x;
                for i in 0..=hi {
                    h.set(i, i, h.at(i, i) - x);
                }
                let s = h.at(hi, hi - 1).abs() + h.at(hi - 1, hi - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total_sweeps += 1;

            francis_step(h, l, hi, x, y, w);
        }
    }

    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}

/// One implicit double-shift sweep on rows/columns `l..=hi`, with the shifts
/// encoded by the trailing 2x2 block quantities `x`, `y`, `w`.
fn francis_step(h: &mut Square, l: usize, hi: usize, mut x: f64, mut y: f64, w: f64) {
    // Look for two consecutive small subdiagonal elements.
    let mut m = hi - 2;
    let (mut p, mut q, mut r);
    loop {
        let z = h.at(m, m);
        let rr = x - z;
        let ss = y - z;
        p = (rr * ss - w) / h.at(m + 1, m) + h.at(m, m + 1);
        q = h.at(m + 1, m + 1) - z - rr - ss;
        r = h.at(m + 2, m + 1);
        let s = p.abs() + q.abs() + r.abs();
        p /= s;
        q /= s;
        r /= s;
        if m == l {
            break;
        }
        let u = h.at(m, m - 1).abs() * (q.abs() + r.abs());
        let v = p.abs() * (h.at(m - 1, m - 1).abs() + z.abs() + h.at(m + 1, m + 1).abs());
        if u <= f64::EPSILON * v {
            break;
        }
        m -= 1;
    }

    for i in m + 2..=hi {
        h.set(i, i - 2, 0.0);
        if i != m + 2 {
            h.set(i, i - 3, 0.0);
        }
    }

    let mut z;
    for k in m..hi {
        if k != m {
            p = h.at(k, k - 1);
            q = h.at(k + 1, k - 1);
            r = if k != hi - 1 { h.at(k + 2, k - 1) } else { 0.0 };
            x = p.abs() + q.abs() + r.abs();
            if x != 0.0 {
                p /= x;
                q /= x;
                r /= x;
            }
        }
        let s = (p * p + q * q + r * r).sqrt().copysign(p);
        if s == 0.0 {
            continue;
        }
        if k == m {
            if l != m {
                h.set(k, k - 1, -h.at(k, k - 1));
            }
        } else {
            h.set(k, k - 1, -s * x);
        }
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;

        // Row modification.
        for j in k..=hi {
            let mut pp = h.at(k, j) + q * h.at(k + 1, j);
            if k != hi - 1 {
                pp += r * h.at(k + 2, j);
                h.set(k + 2, j, h.at(k + 2, j) - pp * z);
            }
            h.set(k + 1, j, h.at(k + 1, j) - pp * y);
            h.set(k, j, h.at(k, j) - pp * x);
        }
        // Column modification.
        let mmin = hi.min(k + 3);
        for i in l..=mmin {
            let mut pp = x * h.at(i, k) + y * h.at(i, k + 1);
            if k != hi - 1 {
                pp += z * h.at(i, k + 2);
                h.set(i, k + 2, h.at(i, k + 2) - pp * r);
            }
            h.set(i, k + 1, h.at(i, k + 1) - pp * q);
            h.set(i, k, h.at(i, k) - pp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matmul, sort_by_modulus_desc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(a: &Matrix) -> ComplexVec {
        sort_by_modulus_desc(eigenvalues(a).unwrap())
    }

    fn assert_close(got: &[Complex64], want: &[Complex64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() <= tol, "got {got:?}\nwant {want:?}");
        }
    }

    /// Gauss-Jordan inverse used only to build P diag P^-1 test matrices.
    fn inverse(a: &Matrix) -> Matrix {
        let n = a.rows();
        let mut aug = Matrix::from_fn(n, 2 * n, |i, j| {
            if j < n {
                a[(i, j)]
            } else if j - n == i {
                1.0
            } else {
                0.0
            }
        });
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| aug[(x, c)].abs().total_cmp(&aug[(y, c)].abs()))
                .unwrap();
            for j in 0..2 * n {
                let t = aug[(c, j)];
                aug[(c, j)] = aug[(p, j)];
                aug[(p, j)] = t;
            }
            let piv = aug[(c, c)];
            for j in 0..2 * n {
                aug[(c, j)] /= piv;
            }
            for r in 0..n {
                if r != c {
                    let f = aug[(r, c)];
                    for j in 0..2 * n {
                        aug[(r, j)] -= f * aug[(c, j)];
                    }
                }
            }
        }
        Matrix::from_fn(n, n, |i, j| aug[(i, j + n)])
    }

    fn conjugate_closed(v: &[Complex64], tol: f64) -> bool {
        let mut used = vec![false; v.len()];
        for (i, a) in v.iter().enumerate() {
            if a.im.abs() <= tol {
                used[i] = true;
                continue;
            }
            if used[i] {
                continue;
            }
            let partner = (0..v.len()).find(|&j| !used[j] && j != i && (v[j] - a.conj()).norm() <= tol);
            match partner {
                Some(j) => {
                    used[i] = true;
                    used[j] = true;
                }
                None => return false,
            }
        }
        true
    }

    #[test]
    fn trivial_spectra() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        assert_close(
            &sorted(&Matrix::from_diag(&[3.0, 2.0])),
            &[c(3.0, 0.0), c(2.0, 0.0)],
            1e-14,
        );
        assert_close(
            &sorted(&Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]])),
            &[c(0.0, 1.0), c(0.0, -1.0)],
            1e-14,
        );
        assert_close(
            &sorted(&Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]])),
            &[c(0.0, 0.0), c(0.0, 0.0)],
            1e-14,
        );
        assert_close(&sorted(&Matrix::from_rows(&[&[-4.5]])), &[c(-4.5, 0.0)], 0.0);
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(
            eigenvalues(&Matrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn recovers_constructed_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            // Four real eigenvalues and two conjugate pairs.
            let reals: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let pairs: Vec<(f64, f64)> = (0..2)
                .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(0.1..2.0)))
                .collect();
            let mut block = Matrix::zeros(8, 8);
            let mut want = Vec::new();
            for (i, &r) in reals.iter().enumerate() {
                block[(i, i)] = r;
                want.push(Complex64::new(r, 0.0));
            }
            for (k, &(a, b)) in pairs.iter().enumerate() {
                let i = 4 + 2 * k;
                block[(i, i)] = a;
                block[(i, i + 1)] = b;
                block[(i + 1, i)] = -b;
                block[(i + 1, i + 1)] = a;
                want.push(Complex64::new(a, b));
                want.push(Complex64::new(a, -b));
            }
            let p = Matrix::from_fn(8, 8, |i, j| rng.gen_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 });
            let a = matmul(&matmul(&p, &block).unwrap(), &inverse(&p)).unwrap();
            let got = sorted(&a);
            let want = sort_by_modulus_desc(want);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).norm() < 1e-7, "trial {trial}: {got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn trace_and_conjugate_closure_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [2usize, 3, 5, 10, 17, 40] {
            for _ in 0..10 {
                let a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                let ev = eigenvalues(&a).unwrap();
                assert_eq!(ev.len(), n);
                let tr: f64 = ev.iter().map(|l| l.re).sum();
                let scale = crate::linalg::frobenius_norm(&a).max(1.0);
                assert!((tr - a.trace()).abs() < 1e-7 * scale);
                assert!(conjugate_closed(&ev, 1e-9), "{ev:?}");
            }
        }
    }

    #[test]
    fn handles_badly_scaled_and_structured_inputs() {
        // Companion matrix of (x-1)(x-2)(x-3)(x-4): needs balancing to be accurate.
        let a = Matrix::from_rows(&[
            &[10.0, -35.0, 50.0, -24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let got = sorted(&a);
        for (g, w) in got.iter().zip([4.0, 3.0, 2.0, 1.0]) {
            assert!((g - Complex64::new(w, 0.0)).norm() < 1e-9, "{got:?}");
        }

        // Cyclic permutation: eigenvalues are the 5th roots of unity.
        let perm = Matrix::from_fn(5, 5, |i, j| if (i + 1) % 5 == j { 1.0 } else { 0.0 });
        let ev = eigenvalues(&perm).unwrap();
        for l in &ev {
            assert!((l.norm() - 1.0).abs() < 1e-12);
            assert!((l.powu(5) - 1.0).norm() < 1e-11);
        }

        // Rank one with zero diagonal blocks.
        let u = [1.0, 2.0, 0.0, -1.0, 3.0, 0.5];
        let v = [0.5, 0.0, 1.0, 1.0, -2.0, 1.0];
        let r1 = Matrix::from_fn(6, 6, |i, j| u[i] * v[j]);
        let got = sorted(&r1);
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((got[0] - Complex64::new(dot, 0.0)).norm() < 1e-10);
        assert!(got[1..].iter().all(|l| l.norm() < 1e-7));
    }
}
