//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's numerical kernels: spectra are
//! computed with explicit DFT sums, Tikhonov solutions with a Cholesky solve
//! of the normal equations, and AR stability with the Schur-Cohn recursion.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Window taps written out from their textbook definitions.
pub fn window_taps(hann: bool, l: usize) -> Vec<f64> {
    (0..l)
        .map(|t| {
            if hann {
                0.5 * (1.0 - (2.0 * PI * t as f64 / l as f64).cos())
            } else {
                1.0
            }
        })
        .collect()
}

/// Welch estimate by direct summation:
/// `S(f) = L/(P W) sum_p xh_p(f) xh_p(f)^H`, `xh_p(f) = (1/L) sum_t x w e^{-2 pi i t f / L}`.
pub fn naive_welch(x: &DMatrix<f64>, l: usize, overlap: f64, hann: bool) -> Vec<DMatrix<Complex64>> {
    let (n, len) = x.shape();
    let w = window_taps(hann, l);
    let w_pow = w.iter().map(|v| v * v).sum::<f64>() / l as f64;
    let step = ((l as f64) * (1.0 - overlap)).floor() as usize;
    let mut starts = Vec::new();
    let mut s = 0;
    while s + l <= len {
        starts.push(s);
        s += step;
    }
    let p = starts.len() as f64;
    (0..l)
        .map(|f| {
            let mut acc = DMatrix::<Complex64>::zeros(n, n);
            for &start in &starts {
                let xh: Vec<Complex64> = (0..n)
                    .map(|ch| {
                        let mut sum = Complex64::new(0.0, 0.0);
                        for t in 0..l {
                            let phase = -2.0 * PI * (t * f % l) as f64 / l as f64;
                            sum += Complex64::from_polar(x[(ch, start + t)] * w[t], phase);
                        }
                        sum / l as f64
                    })
                    .collect();
                for j in 0..n {
                    for k in 0..n {
                        acc[(j, k)] += xh[j] * xh[k].conj();
                    }
                }
            }
            acc * Complex64::new(l as f64 / (p * w_pow), 0.0)
        })
        .collect()
}

/// `(G^T G + lambda I)^{-1} G^T y` through a Cholesky factorization.
pub fn normal_equations(g: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = g.ncols();
    let a = g.transpose() * g + DMatrix::identity(n, n) * lambda;
    let chol = a.cholesky().expect("G^T G + lambda I is positive definite");
    chol.solve(&(g.transpose() * y))
}

/// Schur-Cohn step-down test for `z^p - a_1 z^{p-1} - ... - a_p`: true iff
/// every root has modulus strictly below `radius`.
pub fn ar_roots_inside(a: &[f64], radius: f64) -> bool {
    // Roots inside `radius` <=> roots of the polynomial with a_k / radius^k
    // inside the unit circle.
    let mut c: Vec<f64> = std::iter::once(1.0)
        .chain(a.iter().enumerate().map(|(k, ak)| -ak / radius.powi(k as i32 + 1)))
        .collect();
    while c.len() > 1 {
        let m = c.len() - 1;
        let k = c[m];
        if k.abs() >= 1.0 {
            return false;
        }
        let d = 1.0 - k * k;
        c = (0..m).map(|i| (c[i] - k * c[m - i]) / d).collect();
    }
    true
}

/// Plain recursion with Gaussian innovations; returns the largest magnitude
/// seen, or infinity once it passes `cap`.
pub fn peak_magnitude(coeffs: &[nalgebra::Matrix2<f64>], steps: usize, cap: f64, seed: u64) -> f64 {
    let mut r = rng(seed);
    let p = coeffs.len();
    let mut hist = vec![[0.0f64; 2]; p];
    let mut peak = 0.0f64;
    for _ in 0..steps {
        let mut z: [f64; 2] = [StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)];
        for (k, a) in coeffs.iter().enumerate() {
            let prev = hist[hist.len() - 1 - k];
            for i in 0..2 {
                for j in 0..2 {
                    z[i] += a[(i, j)] * prev[j];
                }
            }
        }
        peak = peak.max(z[0].abs()).max(z[1].abs());
        if !(peak < cap) {
            return f64::INFINITY;
        }
        hist.push(z);
    }
    peak
}

pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn spectrum_rel_diff(a: &[DMatrix<Complex64>], b: &[DMatrix<Complex64>]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    let den: f64 = b.iter().map(|y| y.norm_squared()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}
