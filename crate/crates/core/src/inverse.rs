//! Tikhonov inversion and the two reconstruction-error functionals.
//!
//! The leadfield is factored once as `G = U diag(s) V^T`; the regularized
//! solution for any `lambda` is then `x = V diag(s / (s^2 + lambda)) U^T y`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectra::{welch, CrossSpectrum, WelchConfig};

/// Singular values below `RANK_TOL * s_max` are dropped.
pub const RANK_TOL: f64 = 1e-12;

/// Thin SVD of the leadfield, reusable across every `lambda`.
#[derive(Debug, Clone)]
pub struct RegularizedInverter {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
    n_sources: usize,
}

impl RegularizedInverter {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn s_max(&self) -> f64 {
        self.s[0]
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn n_sensors(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    /// `U diag(s) V^T`.
    pub fn recompose(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose()
    }

    /// Tikhonov filter factors `s_i / (s_i^2 + lambda)`.
    pub fn filter(&self, lambda: f64) -> DVector<f64> {
        self.s.map(|si| si / (si * si + lambda))
    }

    /// Projects sensor data onto the left singular vectors, `U^T y`.
    pub fn sensor_coordinates(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.nrows() != self.n_sensors() {
            return Err(Error::DimensionMismatch(format!(
                "data has {} rows, leadfield has {} sensors",
                y.nrows(),
                self.n_sensors()
            )));
        }
        Ok(self.u.tr_mul(y))
    }
}

pub fn build_inverter(g: &DMatrix<f64>) -> Result<RegularizedInverter> {
    if g.is_empty() {
        return Err(Error::EmptyInput);
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::SvdFailure("leadfield contains non-finite entries".into()));
    }
    let svd = g
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::SvdFailure("iteration did not converge".into()))?;
    let u = svd.u.ok_or_else(|| Error::SvdFailure("missing U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::SvdFailure("missing V^T".into()))?;

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s_max = svd.singular_values[order[0]];
    if !(s_max > 0.0) {
        return Err(Error::SvdFailure("leadfield is identically zero".into()));
    }
    order.retain(|&i| svd.singular_values[i] > RANK_TOL * s_max);

    let s = DVector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i]));
    let u = u.select_columns(&order);
    let v = v_t.select_rows(&order).transpose();
    Ok(RegularizedInverter {
        u,
        s,
        v,
        n_sources: g.ncols(),
    })
}

/// Regularized source estimate for every column of `y`.
pub fn reconstruct(inv: &RegularizedInverter, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be nonnegative, got {lambda}")));
    }
    let mut coords = inv.sensor_coordinates(y)?;
    let phi = inv.filter(lambda);
    for (mut row, f) in coords.row_iter_mut().zip(phi.iter()) {
        row *= *f;
    }
    Ok(&inv.v * coords)
}

/// `sum_t |x_rec - x_true|^2 / (sum_t |x_rec|^2 + sum_t |x_true|^2)`.
pub fn eps_x(x_rec: &DMatrix<f64>, x_true: &DMatrix<f64>) -> Result<f64> {
    if x_rec.shape() != x_true.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            x_rec.shape(),
            x_true.shape()
        )));
    }
    let den = x_rec.norm_squared() + x_true.norm_squared();
    if den == 0.0 {
        return Err(Error::BothZero);
    }
    Ok((x_rec - x_true).norm_squared() / den)
}

/// Spectrum analogue of [`eps_x`] with per-frequency Frobenius norms.
pub fn eps_s(s_rec: &CrossSpectrum, s_true: &CrossSpectrum) -> Result<f64> {
    if s_rec.n_channels() != s_true.n_channels() || s_rec.n_freqs() != s_true.n_freqs() {
        return Err(Error::ShapeMismatch(format!(
            "{} channels x {} bins vs {} channels x {} bins",
            s_rec.n_channels(),
            s_rec.n_freqs(),
            s_true.n_channels(),
            s_true.n_freqs()
        )));
    }
    let den = s_rec.frobenius_energy() + s_true.frobenius_energy();
    if den == 0.0 {
        return Err(Error::BothZero);
    }
    let num: f64 = s_rec
        .slices()
        .iter()
        .zip(s_true.slices())
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok(num / den)
}

/// Sampled error curve over `lambda`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LambdaCurve {
    pub lambdas: Vec<f64>,
    pub eps_values: Vec<f64>,
}

impl LambdaCurve {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn min_eps(&self) -> f64 {
        self.eps_values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Both error functionals reduced to sums over singular components, so that
/// each `lambda` costs `O(r^2)` instead of a reconstruction and a Welch pass.
///
/// With `c = U^T y` the reconstruction is `V diag(phi) c`, and because the
/// Welch estimator is quadratic in its input,
/// `S^{x_lambda}(f) = V diag(phi) B(f) diag(phi) V^T` with `B = welch(c)`.
/// Orthonormality of `V`'s columns reduces every Frobenius norm and inner
/// product to the `r x r` coordinates.
#[derive(Debug, Clone)]
pub struct ErrorProfile {
    s: Vec<f64>,
    /// `sum_t c_i(t)^2`
    coord_energy: Vec<f64>,
    /// `sum_t c_i(t) (V^T x)_i(t)`
    coord_cross: Vec<f64>,
    x_energy: f64,
    /// `sum_f |B_ij(f)|^2`, row-major `r x r`
    spec_energy: Vec<f64>,
    /// `sum_f Re(conj(B_ij(f)) (V^T S^x V)_ij(f))`, row-major `r x r`
    spec_cross: Vec<f64>,
    s_true_energy: f64,
}

impl ErrorProfile {
    /// `x_true` is the full `N x T` source array; its all-zero rows are
    /// skipped when forming the true spectrum.
    pub fn new(
        inv: &RegularizedInverter,
        y: &DMatrix<f64>,
        x_true: &DMatrix<f64>,
        welch_cfg: &WelchConfig,
    ) -> Result<Self> {
        if x_true.nrows() != inv.n_sources() || x_true.ncols() != y.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "source array {:?} vs {} sources x {} samples",
                x_true.shape(),
                inv.n_sources(),
                y.ncols()
            )));
        }
        let support: Vec<usize> = (0..x_true.nrows())
            .filter(|&q| x_true.row(q).iter().any(|&v| v != 0.0))
            .collect();
        if support.is_empty() {
            return Err(Error::ZeroSignal("true source activity is zero".into()));
        }
        let x_sub = x_true.select_rows(&support);
        let s_sub = welch(&x_sub, welch_cfg)?;
        Self::from_parts(inv, y, x_true, &support, &s_sub, welch_cfg)
    }

    /// Same as [`ErrorProfile::new`] with the support spectrum given
    /// explicitly: `s_sub` is the spectrum of rows `support` of `x_true`.
    pub fn from_parts(
        inv: &RegularizedInverter,
        y: &DMatrix<f64>,
        x_true: &DMatrix<f64>,
        support: &[usize],
        s_sub: &CrossSpectrum,
        welch_cfg: &WelchConfig,
    ) -> Result<Self> {
        let r = inv.rank();
        let coords = inv.sensor_coordinates(y)?;
        let x_coords = inv.v().tr_mul(x_true);
        let coord_energy: Vec<f64> = coords.row_iter().map(|row| row.norm_squared()).collect();
        let coord_cross: Vec<f64> = coords
            .row_iter()
            .zip(x_coords.row_iter())
            .map(|(a, b)| a.dot(&b))
            .collect();

        let b = welch(&coords, welch_cfg)?;
        if b.n_freqs() != s_sub.n_freqs() {
            return Err(Error::ShapeMismatch("true spectrum uses a different segment length".into()));
        }
        // Rows of V restricted to the support, as a complex k x r block.
        let v_sub = inv.v().select_rows(support).map(|v| Complex64::new(v, 0.0));
        let v_sub_t = v_sub.transpose();

        let mut spec_energy = vec![0.0; r * r];
        let mut spec_cross = vec![0.0; r * r];
        for (bf, sf) in b.slices().iter().zip(s_sub.slices()) {
            let c = &v_sub_t * sf * &v_sub;
            for i in 0..r {
                for j in 0..r {
                    let bij = bf[(i, j)];
                    spec_energy[i * r + j] += bij.norm_sqr();
                    spec_cross[i * r + j] += (bij.conj() * c[(i, j)]).re;
                }
            }
        }

        Ok(Self {
            s: inv.singular_values().iter().copied().collect(),
            coord_energy,
            coord_cross,
            x_energy: x_true.norm_squared(),
            spec_energy,
            spec_cross,
            s_true_energy: s_sub.frobenius_energy(),
        })
    }

    fn filter(&self, lambda: f64) -> Vec<f64> {
        self.s.iter().map(|si| si / (si * si + lambda)).collect()
    }

    pub fn eps_x(&self, lambda: f64) -> f64 {
        let phi = self.filter(lambda);
        let mut rec = 0.0;
        let mut cross = 0.0;
        for i in 0..phi.len() {
            rec += phi[i] * phi[i] * self.coord_energy[i];
            cross += phi[i] * self.coord_cross[i];
        }
        let num = (rec - 2.0 * cross + self.x_energy).max(0.0);
        num / (rec + self.x_energy)
    }

    pub fn eps_s(&self, lambda: f64) -> f64 {
        let phi = self.filter(lambda);
        let r = phi.len();
        let mut rec = 0.0;
        let mut cross = 0.0;
        for i in 0..r {
            let row_e = &self.spec_energy[i * r..(i + 1) * r];
            let row_c = &self.spec_cross[i * r..(i + 1) * r];
            let mut acc_e = 0.0;
            let mut acc_c = 0.0;
            for j in 0..r {
                acc_e += phi[j] * phi[j] * row_e[j];
                acc_c += phi[j] * row_c[j];
            }
            rec += phi[i] * phi[i] * acc_e;
            cross += phi[i] * acc_c;
        }
        let num = (rec - 2.0 * cross + self.s_true_energy).max(0.0);
        num / (rec + self.s_true_energy)
    }
}
