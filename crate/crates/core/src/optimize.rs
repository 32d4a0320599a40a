//! Derivative-free minimization of the reconstruction errors over `lambda`.
//!
//! A geometric grid scan in `log10 lambda` locates the best sample, then a
//! golden-section search refines inside the two neighbouring grid cells.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::inverse::{eps_s, eps_x, reconstruct, ErrorProfile, LambdaCurve, RegularizedInverter};
use crate::spectra::{welch, CrossSpectrum, WelchConfig};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub coarse_points: usize,
    pub tol_log10: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            log10_lo: -8.0,
            log10_hi: 2.0,
            coarse_points: 60,
            tol_log10: 1e-3,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.log10_lo < self.log10_hi) {
            return Err(Error::InvalidConfig(format!(
                "empty lambda bracket [{}, {}]",
                self.log10_lo, self.log10_hi
            )));
        }
        if self.coarse_points < 3 {
            return Err(Error::InvalidConfig("need at least 3 coarse points".into()));
        }
        if !(self.tol_log10 > 0.0) {
            return Err(Error::InvalidConfig("tol_log10 must be positive".into()));
        }
        Ok(())
    }

    /// Same bracket shifted by `log10(scale)`.
    pub fn scaled(&self, scale: f64) -> Self {
        let shift = scale.log10();
        Self {
            log10_lo: self.log10_lo + shift,
            log10_hi: self.log10_hi + shift,
            ..*self
        }
    }

    /// Grid abscissae in `log10 lambda`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.coarse_points;
        (0..n)
            .map(|k| self.log10_lo + (self.log10_hi - self.log10_lo) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub lambda_star: f64,
    pub eps_star: f64,
    pub n_evals: usize,
    /// Coarse scan trace.
    pub curve: LambdaCurve,
    pub converged: bool,
    /// The coarse minimum sat on an end of the bracket.
    pub boundary: bool,
}

pub fn minimize_scalar<F>(mut f: F, cfg: &OptimConfig) -> Result<OptimResult>
where
    F: FnMut(f64) -> f64,
{
    try_minimize_scalar(|lambda| Ok(f(lambda)), cfg)
}

/// Fallible-objective variant of [`minimize_scalar`].
pub fn try_minimize_scalar<F>(mut f: F, cfg: &OptimConfig) -> Result<OptimResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    cfg.validate()?;
    let mut n_evals = 0;
    let mut eval = |u: f64| -> Result<f64> {
        let lambda = 10f64.powf(u);
        n_evals += 1;
        let v = f(lambda)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { lambda });
        }
        Ok(v)
    };

    let grid = cfg.grid();
    let mut values = Vec::with_capacity(grid.len());
    for &u in &grid {
        values.push(eval(u)?);
    }
    // First index attaining the minimum.
    let mut k = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[k] {
            k = i;
        }
    }
    let boundary = k == 0 || k == grid.len() - 1;
    let mut best_u = grid[k];
    let mut best_v = values[k];

    let mut a = grid[k.saturating_sub(1)];
    let mut b = grid[(k + 1).min(grid.len() - 1)];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut iters = 0;
    while b - a >= cfg.tol_log10 && iters < MAX_GOLDEN_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
        iters += 1;
    }
    for (u, v) in [(c, fc), (d, fd)] {
        if v < best_v {
            best_u = u;
            best_v = v;
        }
    }

    Ok(OptimResult {
        lambda_star: 10f64.powf(best_u),
        eps_star: best_v,
        n_evals,
        curve: LambdaCurve {
            lambdas: grid.iter().map(|u| 10f64.powf(*u)).collect(),
            eps_values: values,
        },
        converged: b - a < cfg.tol_log10,
        boundary,
    })
}

/// Optimal `lambda` for the time series and for the cross-spectrum, computed
/// by explicit reconstruction and Welch estimation at every trial value.
/// The bracket in `cfg` is relative to `s_max^2` of the leadfield.
pub fn find_optimal_lambdas(
    inv: &RegularizedInverter,
    y: &DMatrix<f64>,
    x_true: &DMatrix<f64>,
    s_true: &CrossSpectrum,
    welch_cfg: &WelchConfig,
    cfg: &OptimConfig,
) -> Result<(OptimResult, OptimResult)> {
    let bracket = cfg.scaled(inv.s_max().powi(2));
    let best_x = try_minimize_scalar(|lambda| eps_x(&reconstruct(inv, y, lambda)?, x_true), &bracket)?;
    let best_s = try_minimize_scalar(
        |lambda| eps_s(&welch(&reconstruct(inv, y, lambda)?, welch_cfg)?, s_true),
        &bracket,
    )?;
    Ok((best_x, best_s))
}

/// Same optimization as [`find_optimal_lambdas`], evaluated through a
/// precomputed [`ErrorProfile`].
pub fn find_optimal_lambdas_profiled(
    inv: &RegularizedInverter,
    profile: &ErrorProfile,
    cfg: &OptimConfig,
) -> Result<(OptimResult, OptimResult)> {
    let bracket = cfg.scaled(inv.s_max().powi(2));
    let best_x = minimize_scalar(|lambda| profile.eps_x(lambda), &bracket)?;
    let best_s = minimize_scalar(|lambda| profile.eps_s(lambda), &bracket)?;
    Ok((best_x, best_s))
}
