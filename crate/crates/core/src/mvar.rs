//! Two-channel MVAR source generator.
//!
//! Each model drives a pair `(z1, z2)` with unidirectional coupling from
//! channel 1 to channel 2:
//!
//! ```text
//! z(t) = sum_{k=1..P} A(k) z(t-k) + e(t),   A(k) = [[a11, 0], [a21, a22]]
//! ```
//!
//! Candidate models are rejection-sampled until they are stable and the two
//! simulated channels are balanced in energy, then the pair is normalized by
//! the mean of the per-channel standard deviations.

use nalgebra::{DMatrix, Matrix2};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Knobs for simulation and rejection sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct MvarSettings {
    /// Samples discarded from the start of every simulation.
    pub burn_in: usize,
    /// Companion eigenvalues must satisfy `|mu| < 1 - stability_margin`.
    pub stability_margin: f64,
    pub overflow_guard: f64,
    pub max_attempts: usize,
}

impl Default for MvarSettings {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            stability_margin: 1e-6,
            overflow_guard: 1e12,
            max_attempts: 10_000,
        }
    }
}

/// Order-P lower-triangular 2x2 autoregressive model.
#[derive(Debug, Clone, PartialEq)]
pub struct MvarModel {
    pub gamma: f64,
    coeffs: Vec<Matrix2<f64>>,
}

impl MvarModel {
    /// Builds a model from explicit lag matrices. The upper-right entry of
    /// every matrix must be zero.
    pub fn from_coeffs(gamma: f64, coeffs: Vec<Matrix2<f64>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidConfig("MVAR order must be >= 1".into()));
        }
        if let Some(k) = coeffs.iter().position(|a| a[(0, 1)] != 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lag {} has a nonzero [1,2] entry; coupling must run from channel 1 to 2",
                k + 1
            )));
        }
        Ok(Self { gamma, coeffs })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Lag matrices `A(1), ..., A(P)`.
    pub fn coeffs(&self) -> &[Matrix2<f64>] {
        &self.coeffs
    }

    /// The `2P x 2P` companion matrix of the recursion.
    pub fn companion(&self) -> DMatrix<f64> {
        let p = self.order();
        let dim = 2 * p;
        let mut c = DMatrix::zeros(dim, dim);
        for (k, a) in self.coeffs.iter().enumerate() {
            c.fixed_view_mut::<2, 2>(0, 2 * k).copy_from(a);
        }
        for i in 2..dim {
            c[(i, i - 2)] = 1.0;
        }
        c
    }

    pub fn spectral_radius(&self) -> f64 {
        self.companion()
            .complex_eigenvalues()
            .iter()
            .map(|mu| mu.norm())
            .fold(0.0, f64::max)
    }
}

/// Draws the three free entries of every lag matrix i.i.d. from `N(0, gamma^2)`.
/// Stability is not enforced here.
pub fn sample_coefficients<R: Rng + ?Sized>(gamma: f64, order: usize, rng: &mut R) -> Result<MvarModel> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
    }
    if order == 0 {
        return Err(Error::InvalidConfig("MVAR order must be >= 1".into()));
    }
    let dist = Normal::new(0.0, gamma).expect("gamma validated above");
    let coeffs = (0..order)
        .map(|_| {
            let a11 = dist.sample(rng);
            let a21 = dist.sample(rng);
            let a22 = dist.sample(rng);
            Matrix2::new(a11, 0.0, a21, a22)
        })
        .collect();
    Ok(MvarModel { gamma, coeffs })
}

/// True iff every companion eigenvalue lies strictly inside the circle of
/// radius `1 - margin`.
pub fn is_stable(model: &MvarModel, margin: f64) -> bool {
    let r = model.spectral_radius();
    r.is_finite() && r < 1.0 - margin
}

/// Runs the recursion from a zero state for `burn_in + length` steps with
/// unit-variance white innovations and returns the last `length` samples as a
/// `2 x length` array.
pub fn simulate<R: Rng + ?Sized>(
    model: &MvarModel,
    length: usize,
    burn_in: usize,
    overflow_guard: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if length == 0 {
        return Err(Error::EmptyInput);
    }
    let p = model.order();
    let total = burn_in + length;
    // history[t] holds z(t); the first p slots are the zero initial state.
    let mut history: Vec<[f64; 2]> = vec![[0.0; 2]; p + total];
    for t in p..p + total {
        let e1: f64 = StandardNormal.sample(rng);
        let e2: f64 = StandardNormal.sample(rng);
        let mut z1 = e1;
        let mut z2 = e2;
        for (k, a) in model.coeffs.iter().enumerate() {
            let prev = history[t - k - 1];
            z1 += a[(0, 0)] * prev[0];
            z2 += a[(1, 0)] * prev[0] + a[(1, 1)] * prev[1];
        }
        let magnitude = z1.abs().max(z2.abs());
        if !(magnitude <= overflow_guard) {
            return Err(Error::InstabilityDetected {
                sample: t - p,
                magnitude,
            });
        }
        history[t] = [z1, z2];
    }
    let tail = &history[p + burn_in..];
    Ok(DMatrix::from_fn(2, length, |ch, t| tail[t][ch]))
}

fn channel_norm(z: &DMatrix<f64>, ch: usize) -> f64 {
    z.row(ch).norm()
}

/// Balance test: the stronger channel's l2-norm must be strictly less than
/// three times the weaker one's.
pub fn accept_pair(z: &DMatrix<f64>) -> Result<bool> {
    check_pair_shape(z)?;
    let n1 = channel_norm(z, 0);
    let n2 = channel_norm(z, 1);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroSignal("a source channel has zero norm".into()));
    }
    Ok(n1.max(n2) < 3.0 * n1.min(n2))
}

fn check_pair_shape(z: &DMatrix<f64>) -> Result<()> {
    if z.nrows() != 2 {
        return Err(Error::BadDimensions(format!(
            "source pair must have 2 rows, got {}",
            z.nrows()
        )));
    }
    if z.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Population standard deviation of one row.
fn row_std(z: &DMatrix<f64>, ch: usize) -> f64 {
    let row = z.row(ch);
    let n = row.len() as f64;
    let mean = row.sum() / n;
    (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Normalized pair of source time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePair {
    /// `2 x T`, mean of the two channel standard deviations equal to one.
    pub samples: DMatrix<f64>,
    pub model_id: usize,
    pub complexity: f64,
}

impl SourcePair {
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    /// Mean of the two per-channel (population) standard deviations.
    pub fn mean_std(&self) -> f64 {
        0.5 * (row_std(&self.samples, 0) + row_std(&self.samples, 1))
    }
}

/// Divides both channels by `(sigma1 + sigma2) / 2`.
pub fn normalize_pair(z: &DMatrix<f64>) -> Result<SourcePair> {
    check_pair_shape(z)?;
    let scale = 0.5 * (row_std(z, 0) + row_std(z, 1));
    if !(scale > 0.0) {
        return Err(Error::ZeroSignal("both source channels are constant".into()));
    }
    Ok(SourcePair {
        samples: z / scale,
        model_id: 0,
        complexity: 0.0,
    })
}

/// Rejection-samples models until one is stable and yields a balanced pair.
/// Returns the accepted model, the normalized pair and the attempt count.
pub fn generate_accepted<R: Rng + ?Sized>(
    gamma: f64,
    order: usize,
    length: usize,
    settings: &MvarSettings,
    rng: &mut R,
) -> Result<(MvarModel, SourcePair, usize)> {
    if length < 2 * order + 1 {
        return Err(Error::InvalidConfig(format!(
            "series length {length} too short for order {order}"
        )));
    }
    for attempt in 1..=settings.max_attempts {
        let model = sample_coefficients(gamma, order, rng)?;
        if !is_stable(&model, settings.stability_margin) {
            continue;
        }
        let z = match simulate(&model, length, settings.burn_in, settings.overflow_guard, rng) {
            Ok(z) => z,
            Err(Error::InstabilityDetected { .. }) => continue,
            Err(e) => return Err(e),
        };
        if accept_pair(&z)? {
            return Ok((model, normalize_pair(&z)?, attempt));
        }
    }
    Err(Error::RejectionBudgetExceeded {
        attempts: settings.max_attempts,
    })
}
