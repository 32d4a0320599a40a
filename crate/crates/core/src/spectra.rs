//! Welch cross-power spectra and spectrum-domain signal-to-noise ratios.
//!
//! Segment DFTs use the `1/L` convention
//! `x^p(f) = (1/L) sum_t x^p(t) w(t) exp(-2 pi i t f / L)` and are averaged as
//! `S(f) = L / (P W) sum_p x^p(f) x^p(f)^H` with `W = (1/L) sum_t w(t)^2`.
//! All `L` bins are kept (two-sided spectrum), so `N_f = L`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Taper applied to each Welch segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    /// Periodic Hann, `w(t) = 0.5 - 0.5 cos(2 pi t / L)`.
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|t| 0.5 - 0.5 * (std::f64::consts::TAU * t as f64 / len as f64).cos())
                .collect(),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        })
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "boxcar" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(Error::InvalidConfig(format!("unknown window `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    segment_length: usize,
    overlap: f64,
    window: Window,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_length: 256,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

impl WelchConfig {
    /// `segment_length` must be a power of two and `overlap` lie in `[0, 1)`.
    pub fn new(segment_length: usize, overlap: f64, window: Window) -> Result<Self> {
        if segment_length < 2 || !segment_length.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "segment length must be a power of two >= 2, got {segment_length}"
            )));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::InvalidConfig(format!("overlap must lie in [0, 1), got {overlap}")));
        }
        Ok(Self {
            segment_length,
            overlap,
            window,
        })
    }

    pub fn segment_length(&self) -> usize {
        self.segment_length
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Hop between segment starts, `floor(L (1 - overlap))`, at least one.
    pub fn step(&self) -> usize {
        ((self.segment_length as f64 * (1.0 - self.overlap)).floor() as usize).max(1)
    }

    /// Number of full segments in a series of length `len`; trailing samples
    /// that do not fill a segment are dropped.
    pub fn segment_count(&self, len: usize) -> usize {
        if len < self.segment_length {
            0
        } else {
            (len - self.segment_length) / self.step() + 1
        }
    }

    /// Window power `W = (1/L) sum_t w(t)^2`.
    pub fn window_power(&self) -> f64 {
        let w = self.window.coefficients(self.segment_length);
        w.iter().map(|v| v * v).sum::<f64>() / self.segment_length as f64
    }
}

/// One `N x N` Hermitian matrix per frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrum {
    n_channels: usize,
    data: Vec<DMatrix<Complex64>>,
}

impl CrossSpectrum {
    pub fn from_slices(data: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let n = data.first().map(|m| m.nrows()).ok_or(Error::EmptyInput)?;
        if data.iter().any(|m| m.shape() != (n, n)) {
            return Err(Error::ShapeMismatch("frequency slices must all be N x N".into()));
        }
        Ok(Self { n_channels: n, data })
    }

    pub fn zeros(n_channels: usize, n_freqs: usize) -> Self {
        Self {
            n_channels,
            data: vec![DMatrix::zeros(n_channels, n_channels); n_freqs],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_freqs(&self) -> usize {
        self.data.len()
    }

    pub fn at(&self, f: usize) -> &DMatrix<Complex64> {
        &self.data[f]
    }

    pub fn slices(&self) -> &[DMatrix<Complex64>] {
        &self.data
    }

    /// `sum_f |S(f)|_F^2`.
    pub fn frobenius_energy(&self) -> f64 {
        self.data.iter().map(|s| s.norm_squared()).sum()
    }

    /// Largest relative Hermitian defect `|S - S^H|_F / |S|_F` over bins.
    pub fn hermitian_defect(&self) -> f64 {
        self.data
            .iter()
            .map(|s| {
                let norm = s.norm();
                if norm == 0.0 {
                    0.0
                } else {
                    (s - s.adjoint()).norm() / norm
                }
            })
            .fold(0.0, f64::max)
    }

    /// Places this spectrum on channels `indices` of an `n`-channel spectrum
    /// that is zero elsewhere.
    pub fn embed(&self, indices: &[usize], n: usize) -> Result<Self> {
        if indices.len() != self.n_channels {
            return Err(Error::ShapeMismatch(format!(
                "{} indices for a {}-channel spectrum",
                indices.len(),
                self.n_channels
            )));
        }
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, n });
        }
        let data = self
            .data
            .iter()
            .map(|s| {
                let mut full = DMatrix::zeros(n, n);
                for (a, &ia) in indices.iter().enumerate() {
                    for (b, &ib) in indices.iter().enumerate() {
                        full[(ia, ib)] = s[(a, b)];
                    }
                }
                full
            })
            .collect();
        Ok(Self { n_channels: n, data })
    }
}

/// Welch cross-power spectrum of the rows of `x` (`N x T`).
pub fn welch(x: &DMatrix<f64>, cfg: &WelchConfig) -> Result<CrossSpectrum> {
    let (n, len) = x.shape();
    if n == 0 || len == 0 {
        return Err(Error::EmptyInput);
    }
    let l = cfg.segment_length;
    if l > len {
        return Err(Error::SegmentTooLong { segment: l, len });
    }
    let n_seg = cfg.segment_count(len);
    let step = cfg.step();
    let window = cfg.window.coefficients(l);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(l);
    let inv_l = 1.0 / l as f64;

    // Segment DFTs laid out as hat[p][f * n + ch].
    let mut hat = vec![vec![Complex64::new(0.0, 0.0); l * n]; n_seg];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for (p, seg_hat) in hat.iter_mut().enumerate() {
        let start = p * step;
        for ch in 0..n {
            for (t, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(x[(ch, start + t)] * window[t], 0.0);
            }
            fft.process(&mut buf);
            for (f, v) in buf.iter().enumerate() {
                seg_hat[f * n + ch] = v * inv_l;
            }
        }
    }

    let scale = l as f64 / (n_seg as f64 * cfg.window_power());
    let data = (0..l)
        .map(|f| {
            let mut s = DMatrix::<Complex64>::zeros(n, n);
            for seg_hat in &hat {
                let v = &seg_hat[f * n..(f + 1) * n];
                for j in 0..n {
                    let vj = v[j];
                    s[(j, j)].re += vj.norm_sqr();
                    for k in j + 1..n {
                        s[(j, k)] += vj * v[k].conj();
                    }
                }
            }
            for j in 0..n {
                s[(j, j)] *= scale;
                for k in j + 1..n {
                    s[(j, k)] *= scale;
                    s[(k, j)] = s[(j, k)].conj();
                }
            }
            s
        })
        .collect();
    Ok(CrossSpectrum { n_channels: n, data })
}

/// Spectral complexity coefficient: the mean, over the upper triangle
/// (diagonal included), of `sum_f |S_jk(f)|^2`.
pub fn complexity(s: &CrossSpectrum) -> f64 {
    let n = s.n_channels;
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for slice in &s.data {
        for j in 0..n {
            for k in j..n {
                total += slice[(j, k)].norm_sqr();
            }
        }
    }
    2.0 * total / (n * (n + 1)) as f64
}

/// [`complexity`] divided by the number of frequency bins. White unit-variance
/// noise gives about 2/3 for a channel pair.
pub fn complexity_per_bin(s: &CrossSpectrum) -> f64 {
    match s.n_freqs() {
        0 => 0.0,
        nf => complexity(s) / nf as f64,
    }
}

fn check_gain(g: &DMatrix<f64>, s: &CrossSpectrum) -> Result<()> {
    if g.ncols() != s.n_channels {
        return Err(Error::DimensionMismatch(format!(
            "leadfield has {} columns, spectrum has {} channels",
            g.ncols(),
            s.n_channels
        )));
    }
    Ok(())
}

fn to_complex(g: &DMatrix<f64>) -> DMatrix<Complex64> {
    g.map(|v| Complex64::new(v, 0.0))
}

/// `sum_f |G S(f) G^T|_F^2`.
pub fn projected_energy(g: &DMatrix<f64>, s: &CrossSpectrum) -> Result<f64> {
    check_gain(g, s)?;
    let gc = to_complex(g);
    let gt = gc.transpose();
    Ok(s.data.iter().map(|sf| (&gc * sf * &gt).norm_squared()).sum())
}

/// Spectrum-domain SNR in dB for white sensor noise `S^N(f) = alpha^2 I`:
/// `10 log10( sum_f |G S(f) G^T|_F^2 / (N_f M alpha^4) )`.
/// Returns `-inf` when the projected spectrum vanishes.
pub fn snr_s(g: &DMatrix<f64>, s: &CrossSpectrum, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("noise level must be positive, got {alpha}")));
    }
    let num = projected_energy(g, s)?;
    let den = s.n_freqs() as f64 * g.nrows() as f64 * alpha.powi(4);
    Ok(10.0 * (num / den).log10())
}

/// Spectrum-domain SNR obtained from the time-domain SNR by eliminating the
/// noise level:
///
/// `10 log10( T^2 M sum_f |G S(f) G^T|_F^2 / (N_f (sum_t |G x(t)|^2)^2) ) + 2 snr_x`.
pub fn predicted_snr_s(
    g: &DMatrix<f64>,
    s: &CrossSpectrum,
    x: &DMatrix<f64>,
    snr_x_db: f64,
) -> Result<f64> {
    if x.nrows() != g.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "source array has {} rows, leadfield has {} columns",
            x.nrows(),
            g.ncols()
        )));
    }
    let energy = (g * x).norm_squared();
    if energy == 0.0 {
        return Err(Error::ZeroSignal("projected source activity is zero".into()));
    }
    let num = projected_energy(g, s)?;
    let t = x.ncols() as f64;
    let m = g.nrows() as f64;
    let ratio = t * t * m * num / (s.n_freqs() as f64 * energy * energy);
    Ok(10.0 * ratio.log10() + 2.0 * snr_x_db)
}

/// Sensor-level model spectrum `G S(f) G^T + alpha^2 I`.
pub fn model_spectrum(g: &DMatrix<f64>, s: &CrossSpectrum, alpha: f64) -> Result<CrossSpectrum> {
    check_gain(g, s)?;
    let gc = to_complex(g);
    let gt = gc.transpose();
    let m = g.nrows();
    let noise = Complex64::new(alpha * alpha, 0.0);
    let data = s
        .data
        .iter()
        .map(|sf| {
            let mut out = &gc * sf * &gt;
            for i in 0..m {
                out[(i, i)] += noise;
            }
            out
        })
        .collect();
    Ok(CrossSpectrum { n_channels: m, data })
}
