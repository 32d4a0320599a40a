//! Linear forward model `y(t) = G x(t) + n(t)`.
//!
//! Holds the leadfield, the placement of the active source pair, projection to
//! the sensors and calibration of white Gaussian sensor noise to a target
//! time-domain SNR.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

const SENSOR_RADIUS_M: f64 = 0.11;
const SOURCE_RADIUS_M: f64 = 0.08;
/// Sensors cover polar angles up to this value (radians) on the sensor sphere.
const SENSOR_CAP_POLAR: f64 = 1.1;

/// Forward matrix with the geometry it was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Leadfield {
    /// `M x N` gain matrix.
    pub gain: DMatrix<f64>,
    pub sensor_positions: Vec<Point3>,
    pub source_positions: Vec<Point3>,
}

impl Leadfield {
    pub fn new(
        gain: DMatrix<f64>,
        sensor_positions: Vec<Point3>,
        source_positions: Vec<Point3>,
    ) -> Result<Self> {
        let (m, n) = gain.shape();
        if m < 2 || n < 2 {
            return Err(Error::BadDimensions(format!(
                "leadfield must be at least 2x2, got {m}x{n}"
            )));
        }
        if sensor_positions.len() != m || source_positions.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{m}x{n} leadfield with {} sensor and {} source positions",
                sensor_positions.len(),
                source_positions.len()
            )));
        }
        if let Some(q) = (0..n).find(|&q| gain.column(q).iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidConfig(format!("leadfield column {q} is identically zero")));
        }
        if gain.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("leadfield contains non-finite entries".into()));
        }
        Ok(Self {
            gain,
            sensor_positions,
            source_positions,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.gain.nrows()
    }

    pub fn n_sources(&self) -> usize {
        self.gain.ncols()
    }

    pub fn column_norm(&self, q: usize) -> f64 {
        self.gain.column(q).norm()
    }

    pub fn source_distance(&self, i: usize, j: usize) -> f64 {
        let a = self.source_positions[i];
        let b = self.source_positions[j];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Columns `indices` of the gain matrix as an `M x k` matrix.
    pub fn columns(&self, indices: &[usize]) -> DMatrix<f64> {
        self.gain.select_columns(indices)
    }
}

/// Golden-angle spiral point `k` of `n`, restricted to polar angles
/// `[0, max_polar]`.
fn spiral_point(k: usize, n: usize, max_polar: f64) -> Vector3<f64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let z_min = max_polar.cos();
    let z = 1.0 - (1.0 - z_min) * (k as f64 + 0.5) / n as f64;
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let phi = golden * k as f64;
    Vector3::new(rho * phi.cos(), rho * phi.sin(), z)
}

/// Synthetic `m x n` leadfield.
///
/// Sensors sit on a cap of a 0.11 m sphere, sources quasi-uniformly on a
/// 0.08 m sphere. Each source is a tangential current dipole with a random
/// in-plane orientation; sensors read the radial component of the primary
/// dipole field, an inverse-square kernel in the sensor-source distance.
/// The matrix is scaled so its largest column norm equals one.
pub fn synth_leadfield<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Leadfield> {
    if m < 2 || n < 2 {
        return Err(Error::BadDimensions(format!(
            "need at least 2 sensors and 2 sources, got {m} and {n}"
        )));
    }
    let sensors: Vec<Vector3<f64>> = (0..m)
        .map(|k| spiral_point(k, m, SENSOR_CAP_POLAR) * SENSOR_RADIUS_M)
        .collect();
    let sources: Vec<Vector3<f64>> = (0..n)
        .map(|k| spiral_point(k, n, std::f64::consts::PI) * SOURCE_RADIUS_M)
        .collect();

    let orientations: Vec<Vector3<f64>> = sources
        .iter()
        .map(|r| {
            let radial = r.normalize();
            let helper = if radial.z.abs() < 0.9 {
                Vector3::z()
            } else {
                Vector3::x()
            };
            let e1 = radial.cross(&helper).normalize();
            let e2 = radial.cross(&e1);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            e1 * angle.cos() + e2 * angle.sin()
        })
        .collect();

    let mut gain = DMatrix::from_fn(m, n, |s, q| {
        let d = sensors[s] - sources[q];
        let dist = d.norm();
        orientations[q].cross(&d).dot(&sensors[s].normalize()) / dist.powi(3)
    });
    let max_norm = gain.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    gain /= max_norm;

    let to_point = |v: &Vector3<f64>| [v.x, v.y, v.z];
    Leadfield::new(
        gain,
        sensors.iter().map(to_point).collect(),
        sources.iter().map(to_point).collect(),
    )
}

/// Writes the leadfield in the `LEADFIELD v1` text format.
pub fn save_leadfield(lf: &Leadfield, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (m, n) = lf.gain.shape();
    let mut out = String::new();
    writeln!(out, "LEADFIELD v1 {m} {n}").unwrap();
    let row_line = |out: &mut String, vals: &mut dyn Iterator<Item = f64>| {
        let line: Vec<String> = vals.map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    };
    for s in 0..m {
        row_line(&mut out, &mut lf.gain.row(s).iter().copied());
    }
    for p in lf.sensor_positions.iter().chain(&lf.source_positions) {
        row_line(&mut out, &mut p.iter().copied());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a leadfield written by [`save_leadfield`].
pub fn load_leadfield(path: impl AsRef<Path>) -> Result<Leadfield> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_leadfield(&text, path)
}

fn parse_leadfield(text: &str, path: &Path) -> Result<Leadfield> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "LEADFIELD" || fields[1] != "v1" {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `LEADFIELD v1 M N`, found `{header}`"),
        ));
    }
    let dim = |tok: &str| {
        tok.parse::<usize>()
            .map_err(|_| Error::parse(path, 1, format!("invalid dimension `{tok}`")))
    };
    let m = dim(fields[2])?;
    let n = dim(fields[3])?;

    let mut read_row = |width: usize, what: &str| -> Result<Vec<f64>> {
        let (lineno, line) = lines.next().ok_or_else(|| {
            Error::parse(path, text.lines().count() + 1, format!("unexpected end of file, expected {what}"))
        })?;
        let vals = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("non-numeric token `{tok}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != width {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {width} values for {what}, found {}", vals.len()),
            ));
        }
        Ok(vals)
    };

    let mut gain = DMatrix::zeros(m, n);
    for s in 0..m {
        let row = read_row(n, "a leadfield row")?;
        for (q, v) in row.into_iter().enumerate() {
            gain[(s, q)] = v;
        }
    }
    let mut point = |what: &str| read_row(3, what).map(|v| [v[0], v[1], v[2]]);
    let sensors = (0..m).map(|_| point("sensor xyz")).collect::<Result<Vec<_>>>()?;
    let sources = (0..n).map(|_| point("source xyz")).collect::<Result<Vec<_>>>()?;
    if let Some((lineno, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(path, lineno, format!("trailing content `{line}`")));
    }
    Leadfield::new(gain, sensors, sources)
}

/// Chooses an active source pair `(i, j)`, `i < j`, uniformly among pairs
/// whose positions are more than `min_dist_m` apart and whose column norms
/// agree within a factor `1 + norm_ratio_tol`.
pub fn place_pair<R: Rng + ?Sized>(
    lf: &Leadfield,
    min_dist_m: f64,
    norm_ratio_tol: f64,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let feasible = feasible_pairs(lf, min_dist_m, norm_ratio_tol);
    if feasible.is_empty() {
        return Err(Error::NoFeasiblePair);
    }
    Ok(feasible[rng.random_range(0..feasible.len())])
}

/// All pairs satisfying the placement constraints, in lexicographic order.
pub fn feasible_pairs(lf: &Leadfield, min_dist_m: f64, norm_ratio_tol: f64) -> Vec<(usize, usize)> {
    let n = lf.n_sources();
    let norms: Vec<f64> = (0..n).map(|q| lf.column_norm(q)).collect();
    let hi = 1.0 + norm_ratio_tol;
    let lo = 1.0 / hi;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let ratio = norms[i] / norms[j];
            if ratio >= lo && ratio <= hi && lf.source_distance(i, j) > min_dist_m {
                out.push((i, j));
            }
        }
    }
    out
}

/// Source activity embedded in the full source space.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub indices: (usize, usize),
    /// `N x T`, nonzero only on rows `indices.0` and `indices.1`.
    pub full_x: DMatrix<f64>,
}

/// Places the two channels of `pair` (a `2 x T` array) on rows `i` and `j`
/// of an otherwise silent `n x T` source array.
pub fn embed_sources(pair: &DMatrix<f64>, indices: (usize, usize), n: usize) -> Result<SourceConfig> {
    let (i, j) = indices;
    for index in [i, j] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, n });
        }
    }
    if i == j {
        return Err(Error::InvalidConfig(format!("source indices must differ, got ({i}, {j})")));
    }
    if pair.nrows() != 2 {
        return Err(Error::BadDimensions(format!(
            "source pair must have 2 rows, got {}",
            pair.nrows()
        )));
    }
    let mut full_x = DMatrix::zeros(n, pair.ncols());
    full_x.row_mut(i).copy_from(&pair.row(0));
    full_x.row_mut(j).copy_from(&pair.row(1));
    Ok(SourceConfig { indices, full_x })
}

/// Noiseless sensor data `G x`.
pub fn project(lf: &Leadfield, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != lf.n_sources() {
        return Err(Error::DimensionMismatch(format!(
            "source array has {} rows, leadfield has {} columns",
            x.nrows(),
            lf.n_sources()
        )));
    }
    Ok(&lf.gain * x)
}

/// Noise standard deviation giving an expected SNR of `snr_x_db`:
/// `alpha^2 = sum_t |y_clean(t)|^2 / (M T 10^(snr/10))`.
pub fn alpha_for_snr(y_clean: &DMatrix<f64>, snr_x_db: f64) -> Result<f64> {
    let energy = y_clean.norm_squared();
    if energy == 0.0 {
        return Err(Error::ZeroSignal("noiseless sensor data is identically zero".into()));
    }
    let (m, t) = y_clean.shape();
    Ok((energy / (m as f64 * t as f64 * 10f64.powf(snr_x_db / 10.0))).sqrt())
}

/// Realized time-domain SNR in dB. Returns `-inf` when `y_clean` is zero.
pub fn snr_x(y_clean: &DMatrix<f64>, noise: &DMatrix<f64>) -> Result<f64> {
    if y_clean.shape() != noise.shape() {
        return Err(Error::DimensionMismatch(format!(
            "signal {:?} vs noise {:?}",
            y_clean.shape(),
            noise.shape()
        )));
    }
    let noise_energy = noise.norm_squared();
    if noise_energy == 0.0 {
        return Err(Error::ZeroSignal("noise is identically zero".into()));
    }
    Ok(10.0 * (y_clean.norm_squared() / noise_energy).log10())
}

/// `m x t` array of i.i.d. `N(0, alpha^2)` samples.
pub fn draw_noise<R: Rng + ?Sized>(m: usize, t: usize, alpha: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(m, t, |_, _| {
        let e: f64 = StandardNormal.sample(rng);
        alpha * e
    })
}

/// Noisy measurements together with the clean projection they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorData {
    pub y: DMatrix<f64>,
    pub y_clean: DMatrix<f64>,
    pub alpha: f64,
    pub snr_x_target_db: f64,
}

impl SensorData {
    pub fn noise(&self) -> DMatrix<f64> {
        &self.y - &self.y_clean
    }

    pub fn realized_snr_db(&self) -> Result<f64> {
        snr_x(&self.y_clean, &self.noise())
    }
}

/// Projects `x`, calibrates `alpha` to `snr_x_db` and adds noise.
pub fn measure<R: Rng + ?Sized>(
    lf: &Leadfield,
    x: &DMatrix<f64>,
    snr_x_db: f64,
    rng: &mut R,
) -> Result<SensorData> {
    let y_clean = project(lf, x)?;
    let alpha = alpha_for_snr(&y_clean, snr_x_db)?;
    let noise = draw_noise(y_clean.nrows(), y_clean.ncols(), alpha, rng);
    Ok(SensorData {
        y: &y_clean + noise,
        y_clean,
        alpha,
        snr_x_target_db: snr_x_db,
    })
}
