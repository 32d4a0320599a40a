//! One row per simulated configuration, and its CSV representation.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub model_id: usize,
    pub loc_id: usize,
    pub snr_id: usize,
    /// Seed of the sensor-noise stream of this cell.
    pub seed: u64,
    pub gamma: f64,
    pub complexity: f64,
    /// `complexity` divided by the number of frequency bins.
    pub complexity_per_bin: f64,
    pub source_i: usize,
    pub source_j: usize,
    pub alpha: f64,
    pub snr_x_target_db: f64,
    pub snr_x_realized_db: f64,
    pub snr_s_db: f64,
    pub snr_s_predicted_db: f64,
    pub lambda_x_star: f64,
    pub eps_x_star: f64,
    pub lambda_x_boundary: bool,
    pub n_evals_x: usize,
    pub lambda_s_star: f64,
    pub eps_s_star: f64,
    pub lambda_s_boundary: bool,
    pub n_evals_s: usize,
    /// Failure message; `None` for a completed cell.
    pub error: Option<String>,
}

impl ResultRecord {
    /// A record for a cell that could not be completed.
    pub fn failed(model_id: usize, loc_id: usize, snr_id: usize, seed: u64, error: String) -> Self {
        Self {
            model_id,
            loc_id,
            snr_id,
            seed,
            gamma: f64::NAN,
            complexity: f64::NAN,
            complexity_per_bin: f64::NAN,
            source_i: 0,
            source_j: 0,
            alpha: f64::NAN,
            snr_x_target_db: f64::NAN,
            snr_x_realized_db: f64::NAN,
            snr_s_db: f64::NAN,
            snr_s_predicted_db: f64::NAN,
            lambda_x_star: f64::NAN,
            eps_x_star: f64::NAN,
            lambda_x_boundary: false,
            n_evals_x: 0,
            lambda_s_star: f64::NAN,
            eps_s_star: f64::NAN,
            lambda_s_boundary: false,
            n_evals_s: 0,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Completed and with both optima strictly inside the bracket.
    pub fn is_usable(&self) -> bool {
        self.is_ok() && !self.lambda_x_boundary && !self.lambda_s_boundary
    }

    pub fn ratio(&self) -> f64 {
        self.lambda_s_star / self.lambda_x_star
    }

    pub fn key(&self) -> (usize, usize, usize) {
        (self.model_id, self.loc_id, self.snr_id)
    }
}

pub const COLUMNS: &[&str] = &[
    "model_id",
    "loc_id",
    "snr_id",
    "seed",
    "gamma",
    "complexity",
    "complexity_per_bin",
    "source_i",
    "source_j",
    "alpha",
    "snr_x_target_db",
    "snr_x_realized_db",
    "snr_s_db",
    "snr_s_predicted_db",
    "lambda_x_star",
    "eps_x_star",
    "lambda_x_boundary",
    "n_evals_x",
    "lambda_s_star",
    "eps_s_star",
    "lambda_s_boundary",
    "n_evals_s",
    "error",
];

/// 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn to_row(r: &ResultRecord) -> Vec<String> {
    vec![
        r.model_id.to_string(),
        r.loc_id.to_string(),
        r.snr_id.to_string(),
        r.seed.to_string(),
        fmt_f64(r.gamma),
        fmt_f64(r.complexity),
        fmt_f64(r.complexity_per_bin),
        r.source_i.to_string(),
        r.source_j.to_string(),
        fmt_f64(r.alpha),
        fmt_f64(r.snr_x_target_db),
        fmt_f64(r.snr_x_realized_db),
        fmt_f64(r.snr_s_db),
        fmt_f64(r.snr_s_predicted_db),
        fmt_f64(r.lambda_x_star),
        fmt_f64(r.eps_x_star),
        r.lambda_x_boundary.to_string(),
        r.n_evals_x.to_string(),
        fmt_f64(r.lambda_s_star),
        fmt_f64(r.eps_s_star),
        r.lambda_s_boundary.to_string(),
        r.n_evals_s.to_string(),
        r.error.clone().unwrap_or_default(),
    ]
}

pub fn write_records_csv(records: &[ResultRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in records {
        w.write_record(to_row(r)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rd = csv::ReaderBuilder::new().from_path(path).map_err(csv_err)?;
    let header = rd.headers().map_err(csv_err)?.clone();
    let mut index = Vec::with_capacity(COLUMNS.len());
    for col in COLUMNS {
        match header.iter().position(|h| h == *col) {
            Some(i) => index.push(i),
            None => return Err(Error::parse(path, 1, format!("missing column `{col}`"))),
        }
    }

    let mut out = Vec::new();
    for (row_idx, row) in rd.records().enumerate() {
        // Header is line 1.
        let line = row_idx + 2;
        let row = row.map_err(csv_err)?;
        let field = |c: usize| -> &str { row.get(index[c]).unwrap_or("") };
        let bad = |c: usize| {
            Error::parse(
                path,
                line,
                format!("invalid value `{}` in column `{}`", field(c), COLUMNS[c]),
            )
        };
        let int = |c: usize| field(c).parse::<usize>().map_err(|_| bad(c));
        let real = |c: usize| field(c).parse::<f64>().map_err(|_| bad(c));
        let flag = |c: usize| field(c).parse::<bool>().map_err(|_| bad(c));
        let error = field(22);
        out.push(ResultRecord {
            model_id: int(0)?,
            loc_id: int(1)?,
            snr_id: int(2)?,
            seed: field(3).parse::<u64>().map_err(|_| bad(3))?,
            gamma: real(4)?,
            complexity: real(5)?,
            complexity_per_bin: real(6)?,
            source_i: int(7)?,
            source_j: int(8)?,
            alpha: real(9)?,
            snr_x_target_db: real(10)?,
            snr_x_realized_db: real(11)?,
            snr_s_db: real(12)?,
            snr_s_predicted_db: real(13)?,
            lambda_x_star: real(14)?,
            eps_x_star: real(15)?,
            lambda_x_boundary: flag(16)?,
            n_evals_x: int(17)?,
            lambda_s_star: real(18)?,
            eps_s_star: real(19)?,
            lambda_s_boundary: flag(20)?,
            n_evals_s: int(21)?,
            error: (!error.is_empty()).then(|| error.to_string()),
        });
    }
    Ok(out)
}
