//! Post-processing of sweep records: ratio tables, the SNR collapse fit,
//! plot data and a text report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::records::{fmt_f64, ResultRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub model_id: usize,
    pub snr_id: usize,
    pub snr_x_target_db: f64,
    pub complexity: f64,
    pub mean: f64,
    /// Population standard deviation over locations.
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary {
    /// Sorted by `(model_id, snr_id)`.
    pub rows: Vec<RatioRow>,
    /// Records dropped for failure or a boundary optimum.
    pub excluded: usize,
}

/// Mean and spread of `lambda_S* / lambda_x*` over locations for every
/// `(model, snr)` pair.
pub fn summarize_ratio(records: &[ResultRecord]) -> Result<RatioSummary> {
    let mut groups: BTreeMap<(usize, usize), Vec<&ResultRecord>> = BTreeMap::new();
    let mut excluded = 0;
    for r in records {
        if r.is_usable() {
            groups.entry((r.model_id, r.snr_id)).or_default().push(r);
        } else {
            excluded += 1;
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyAfterFiltering { excluded });
    }
    let rows = groups
        .into_iter()
        .map(|((model_id, snr_id), rs)| {
            let ratios: Vec<f64> = rs.iter().map(|r| r.ratio()).collect();
            let (mean, std) = mean_std(&ratios);
            RatioRow {
                model_id,
                snr_id,
                snr_x_target_db: rs[0].snr_x_target_db,
                complexity: rs[0].complexity,
                mean,
                std,
                count: ratios.len(),
            }
        })
        .collect();
    Ok(RatioSummary { rows, excluded })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Coefficient of determination of the least-squares line `y ~ a + b x`.
/// Zero when `y` has no variance.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let (mx, _) = mean_std(x);
    let (my, _) = mean_std(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if syy == 0.0 || sxx == 0.0 {
        return 0.0;
    }
    (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseFit {
    /// Mean over locations of the within-location R^2 (models pooled).
    pub r2_vs_snr_x: f64,
    pub r2_vs_snr_s: f64,
    /// Same fits with every usable record in one pool.
    pub pooled_r2_vs_snr_x: f64,
    pub pooled_r2_vs_snr_s: f64,
    pub n_locations: usize,
    pub n_records: usize,
}

/// R^2 of `log10 lambda_S*` against SNR^X and against SNR^S.
///
/// Lines are fitted separately for each source location, pooling the models
/// at that location, and the R^2 values are averaged over locations. A
/// location takes part when it has at least 3 usable records from at least
/// 2 models.
pub fn fit_collapse(records: &[ResultRecord]) -> Result<CollapseFit> {
    let usable: Vec<&ResultRecord> = records.iter().filter(|r| r.is_usable()).collect();
    let n_models = usable
        .iter()
        .map(|r| r.model_id)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    if usable.len() < 10 || n_models < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable records over {} models; need >= 10 over >= 2",
            usable.len(),
            n_models
        )));
    }
    let fit = |rs: &[&ResultRecord]| {
        let log_lambda: Vec<f64> = rs.iter().map(|r| r.lambda_s_star.log10()).collect();
        let snr_x: Vec<f64> = rs.iter().map(|r| r.snr_x_target_db).collect();
        let snr_s: Vec<f64> = rs.iter().map(|r| r.snr_s_db).collect();
        (r_squared(&snr_x, &log_lambda), r_squared(&snr_s, &log_lambda))
    };

    let mut by_loc: BTreeMap<usize, Vec<&ResultRecord>> = BTreeMap::new();
    for r in &usable {
        by_loc.entry(r.loc_id).or_default().push(r);
    }
    let per_loc: Vec<(f64, f64)> = by_loc
        .values()
        .filter(|rs| {
            let models: std::collections::BTreeSet<usize> = rs.iter().map(|r| r.model_id).collect();
            rs.len() >= 3 && models.len() >= 2
        })
        .map(|rs| fit(rs))
        .collect();
    if per_loc.is_empty() {
        return Err(Error::InsufficientData(
            "no location has >= 3 usable records from >= 2 models".into(),
        ));
    }
    let k = per_loc.len() as f64;
    let (pooled_x, pooled_s) = fit(&usable);
    Ok(CollapseFit {
        r2_vs_snr_x: per_loc.iter().map(|p| p.0).sum::<f64>() / k,
        r2_vs_snr_s: per_loc.iter().map(|p| p.1).sum::<f64>() / k,
        pooled_r2_vs_snr_x: pooled_x,
        pooled_r2_vs_snr_s: pooled_s,
        n_locations: per_loc.len(),
        n_records: usable.len(),
    })
}

/// Largest `|snr_s_db - snr_s_predicted_db|` over completed records.
pub fn eq19_max_deviation(records: &[ResultRecord]) -> f64 {
    records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| (r.snr_s_db - r.snr_s_predicted_db).abs())
        .fold(0.0, f64::max)
}

/// Which plot-data table to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `lambda_S*` against the target SNR^X, one row per usable record.
    LambdaSVsSnrX,
    /// `lambda_S*` against SNR^S, one row per usable record.
    LambdaSVsSnrS,
    /// Mean ratio `lambda_S*/lambda_x*` against SNR^X, one row per
    /// `(model, snr)` group, with its spread in `ystd`.
    RatioVsSnrX,
}

pub const PLOT_COLUMNS: &[&str] = &["series", "x", "y", "ystd"];

/// Writes long-format plot data (`series,x,y[,ystd]`, series = model id).
pub fn emit_plot_data(records: &[ResultRecord], kind: PlotKind, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = String::new();
    match kind {
        PlotKind::LambdaSVsSnrX | PlotKind::LambdaSVsSnrS => {
            out.push_str("series,x,y\n");
            for r in records.iter().filter(|r| r.is_usable()) {
                let x = if kind == PlotKind::LambdaSVsSnrX {
                    r.snr_x_target_db
                } else {
                    r.snr_s_db
                };
                writeln!(out, "{},{},{}", r.model_id, fmt_f64(x), fmt_f64(r.lambda_s_star)).unwrap();
            }
        }
        PlotKind::RatioVsSnrX => {
            out.push_str("series,x,y,ystd\n");
            for row in summarize_ratio(records)?.rows {
                writeln!(
                    out,
                    "{},{},{},{}",
                    row.model_id,
                    fmt_f64(row.snr_x_target_db),
                    fmt_f64(row.mean),
                    fmt_f64(row.std)
                )
                .unwrap();
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Human-readable summary of a sweep.
pub fn render_report(records: &[ResultRecord]) -> String {
    let mut s = String::new();
    let total = records.len();
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    let boundary = records.iter().filter(|r| r.is_ok() && !r.is_usable()).count();
    let usable: Vec<&ResultRecord> = records.iter().filter(|r| r.is_usable()).collect();
    writeln!(s, "records            {total}").unwrap();
    writeln!(s, "failed             {failed}").unwrap();
    writeln!(s, "boundary optimum   {boundary}").unwrap();
    writeln!(s, "usable             {}", usable.len()).unwrap();
    writeln!(s, "max |SNR^S - predicted| (dB)  {:.3e}", eq19_max_deviation(records)).unwrap();

    if !usable.is_empty() {
        let below = usable.iter().filter(|r| r.ratio() < 0.5).count();
        writeln!(
            s,
            "ratio lambda_S/lambda_x < 0.5 in {below}/{} usable records ({:.1}%)",
            usable.len(),
            100.0 * below as f64 / usable.len() as f64
        )
        .unwrap();
    }

    let mut models: BTreeMap<usize, (f64, f64, f64)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        models.insert(r.model_id, (r.gamma, r.complexity, r.complexity_per_bin));
    }
    if !models.is_empty() {
        writeln!(s, "\nmodel  gamma     complexity    per bin").unwrap();
        for (m, (g, c, cb)) in &models {
            writeln!(s, "{m:>5}  {g:<8.4}  {c:<12.4}  {cb:.4}").unwrap();
        }
    }

    match summarize_ratio(records) {
        Ok(summary) => {
            writeln!(s, "\nmodel  snr_x_db   mean_ratio   std_ratio    n").unwrap();
            for row in &summary.rows {
                writeln!(
                    s,
                    "{:>5}  {:>8.3}   {:<11.4e}  {:<11.4e}  {}",
                    row.model_id, row.snr_x_target_db, row.mean, row.std, row.count
                )
                .unwrap();
            }
            writeln!(s, "excluded from ratio summary: {}", summary.excluded).unwrap();
        }
        Err(e) => writeln!(s, "\nratio summary unavailable: {e}").unwrap(),
    }

    match fit_collapse(records) {
        Ok(fit) => writeln!(
            s,
            "\nlog10 lambda_S* linear fit, per location: R^2 vs SNR^X = {:.4}, R^2 vs SNR^S = {:.4} \
             ({} locations, {} records)\n\
             pooled over locations: R^2 vs SNR^X = {:.4}, R^2 vs SNR^S = {:.4}",
            fit.r2_vs_snr_x,
            fit.r2_vs_snr_s,
            fit.n_locations,
            fit.n_records,
            fit.pooled_r2_vs_snr_x,
            fit.pooled_r2_vs_snr_s
        )
        .unwrap(),
        Err(e) => writeln!(s, "\ncollapse fit unavailable: {e}").unwrap(),
    }
    s
}
