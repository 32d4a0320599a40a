//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use common::*;
use csd_inverse::harness::{
    eq19_max_deviation, fit_collapse, summarize_ratio, write_records_csv, Experiment, ExperimentConfig, Preset,
    ResultRecord,
};
use csd_inverse::inverse::{build_inverter, eps_s, eps_x, reconstruct};
use csd_inverse::mvar::{is_stable, sample_coefficients, MvarSettings};
use csd_inverse::spectra::{welch, CrossSpectrum, WelchConfig, Window};

const RATIO_BOUND: f64 = 0.5;
const RATIO_SHARE: f64 = 0.95;
const DESK_BUDGET: Duration = Duration::from_secs(15 * 60);
const HIGH_COMPLEXITY: f64 = 5.0;
const HIGH_COMPLEXITY_RATIO: f64 = 0.1;
const COLLAPSE_R2: f64 = 0.9;
const EQ19_TOL_DB: f64 = 1e-6;
const TIKHONOV_TOL: f64 = 1e-10;
const WELCH_TOL: f64 = 1e-10;
const EPS_TOL: f64 = 1e-12;
const MVAR_MODELS: usize = 100;
const BLOWUP_CAP: f64 = 1e8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ratio_bound(recs: &[ResultRecord], elapsed: Duration) -> Outcome {
    let usable: Vec<&ResultRecord> = recs.iter().filter(|r| r.is_usable()).collect();
    let below = usable.iter().filter(|r| r.ratio() < RATIO_BOUND).count();
    let share = below as f64 / usable.len().max(1) as f64;
    let summary = match summarize_ratio(recs) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("no ratio summary: {e}")),
    };
    let worst = summary.rows.iter().map(|r| r.mean).fold(0.0, f64::max);
    outcome(
        !usable.is_empty() && share >= RATIO_SHARE && worst < RATIO_BOUND && elapsed <= DESK_BUDGET,
        format!(
            "{below}/{} usable records below {RATIO_BOUND} ({:.1}%), largest group mean {worst:.4}, sweep took {:.1?}",
            usable.len(),
            100.0 * share,
            elapsed
        ),
    )
}

fn complexity_dependence(recs: &[ResultRecord]) -> Outcome {
    let summary = match summarize_ratio(recs) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("no ratio summary: {e}")),
    };
    let mut per_bin: BTreeMap<usize, f64> = BTreeMap::new();
    let mut all_ratios: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in recs.iter().filter(|r| r.is_usable()) {
        per_bin.insert(r.model_id, r.complexity_per_bin);
        all_ratios.entry(r.model_id).or_default().push(r.ratio());
    }
    if per_bin.len() < 2 {
        return outcome(false, "fewer than two models with usable records".into());
    }
    let by_c = |a: &(&usize, &f64), b: &(&usize, &f64)| a.1.total_cmp(b.1);
    let (&lo_model, &lo_c) = per_bin.iter().min_by(by_c).unwrap();
    let (&hi_model, &hi_c) = per_bin.iter().max_by(by_c).unwrap();

    let group = |m: usize| -> BTreeMap<usize, f64> {
        summary.rows.iter().filter(|r| r.model_id == m).map(|r| (r.snr_id, r.mean)).collect()
    };
    let (lo_rows, hi_rows) = (group(lo_model), group(hi_model));
    let shared: Vec<usize> = lo_rows.keys().filter(|k| hi_rows.contains_key(k)).copied().collect();
    let ordered = !shared.is_empty() && shared.iter().all(|k| hi_rows[k] < lo_rows[k]);

    let mut high = Vec::new();
    for (m, c) in &per_bin {
        if *c > HIGH_COMPLEXITY {
            let v = &all_ratios[m];
            high.push((*m, *c, v.iter().sum::<f64>() / v.len() as f64));
        }
    }
    let high_ok = !high.is_empty() && high.iter().all(|h| h.2 < HIGH_COMPLEXITY_RATIO);
    let pairs: Vec<String> = shared
        .iter()
        .map(|k| format!("{:.3}<{:.3}", hi_rows[k], lo_rows[k]))
        .collect();
    let highs: Vec<String> = high.iter().map(|(m, c, r)| format!("m{m} c={c:.2} mean {r:.4}")).collect();
    outcome(
        ordered && high_ok,
        format!(
            "model {hi_model} (c={hi_c:.2}) vs model {lo_model} (c={lo_c:.2}) by SNR: [{}]; c > {HIGH_COMPLEXITY}: [{}]",
            pairs.join(", "),
            highs.join(", ")
        ),
    )
}

fn collapse(recs: &[ResultRecord]) -> Outcome {
    match fit_collapse(recs) {
        Ok(fit) => outcome(
            fit.r2_vs_snr_s > fit.r2_vs_snr_x && fit.r2_vs_snr_s >= COLLAPSE_R2,
            format!(
                "R^2 vs SNR^S {:.4}, vs SNR^X {:.4} over {} locations (pooled: {:.4} / {:.4})",
                fit.r2_vs_snr_s, fit.r2_vs_snr_x, fit.n_locations, fit.pooled_r2_vs_snr_s, fit.pooled_r2_vs_snr_x
            ),
        ),
        Err(e) => outcome(false, format!("fit unavailable: {e}")),
    }
}

fn eq19(recs: &[ResultRecord]) -> Outcome {
    let failed = recs.iter().filter(|r| !r.is_ok()).count();
    let dev = eq19_max_deviation(recs);
    outcome(
        failed == 0 && dev < EQ19_TOL_DB,
        format!("max deviation {dev:.3e} dB over {} records, {failed} failed", recs.len()),
    )
}

fn tikhonov() -> Outcome {
    let mut r = rng(1001);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = r.random_range(1..=30);
        let n = r.random_range(1..=30);
        let t = r.random_range(1..=8);
        let g = gaussian_matrix(m, n, &mut r);
        let y = gaussian_matrix(m, t, &mut r);
        let inv = match build_inverter(&g) {
            Ok(inv) => inv,
            Err(e) => return outcome(false, format!("factorization failed: {e}")),
        };
        let lambda = inv.s_max().powi(2) * 10f64.powf(r.random_range(-4.0..1.0));
        let got = reconstruct(&inv, &y, lambda).unwrap();
        worst = worst.max(max_rel_diff(&got, &normal_equations(&g, &y, lambda)));
    }
    outcome(worst < TIKHONOV_TOL, format!("worst relative difference {worst:.3e} over 50 cases"))
}

fn welch_oracle() -> Outcome {
    let mut r = rng(2002);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let hann = case % 2 == 0;
        let overlap = if (case / 2) % 2 == 0 { 0.0 } else { 0.5 };
        let n = r.random_range(1..=4);
        let l = [16usize, 32, 64][r.random_range(0..3)];
        let len = r.random_range(l..=4 * l);
        let x = gaussian_matrix(n, len, &mut r);
        let window = if hann { Window::Hann } else { Window::Rectangular };
        let got = welch(&x, &WelchConfig::new(l, overlap, window).unwrap()).unwrap();
        worst = worst.max(spectrum_rel_diff(got.slices(), &naive_welch(&x, l, overlap, hann)));
    }
    outcome(worst < WELCH_TOL, format!("worst relative difference {worst:.3e} over 20 cases"))
}

fn error_functionals() -> Outcome {
    let mut r = rng(3003);
    let x = gaussian_matrix(4, 300, &mut r);
    let zero = DMatrix::zeros(4, 300);
    let s = welch(&x, &WelchConfig::new(32, 0.5, Window::Hann).unwrap()).unwrap();
    let neg = CrossSpectrum::from_slices(s.slices().iter().map(|m| -m).collect()).unwrap();
    let values = [
        eps_x(&x, &x).unwrap(),
        eps_x(&zero, &x).unwrap(),
        eps_x(&-&x, &x).unwrap(),
        eps_s(&s, &s).unwrap(),
        eps_s(&CrossSpectrum::zeros(4, 32), &s).unwrap(),
        eps_s(&neg, &s).unwrap(),
    ];
    let expected = [0.0, 1.0, 2.0, 0.0, 1.0, 2.0];
    let ok = values.iter().zip(expected).all(|(v, e)| (v - e).abs() < EPS_TOL);
    outcome(ok, format!("eps_x {:?}, eps_s {:?}", &values[..3], &values[3..]))
}

fn mvar_stability(steps: usize) -> Outcome {
    let margin = MvarSettings::default().stability_margin;
    let mut r = rng(4004);
    let mut disagreements = 0;
    let mut stable = 0;
    for case in 0..MVAR_MODELS {
        let order = 1 + case % 5;
        let gamma = r.random_range(0.1..1.0);
        let model = sample_coefficients(gamma, order, &mut r).unwrap();
        let diag = |i: usize| -> Vec<f64> { model.coeffs().iter().map(|a| a[(i, i)]).collect() };
        let roots = ar_roots_inside(&diag(0), 1.0 - margin) && ar_roots_inside(&diag(1), 1.0 - margin);
        let bounded = peak_magnitude(model.coeffs(), steps, BLOWUP_CAP, case as u64).is_finite();
        let claimed = is_stable(&model, margin);
        if claimed != roots || claimed != bounded {
            disagreements += 1;
        }
        stable += claimed as usize;
    }
    outcome(
        disagreements == 0,
        format!("{disagreements} disagreements over {MVAR_MODELS} models ({stable} stable), {steps} simulated steps"),
    )
}

fn determinism(cfg: &ExperimentConfig, first: &[ResultRecord]) -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("no temp dir: {e}")),
    };
    let second = match Experiment::new(cfg.clone()) {
        Ok(exp) => exp.run(),
        Err(e) => return outcome(false, format!("second run failed: {e}")),
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_records_csv(first, &a).unwrap();
    write_records_csv(&second, &b).unwrap();
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    outcome(
        ba == bb,
        format!("{} and {} bytes, master_seed {}", ba.len(), bb.len(), cfg.master_seed),
    )
}

fn main() {
    let cfg = ExperimentConfig::preset(Preset::Desk);
    let start = Instant::now();
    let recs = Experiment::new(cfg.clone()).expect("desk experiment").run();
    let elapsed = start.elapsed();

    let results = [
        ("ratio bound", ratio_bound(&recs, elapsed)),
        ("complexity dependence", complexity_dependence(&recs)),
        ("SNR^S collapse", collapse(&recs)),
        ("SNR^X to SNR^S identity", eq19(&recs)),
        ("Tikhonov oracle", tikhonov()),
        ("Welch oracle", welch_oracle()),
        ("error functionals", error_functionals()),
        ("MVAR stability oracle", mvar_stability(10 * cfg.samples)),
        ("determinism", determinism(&cfg, &recs)),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {} {name}: {} ({})",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += (!o.pass) as usize;
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
