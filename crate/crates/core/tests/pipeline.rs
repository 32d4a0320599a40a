mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::spectrum_rel_diff;
use csd_inverse::forward::{embed_sources, measure, place_pair, synth_leadfield};
use csd_inverse::harness::{Experiment, ExperimentConfig, LeadfieldSource, Preset};
use csd_inverse::inverse::build_inverter;
use csd_inverse::mvar::{generate_accepted, MvarSettings};
use csd_inverse::spectra::{complexity_per_bin, model_spectrum, snr_s, welch, WelchConfig};

fn tiny_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Preset::Desk);
    cfg.n_mod = 2;
    cfg.n_loc = 2;
    cfg.n_snr = 3;
    cfg.samples = 1500;
    cfg.leadfield = LeadfieldSource::Synth {
        sensors: 20,
        sources: 40,
    };
    cfg.master_seed = seed;
    cfg
}

#[test]
fn paper_sized_leadfield_is_ill_conditioned() {
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lf = synth_leadfield(102, 274, &mut rng).unwrap();
        let s = build_inverter(&lf.gain).unwrap();
        let sv = s.singular_values();
        assert_eq!(sv.len(), 102);
        let cond = sv[0] / sv[sv.len() - 1];
        assert!(cond > 1e3, "seed {seed}: cond {cond:.3e}");
        assert!((0..274).all(|q| lf.column_norm(q) > 0.0 && lf.column_norm(q).is_finite()));
    }
}

#[test]
fn synthetic_leadfield_is_seed_deterministic() {
    let a = synth_leadfield(10, 20, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = synth_leadfield(10, 20, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let c = synth_leadfield(10, 20, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.gain, c.gain);
}

#[test]
fn placed_pairs_satisfy_both_constraints() {
    let lf = synth_leadfield(102, 274, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let (i, j) = place_pair(&lf, 0.07, 0.1, &mut rng).unwrap();
        assert!(i < j);
        assert!(lf.source_distance(i, j) > 0.07);
        let ratio = lf.column_norm(i) / lf.column_norm(j);
        assert!(ratio.max(1.0 / ratio) <= 1.1);
    }
}

#[test]
fn sensor_spectrum_matches_its_model() {
    let lf = synth_leadfield(40, 80, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (_, pair, _) = generate_accepted(0.5, 5, 10_000, &MvarSettings::default(), &mut rng).unwrap();
    let (i, j) = place_pair(&lf, 0.07, 0.1, &mut rng).unwrap();
    let x = embed_sources(&pair.samples, (i, j), 80).unwrap().full_x;
    let data = measure(&lf, &x, 0.0, &mut rng).unwrap();
    let cfg = WelchConfig::default();
    let sy = welch(&data.y, &cfg).unwrap();
    let g_pair = lf.columns(&[i, j]);
    let modeled = model_spectrum(&g_pair, &welch(&pair.samples, &cfg).unwrap(), data.alpha).unwrap();
    let dev = spectrum_rel_diff(sy.slices(), modeled.slices());
    assert!(dev < 0.15, "relative deviation {dev}");
}

#[test]
fn complexity_grows_with_gamma() {
    let settings = MvarSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = WelchConfig::default();
    let mut low = Vec::new();
    let mut high = Vec::new();
    for _ in 0..8 {
        for (gamma, out) in [(0.15, &mut low), (0.9, &mut high)] {
            let (_, pair, _) = generate_accepted(gamma, 5, 4000, &settings, &mut rng).unwrap();
            out.push(complexity_per_bin(&welch(&pair.samples, &cfg).unwrap()));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&high) > mean(&low));

    // Ten draws over the whole gamma range span about an order of magnitude.
    let all: Vec<f64> = (0..10)
        .map(|_| {
            let gamma = rng.random_range(0.1..1.0);
            let (_, pair, _) = generate_accepted(gamma, 5, 4000, &settings, &mut rng).unwrap();
            complexity_per_bin(&welch(&pair.samples, &cfg).unwrap())
        })
        .collect();
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(0.0, f64::max);
    assert!(hi / lo > 3.0 && hi / lo < 100.0, "{all:?}");
}

#[test]
fn peakier_spectrum_has_higher_snr_s() {
    let settings = MvarSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = WelchConfig::default();
    let lf = synth_leadfield(30, 60, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (i, j) = place_pair(&lf, 0.07, 0.1, &mut rng).unwrap();
    let g = lf.columns(&[i, j]);
    let mut rows = Vec::new();
    for gamma in [0.15, 0.9] {
        let (_, pair, _) = generate_accepted(gamma, 5, 4000, &settings, &mut rng).unwrap();
        let s = welch(&pair.samples, &cfg).unwrap();
        let x = embed_sources(&pair.samples, (i, j), 60).unwrap().full_x;
        let data = measure(&lf, &x, -5.0, &mut rng).unwrap();
        rows.push((complexity_per_bin(&s), snr_s(&g, &s, data.alpha).unwrap()));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(rows[1].1 > rows[0].1, "{rows:?}");
}

#[test]
fn sweeps_are_deterministic() {
    let a = Experiment::new(tiny_config(7)).unwrap().run();
    let b = Experiment::new(tiny_config(7)).unwrap().run();
    assert_eq!(a.len(), 12);
    assert!(a.iter().all(|r| r.is_ok()));
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let c = Experiment::new(tiny_config(8)).unwrap().run();
    assert_ne!(a[0].lambda_s_star, c[0].lambda_s_star);
}

#[test]
fn single_cell_reproduces_the_sweep() {
    let exp = Experiment::new(tiny_config(3)).unwrap();
    let all = exp.run();
    for r in [&all[0], &all[5], &all[11]] {
        let (m, l, s) = r.key();
        assert_eq!(&exp.run_single(m, l, s), r);
    }
}

#[test]
fn every_record_has_consistent_snr_fields() {
    let recs = Experiment::new(tiny_config(4)).unwrap().run();
    for r in &recs {
        assert!((r.snr_s_db - r.snr_s_predicted_db).abs() < 1e-6);
        assert!((r.snr_x_realized_db - r.snr_x_target_db).abs() < 0.5);
        assert!(r.eps_x_star >= 0.0 && r.eps_x_star <= 2.0);
        assert!(r.eps_s_star >= 0.0 && r.eps_s_star <= 2.0);
        assert!(r.source_i < r.source_j);
    }
}
