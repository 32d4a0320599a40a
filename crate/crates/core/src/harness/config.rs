//! Sweep configuration, presets and the `key = value` config file format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mvar::MvarSettings;
use crate::optimize::OptimConfig;
use crate::spectra::WelchConfig;

/// Where the leadfield comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LeadfieldSource {
    File(PathBuf),
    Synth { sensors: usize, sources: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_mod: usize,
    pub n_loc: usize,
    pub n_snr: usize,
    pub snr_range_db: (f64, f64),
    pub gamma_range: (f64, f64),
    pub samples: usize,
    pub mvar_order: usize,
    pub mvar: MvarSettings,
    pub leadfield: LeadfieldSource,
    /// Seed for a synthetic leadfield; derived from `master_seed` when unset.
    pub leadfield_seed: Option<u64>,
    pub min_distance_m: f64,
    pub norm_ratio_tol: f64,
    pub welch: WelchConfig,
    pub optim: OptimConfig,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

/// Recognized config-file keys.
pub const CONFIG_KEYS: &[&str] = &[
    "n_mod",
    "n_loc",
    "n_snr",
    "snr_lo_db",
    "snr_hi_db",
    "gamma_lo",
    "gamma_hi",
    "samples",
    "mvar_order",
    "burn_in",
    "stability_margin",
    "max_attempts",
    "leadfield",
    "sensors",
    "sources",
    "leadfield_seed",
    "min_distance_m",
    "norm_ratio_tol",
    "welch_segment",
    "welch_overlap",
    "welch_window",
    "lambda_log10_lo",
    "lambda_log10_hi",
    "coarse_points",
    "tol_log10",
    "master_seed",
];

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let (n_mod, n_loc, n_snr, samples, sensors, sources) = match preset {
            Preset::Desk => (4, 5, 4, 4000, 40, 80),
            Preset::Paper => (10, 20, 6, 10_000, 102, 274),
        };
        Self {
            n_mod,
            n_loc,
            n_snr,
            snr_range_db: (-20.0, 5.0),
            gamma_range: (0.1, 1.0),
            samples,
            mvar_order: 5,
            mvar: MvarSettings::default(),
            leadfield: LeadfieldSource::Synth { sensors, sources },
            leadfield_seed: None,
            min_distance_m: 0.07,
            norm_ratio_tol: 0.1,
            welch: WelchConfig::default(),
            optim: OptimConfig::default(),
            master_seed: 0,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_mod * self.n_loc * self.n_snr
    }

    /// Target time-domain SNRs, evenly spaced over `snr_range_db`.
    pub fn snr_levels(&self) -> Vec<f64> {
        let (lo, hi) = self.snr_range_db;
        if self.n_snr == 1 {
            return vec![lo];
        }
        (0..self.n_snr)
            .map(|k| lo + (hi - lo) * k as f64 / (self.n_snr - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_cells() == 0 {
            return bad("n_mod, n_loc and n_snr must all be >= 1".into());
        }
        if !(self.snr_range_db.0 < self.snr_range_db.1) {
            return bad(format!("snr range {:?} is empty", self.snr_range_db));
        }
        let (g_lo, g_hi) = self.gamma_range;
        if !(g_lo > 0.0 && g_lo <= g_hi) {
            return bad(format!("gamma range {:?} must be positive and ordered", self.gamma_range));
        }
        if self.mvar_order == 0 {
            return bad("mvar_order must be >= 1".into());
        }
        if self.samples < 2 * self.mvar_order + 1 || self.samples < self.welch.segment_length() {
            return bad(format!(
                "samples = {} too short for order {} and segment length {}",
                self.samples,
                self.mvar_order,
                self.welch.segment_length()
            ));
        }
        if !(self.norm_ratio_tol >= 0.0) || !(self.min_distance_m >= 0.0) {
            return bad("placement tolerances must be nonnegative".into());
        }
        if let LeadfieldSource::Synth { sensors, sources } = self.leadfield {
            if sensors < 2 || sources < 2 {
                return bad("synthetic leadfield needs >= 2 sensors and sources".into());
            }
        }
        self.optim.validate()
    }

    /// Applies `key = value` settings from a config file on top of `self`.
    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text, path)
    }

    pub fn apply_str(&mut self, text: &str, origin: &Path) -> Result<()> {
        let mut sensors_sources: (Option<usize>, Option<usize>) = (None, None);
        let mut window = self.welch.window();
        let mut segment = self.welch.segment_length();
        let mut overlap = self.welch.overlap();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, line_no, format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            let err = |what: &str| Error::parse(origin, line_no, format!("invalid {what} `{value}` for `{key}`"));
            let int = || value.parse::<usize>().map_err(|_| err("integer"));
            let real = || value.parse::<f64>().map_err(|_| err("number"));
            let seed = || value.parse::<u64>().map_err(|_| err("seed"));
            match key {
                "n_mod" => self.n_mod = int()?,
                "n_loc" => self.n_loc = int()?,
                "n_snr" => self.n_snr = int()?,
                "snr_lo_db" => self.snr_range_db.0 = real()?,
                "snr_hi_db" => self.snr_range_db.1 = real()?,
                "gamma_lo" => self.gamma_range.0 = real()?,
                "gamma_hi" => self.gamma_range.1 = real()?,
                "samples" => self.samples = int()?,
                "mvar_order" => self.mvar_order = int()?,
                "burn_in" => self.mvar.burn_in = int()?,
                "stability_margin" => self.mvar.stability_margin = real()?,
                "max_attempts" => self.mvar.max_attempts = int()?,
                "leadfield" => self.leadfield = LeadfieldSource::File(resolve(origin, value)),
                "sensors" => sensors_sources.0 = Some(int()?),
                "sources" => sensors_sources.1 = Some(int()?),
                "leadfield_seed" => self.leadfield_seed = Some(seed()?),
                "min_distance_m" => self.min_distance_m = real()?,
                "norm_ratio_tol" => self.norm_ratio_tol = real()?,
                "welch_segment" => segment = int()?,
                "welch_overlap" => overlap = real()?,
                "welch_window" => window = value.parse().map_err(|_| err("window"))?,
                "lambda_log10_lo" => self.optim.log10_lo = real()?,
                "lambda_log10_hi" => self.optim.log10_hi = real()?,
                "coarse_points" => self.optim.coarse_points = int()?,
                "tol_log10" => self.optim.tol_log10 = real()?,
                "master_seed" => self.master_seed = seed()?,
                other => {
                    return Err(Error::parse(origin, line_no, format!("unknown key `{other}`")));
                }
            }
        }

        if sensors_sources != (None, None) {
            let (cur_m, cur_n) = match self.leadfield {
                LeadfieldSource::Synth { sensors, sources } => (sensors, sources),
                LeadfieldSource::File(_) => (40, 80),
            };
            self.leadfield = LeadfieldSource::Synth {
                sensors: sensors_sources.0.unwrap_or(cur_m),
                sources: sensors_sources.1.unwrap_or(cur_n),
            };
        }
        self.welch = WelchConfig::new(segment, overlap, window)?;
        Ok(())
    }

    /// Serializes the configuration in the format read by [`apply_str`](Self::apply_str).
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("n_mod", self.n_mod.to_string());
        kv("n_loc", self.n_loc.to_string());
        kv("n_snr", self.n_snr.to_string());
        kv("snr_lo_db", self.snr_range_db.0.to_string());
        kv("snr_hi_db", self.snr_range_db.1.to_string());
        kv("gamma_lo", self.gamma_range.0.to_string());
        kv("gamma_hi", self.gamma_range.1.to_string());
        kv("samples", self.samples.to_string());
        kv("mvar_order", self.mvar_order.to_string());
        kv("burn_in", self.mvar.burn_in.to_string());
        kv("stability_margin", self.mvar.stability_margin.to_string());
        kv("max_attempts", self.mvar.max_attempts.to_string());
        match &self.leadfield {
            LeadfieldSource::File(p) => kv("leadfield", p.display().to_string()),
            LeadfieldSource::Synth { sensors, sources } => {
                kv("sensors", sensors.to_string());
                kv("sources", sources.to_string());
            }
        }
        if let Some(seed) = self.leadfield_seed {
            kv("leadfield_seed", seed.to_string());
        }
        kv("min_distance_m", self.min_distance_m.to_string());
        kv("norm_ratio_tol", self.norm_ratio_tol.to_string());
        kv("welch_segment", self.welch.segment_length().to_string());
        kv("welch_overlap", self.welch.overlap().to_string());
        kv("welch_window", self.welch.window().to_string());
        kv("lambda_log10_lo", self.optim.log10_lo.to_string());
        kv("lambda_log10_hi", self.optim.log10_hi.to_string());
        kv("coarse_points", self.optim.coarse_points.to_string());
        kv("tol_log10", self.optim.tol_log10.to_string());
        kv("master_seed", self.master_seed.to_string());
        s
    }
}

/// Relative paths in a config file are resolved against the file's directory.
fn resolve(origin: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        return p;
    }
    match origin.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(p),
        _ => p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::Window;

    #[test]
    fn presets() {
        let desk = ExperimentConfig::preset(Preset::Desk);
        assert_eq!(desk.n_cells(), 80);
        assert_eq!(desk.samples, 4000);
        let paper = ExperimentConfig::preset(Preset::Paper);
        assert_eq!(paper.n_cells(), 1200);
        assert_eq!(paper.leadfield, LeadfieldSource::Synth { sensors: 102, sources: 274 });
        assert_eq!(paper.snr_levels(), vec![-20.0, -15.0, -10.0, -5.0, 0.0, 5.0]);
    }

    #[test]
    fn config_string_round_trips() {
        let mut cfg = ExperimentConfig::preset(Preset::Paper);
        cfg.master_seed = 99;
        cfg.leadfield_seed = Some(3);
        cfg.welch = WelchConfig::new(128, 0.25, Window::Rectangular).unwrap();
        let mut back = ExperimentConfig::preset(Preset::Desk);
        back.apply_str(&cfg.to_config_string(), Path::new("cfg")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let mut cfg = ExperimentConfig::default();
        let err = cfg.apply_str("n_mod = 2\nbogus = 1\n", Path::new("cfg")).unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("bogus"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn comments_and_bad_values() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_str("# sweep\nn_loc = 3  # three\n\n", Path::new("cfg")).unwrap();
        assert_eq!(cfg.n_loc, 3);
        assert!(cfg.apply_str("n_loc = three", Path::new("cfg")).is_err());
        assert!(cfg.apply_str("n_loc 3", Path::new("cfg")).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.n_snr = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.snr_range_db = (5.0, -20.0);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.samples = 100;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn leadfield_path_is_relative_to_config() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_str("leadfield = lf.txt", Path::new("/data/exp/cfg.txt")).unwrap();
        assert_eq!(cfg.leadfield, LeadfieldSource::File(PathBuf::from("/data/exp/lf.txt")));
    }
}
