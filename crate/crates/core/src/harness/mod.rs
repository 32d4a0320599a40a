//! Full sweep: models x source locations x SNR levels.
//!
//! Each model is drawn once and each location pair is drawn once; all models
//! share the same set of location pairs. The leadfield SVD is computed once
//! and shared by every cell.

mod config;
mod records;
mod seed;
mod summary;

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

pub use config::{ExperimentConfig, LeadfieldSource, Preset, CONFIG_KEYS};
pub use records::{read_records_csv, write_records_csv, ResultRecord, COLUMNS};
pub use seed::{derive_seed, stream_rng, Stream};
pub use summary::{
    emit_plot_data, eq19_max_deviation, fit_collapse, render_report, summarize_ratio, CollapseFit,
    PlotKind, RatioRow, RatioSummary, PLOT_COLUMNS,
};

use crate::error::{Error, Result};
use crate::forward::{load_leadfield, measure, place_pair, synth_leadfield, Leadfield};
use crate::inverse::{build_inverter, ErrorProfile, RegularizedInverter};
use crate::mvar::{generate_accepted, MvarModel, SourcePair};
use crate::optimize::find_optimal_lambdas_profiled;
use crate::spectra::{complexity, complexity_per_bin, predicted_snr_s, snr_s, welch, CrossSpectrum};

/// An accepted MVAR model with its normalized source pair.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    pub model_id: usize,
    pub gamma: f64,
    pub model: MvarModel,
    pub pair: SourcePair,
    /// Welch spectrum of the pair (2 x 2 per bin).
    pub spectrum: CrossSpectrum,
    pub attempts: usize,
}

/// Leadfield, its factorization and the configuration of a sweep.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub leadfield: Leadfield,
    pub inverter: RegularizedInverter,
}

pub fn obtain_leadfield(cfg: &ExperimentConfig) -> Result<Leadfield> {
    match &cfg.leadfield {
        LeadfieldSource::File(path) => load_leadfield(path),
        LeadfieldSource::Synth { sensors, sources } => {
            let seed = cfg
                .leadfield_seed
                .unwrap_or_else(|| derive_seed(cfg.master_seed, Stream::Leadfield, [0; 3]));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            synth_leadfield(*sensors, *sources, &mut rng)
        }
    }
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let leadfield = obtain_leadfield(&config)?;
        Self::with_leadfield(config, leadfield)
    }

    pub fn with_leadfield(config: ExperimentConfig, leadfield: Leadfield) -> Result<Self> {
        config.validate()?;
        let inverter = build_inverter(&leadfield.gain)?;
        Ok(Self {
            config,
            leadfield,
            inverter,
        })
    }

    /// Draws `gamma` and rejection-samples model `model_id`.
    pub fn prepare_model(&self, model_id: usize) -> Result<PreparedModel> {
        let cfg = &self.config;
        let mut rng = stream_rng(cfg.master_seed, Stream::Model, [model_id as u64, 0, 0]);
        let (lo, hi) = cfg.gamma_range;
        let gamma = if lo < hi { rng.random_range(lo..hi) } else { lo };
        let (model, mut pair, attempts) =
            generate_accepted(gamma, cfg.mvar_order, cfg.samples, &cfg.mvar, &mut rng)?;
        let spectrum = welch(&pair.samples, &cfg.welch)?;
        pair.model_id = model_id;
        pair.complexity = complexity(&spectrum);
        Ok(PreparedModel {
            model_id,
            gamma,
            model,
            pair,
            spectrum,
            attempts,
        })
    }

    /// Active source indices for location `loc_id`.
    pub fn prepare_location(&self, loc_id: usize) -> Result<(usize, usize)> {
        let cfg = &self.config;
        let mut rng = stream_rng(cfg.master_seed, Stream::Location, [loc_id as u64, 0, 0]);
        place_pair(&self.leadfield, cfg.min_distance_m, cfg.norm_ratio_tol, &mut rng)
    }

    pub fn noise_seed(&self, model_id: usize, loc_id: usize, snr_id: usize) -> u64 {
        derive_seed(
            self.config.master_seed,
            Stream::Noise,
            [model_id as u64, loc_id as u64, snr_id as u64],
        )
    }

    /// Runs one configuration given its prepared model and location.
    pub fn run_cell(
        &self,
        model: &PreparedModel,
        loc_id: usize,
        indices: (usize, usize),
        snr_id: usize,
    ) -> Result<ResultRecord> {
        let cfg = &self.config;
        let seed = self.noise_seed(model.model_id, loc_id, snr_id);
        let snr_target = cfg.snr_levels()[snr_id];
        let n = self.leadfield.n_sources();
        let (i, j) = indices;

        let x = crate::forward::embed_sources(&model.pair.samples, indices, n)?.full_x;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = measure(&self.leadfield, &x, snr_target, &mut rng)?;

        let profile = ErrorProfile::from_parts(
            &self.inverter,
            &data.y,
            &x,
            &[i, j],
            &model.spectrum,
            &cfg.welch,
        )?;
        let (best_x, best_s) = find_optimal_lambdas_profiled(&self.inverter, &profile, &cfg.optim)?;

        let g_pair: DMatrix<f64> = self.leadfield.columns(&[i, j]);
        let snr_s_db = snr_s(&g_pair, &model.spectrum, data.alpha)?;
        let snr_s_predicted_db = predicted_snr_s(&g_pair, &model.spectrum, &model.pair.samples, snr_target)?;

        Ok(ResultRecord {
            model_id: model.model_id,
            loc_id,
            snr_id,
            seed,
            gamma: model.gamma,
            complexity: model.pair.complexity,
            complexity_per_bin: complexity_per_bin(&model.spectrum),
            source_i: i,
            source_j: j,
            alpha: data.alpha,
            snr_x_target_db: snr_target,
            snr_x_realized_db: data.realized_snr_db()?,
            snr_s_db,
            snr_s_predicted_db,
            lambda_x_star: best_x.lambda_star,
            eps_x_star: best_x.eps_star,
            lambda_x_boundary: best_x.boundary,
            n_evals_x: best_x.n_evals,
            lambda_s_star: best_s.lambda_star,
            eps_s_star: best_s.eps_star,
            lambda_s_boundary: best_s.boundary,
            n_evals_s: best_s.n_evals,
            error: None,
        })
    }

    /// Reproduces a single cell from the master seed alone.
    pub fn run_single(&self, model_id: usize, loc_id: usize, snr_id: usize) -> ResultRecord {
        let seed = self.noise_seed(model_id, loc_id, snr_id);
        let result = self.prepare_model(model_id).and_then(|model| {
            let indices = self.prepare_location(loc_id)?;
            self.run_cell(&model, loc_id, indices, snr_id)
        });
        result.unwrap_or_else(|e| ResultRecord::failed(model_id, loc_id, snr_id, seed, e.to_string()))
    }

    /// Runs every cell; output is sorted by `(model_id, loc_id, snr_id)`.
    /// Failures are captured per record.
    pub fn run(&self) -> Vec<ResultRecord> {
        let cfg = &self.config;
        let models: Vec<Result<PreparedModel>> =
            (0..cfg.n_mod).into_par_iter().map(|m| self.prepare_model(m)).collect();
        let locations: Vec<Result<(usize, usize)>> =
            (0..cfg.n_loc).map(|l| self.prepare_location(l)).collect();

        let cells: Vec<(usize, usize, usize)> = (0..cfg.n_mod)
            .flat_map(|m| (0..cfg.n_loc).flat_map(move |l| (0..cfg.n_snr).map(move |s| (m, l, s))))
            .collect();
        cells
            .into_par_iter()
            .map(|(m, l, s)| {
                let result = match (&models[m], &locations[l]) {
                    (Ok(model), Ok(indices)) => self.run_cell(model, l, *indices, s),
                    (Err(e), _) | (_, Err(e)) => Err(Error::InvalidConfig(e.to_string())),
                };
                result.unwrap_or_else(|e| {
                    ResultRecord::failed(m, l, s, self.noise_seed(m, l, s), e.to_string())
                })
            })
            .collect()
    }
}

/// Builds the experiment and runs the whole sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    Ok(Experiment::new(cfg.clone())?.run())
}

/// Writes the effective configuration next to a records file, in the config
/// file format, with a few notes on choices that are not config keys.
pub fn write_metadata(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from(
        "# effective sweep configuration (re-usable as --config)\n\
         # location pairs are drawn once and shared across models\n\
         # norm_ratio_tol quantifies the column-norm similarity of the active pair\n",
    );
    text.push_str(&cfg.to_config_string());
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
