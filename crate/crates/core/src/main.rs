use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;

use csd_inverse::forward::{load_leadfield, save_leadfield, synth_leadfield};
use csd_inverse::harness::{
    emit_plot_data, read_records_csv, render_report, run_experiment, write_metadata,
    write_records_csv, ExperimentConfig, PlotKind, Preset,
};
use csd_inverse::inverse::build_inverter;
use csd_inverse::{Error, Result};

#[derive(Parser)]
#[command(name = "csd-inverse", version, about = "Two-step cross-spectrum reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create or inspect leadfield files.
    Leadfield {
        #[command(subcommand)]
        action: LeadfieldCmd,
    },
    /// Run a sweep and write one record per configuration.
    Run {
        /// `key = value` configuration file applied on top of the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize a records file.
    Analyze {
        records: PathBuf,
        /// Report destination; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory for plot-data CSV files.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LeadfieldCmd {
    /// Generate a synthetic leadfield.
    Synth {
        #[arg(long)]
        sensors: usize,
        #[arg(long)]
        sources: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print dimensions and conditioning of a leadfield file.
    Info { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Leadfield {
            action: LeadfieldCmd::Synth {
                sensors,
                sources,
                seed,
                out,
            },
        } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let lf = synth_leadfield(sensors, sources, &mut rng)?;
            save_leadfield(&lf, &out)?;
            println!("wrote {sensors} x {sources} leadfield to {}", out.display());
            Ok(())
        }
        Command::Leadfield {
            action: LeadfieldCmd::Info { file },
        } => leadfield_info(&file),
        Command::Run {
            config,
            preset,
            out,
            jobs,
        } => {
            let mut cfg = ExperimentConfig::preset(preset);
            if let Some(path) = &config {
                cfg.apply_file(path)?;
            }
            cfg.validate()?;
            if let Some(k) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                    .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            }
            let records = run_experiment(&cfg)?;
            write_records_csv(&records, &out)?;
            let meta = metadata_path(&out);
            write_metadata(&cfg, &meta)?;
            let failed = records.iter().filter(|r| !r.is_ok()).count();
            println!(
                "{} records ({failed} failed) written to {}; configuration in {}",
                records.len(),
                out.display(),
                meta.display()
            );
            Ok(())
        }
        Command::Analyze {
            records,
            report,
            plots,
        } => {
            let recs = read_records_csv(&records)?;
            let text = render_report(&recs);
            match &report {
                Some(path) => std::fs::write(path, &text).map_err(|e| Error::io(path, e))?,
                None => print!("{text}"),
            }
            if let Some(dir) = &plots {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                for (name, kind) in [
                    ("fig3_snr_x.csv", PlotKind::LambdaSVsSnrX),
                    ("fig3_snr_s.csv", PlotKind::LambdaSVsSnrS),
                    ("fig4.csv", PlotKind::RatioVsSnrX),
                ] {
                    emit_plot_data(&recs, kind, dir.join(name))?;
                }
            }
            Ok(())
        }
    }
}

/// `records.csv` -> `records.csv.config`
fn metadata_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".config");
    PathBuf::from(name)
}

fn leadfield_info(file: &Path) -> Result<()> {
    let lf = load_leadfield(file)?;
    let inv = build_inverter(&lf.gain)?;
    let s = inv.singular_values();
    let norms: Vec<f64> = (0..lf.n_sources()).map(|q| lf.column_norm(q)).collect();
    let radius = |p: &[f64; 3]| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let span = |v: &mut dyn Iterator<Item = f64>| {
        v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    };
    let (nmin, nmax) = span(&mut norms.iter().copied());
    let (smin, smax) = span(&mut lf.sensor_positions.iter().map(radius));
    let (qmin, qmax) = span(&mut lf.source_positions.iter().map(radius));
    println!("sensors            {}", lf.n_sensors());
    println!("sources            {}", lf.n_sources());
    println!("rank               {}", inv.rank());
    println!("s_max              {:.6e}", s[0]);
    println!("s_min              {:.6e}", s[s.len() - 1]);
    println!("condition number   {:.6e}", s[0] / s[s.len() - 1]);
    println!("column norms       {nmin:.6e} .. {nmax:.6e}");
    println!("sensor radius (m)  {smin:.4} .. {smax:.4}");
    println!("source radius (m)  {qmin:.4} .. {qmax:.4}");
    Ok(())
}
