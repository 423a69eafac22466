//! Command-line front end: `run`, `sweep-lop`, `sweep-kappa`, `sweep-dbp`.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 for runtime or
//! numerical errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use obandsim::harness::config::{RawConfig, SweepAxis};
use obandsim::harness::{
    self, emit_csv, emit_csv_to_path, emit_plot_data, emit_plot_data_to_path, ConfigError,
    HarnessError, SweepResult, TraceEngine,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "obandsim",
    version,
    about = "Coherent O-band link simulator: EDC/DBP compensation, SNR/GMI/AIR metrics, sweep harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured operating point and report aggregate metrics.
    Run(CommonArgs),
    /// Sweep launch power, recording EDC and DBP at every point.
    SweepLop(CommonArgs),
    /// Sweep the Wiener-Hammerstein split at fixed launch power.
    SweepKappa(CommonArgs),
    /// Sweep the DBP dispersion/nonlinearity grid at fixed launch power.
    SweepDbp(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped preset name (e.g. 1310nm_50gbd); overridden by --config keys.
    #[arg(long)]
    preset: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace count override.
    #[arg(long)]
    traces: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Plot,
}

fn load_config(args: &CommonArgs) -> Result<harness::ExperimentConfig, HarnessError> {
    let (mut raw, base_dir) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            (raw, path.parent().map(std::path::Path::to_path_buf))
        }
        None => (RawConfig::default(), None),
    };
    if let Some(name) = &args.preset {
        if raw.preset.is_some() {
            return Err(ConfigError::Invalid(
                "config file already names a preset; drop --preset".to_string(),
            )
            .into());
        }
        raw.preset = Some(name.clone());
    }
    if raw.preset.is_none() && raw.link.is_none() && raw.link_preset.is_none() {
        return Err(ConfigError::Invalid(
            "provide --config <path> and/or --preset <name>".to_string(),
        )
        .into());
    }
    if args.seed.is_some() {
        raw.master_seed = args.seed;
    }
    if args.traces.is_some() {
        raw.traces = args.traces;
    }
    Ok(harness::config::resolve_config(raw, base_dir.as_deref())?)
}

fn emit(result: &SweepResult, args: &CommonArgs) -> Result<(), HarnessError> {
    match (&args.out, args.format) {
        (Some(path), OutFormat::Csv) => emit_csv_to_path(result, path),
        (Some(path), OutFormat::Plot) => emit_plot_data_to_path(result, path),
        (None, OutFormat::Csv) => emit_csv(result, &mut std::io::stdout().lock()),
        (None, OutFormat::Plot) => emit_plot_data(result, &mut std::io::stdout().lock()),
    }
}

fn execute(command: &Command) -> Result<(), HarnessError> {
    let args = match command {
        Command::Run(a) | Command::SweepLop(a) | Command::SweepKappa(a) | Command::SweepDbp(a) => a,
    };
    let cfg = load_config(args)?;
    let engine = TraceEngine::new(cfg)?;
    let result = match command {
        Command::Run(_) => harness::run_point(&engine)?,
        Command::SweepLop(_) => {
            let cfg = engine.cfg();
            let powers: Vec<f64> = match &cfg.sweep {
                Some(s) if s.axis == SweepAxis::Lop1Dbm && !s.values.is_empty() => s.values.clone(),
                _ => cfg.lop_table_rows().ok_or_else(|| {
                    ConfigError::Invalid(
                        "sweep-lop needs [sweep] values with axis = \"lop1_dbm\", or a link with a measured LOP table".to_string(),
                    )
                })?,
            };
            harness::sweep_lop(&engine, &powers)?
        }
        Command::SweepKappa(_) => {
            let cfg = engine.cfg();
            let kappas: Vec<f64> = match &cfg.sweep {
                Some(s) if s.axis == SweepAxis::Kappa && !s.values.is_empty() => s.values.clone(),
                _ => vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            };
            harness::sweep_kappa(&engine, &kappas, None)?
        }
        Command::SweepDbp(_) => {
            let cfg = engine.cfg();
            let (d_values, gamma_values) = match &cfg.sweep {
                Some(s)
                    if s.axis == SweepAxis::DbpGrid
                        && !s.d_values.is_empty()
                        && !s.gamma_values.is_empty() =>
                {
                    (s.d_values.clone(), s.gamma_values.clone())
                }
                _ => {
                    let d = cfg.dbp_d_ps_nm_km;
                    (
                        vec![d - 1.5, d - 1.0, d - 0.5, d, d + 0.5, d + 1.0, d + 1.5],
                        vec![0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.4],
                    )
                }
            };
            harness::sweep_dbp_grid(&engine, &d_values, &gamma_values, None)?
        }
    };
    emit(&result, args)
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(&cli.command) {
        // A reader closing stdout early (e.g. `| head`) is not a failure.
        if let HarnessError::Io(io_err) = &err {
            if io_err.kind() == std::io::ErrorKind::BrokenPipe {
                return;
            }
        }
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
