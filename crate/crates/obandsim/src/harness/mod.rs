//! Experiment orchestration: config parsing, shipped presets, sweeps, and
//! output emission.

pub mod config;
pub mod emit;
pub mod preset;
pub mod run;
pub mod sweep;

pub use config::{parse_config, parse_config_str, preset_config, ConfigError, ExperimentConfig};
pub use emit::{emit_csv, emit_csv_to_path, emit_plot_data, emit_plot_data_to_path};
pub use run::{PropagatedTrace, TraceEngine};
pub use sweep::{run_point, sweep_dbp_grid, sweep_kappa, sweep_lop, SweepKind, SweepResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sweep needs at least one value")]
    EmptySweep,
    #[error("invalid sweep value: {0}")]
    InvalidSweepValue(String),
    #[error("cannot emit an empty result")]
    EmptyResult,
    #[error("{0}")]
    MissingLaunchPower(String),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error(transparent)]
    TxRx(#[from] crate::txrx::TxRxError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 1 for configuration problems, 2 for runtime or
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}
