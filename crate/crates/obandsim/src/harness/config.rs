//! Experiment configuration: strict-schema TOML parsing, preset merging,
//! validation, and canonical serialization.
//!
//! A config file may start from a shipped preset (`preset = "1310nm_50gbd"`)
//! and override any key; unknown keys are rejected with the parser's
//! line/column diagnostics. Defaults for every optional key:
//!
//! | key | default |
//! |-----|---------|
//! | `n_symbols` | 32768 |
//! | `samples_per_symbol` | 2 |
//! | `rrc_rolloff` | 0.01 |
//! | `rrc_span_symbols` | 128 |
//! | `b2b_snr_db` | `inf` (transceiver noise disabled) |
//! | `tx_noise_fraction` | 0.5 (rest of the floor applied at the receiver) |
//! | `master_seed` | 1 |
//! | `traces` | 50 |
//! | `parallel` | true |
//! | `compensation` | `"dbp"` |
//! | `link.ase_enabled` | true |
//! | `ssfm.max_step_phase_rad` | 0.003 (adaptive when `steps_per_span` absent) |
//! | `ssfm.nonlinear_mode` | `"manakov"` |
//! | `dbp.kappa` | 0.5 |
//! | `dbp.d_dbp_ps_nm_km` | the link's length-weighted dispersion |
//! | `dbp.gamma_dbp_per_w_km` | the link's length-weighted γ |
//! | `dbp.mode` | `"single_step_wh"` |
//! | `dbp.steps_per_span` | 1 (multi-step mode only) |

use crate::channel::{
    FiberSpan, LinkConfig, Lop2Rule, NfSource, NonlinearMode, SsfmConfig, StepPolicy,
    DEFAULT_MAX_STEP_PHASE_RAD,
};
use crate::dsp::{DbpConfig, DbpMode};
use crate::harness::preset;
use crate::metrics::Compensation;
use crate::txrx::TxConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error in '{path}':\n{message}")]
    Parse { path: String, message: String },
    #[error("unknown preset '{name}'; available: {available}")]
    UnknownPreset { name: String, available: String },
    #[error("config error: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

// ---------------------------------------------------------------------------
// Raw (on-disk) schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol_rate_bd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qam_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_symbols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_symbol: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rrc_rolloff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rrc_span_symbols: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b2b_snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_noise_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lop1_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallel: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compensation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link: Option<RawLink>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssfm: Option<RawSsfm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dbp: Option<RawDbp>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLink {
    pub signal_wavelength_nm: f64,
    pub spans: Vec<RawSpan>,
    pub mid_amp: RawMidAmp,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lop_map: Option<RawLopMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ase_enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_amp_nf_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpan {
    pub length_km: f64,
    pub alpha_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub gamma_per_w_km: f64,
}

/// Amplifier description: either a gain/NF profile CSV (path relative to
/// the file that declared it, or the literal `"builtin"` for the shipped
/// BDFA dataset) or an explicit noise figure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMidAmp {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nf_db: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLopMap {
    pub lop1_dbm: Vec<f64>,
    pub lop2_dbm: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSsfm {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_span: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step_phase_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlinear_mode: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDbp {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_dbp_ps_nm_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_dbp_per_w_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_span: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub axis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_values: Option<Vec<f64>>,
}

impl RawConfig {
    /// Overlays `self` (the overriding layer) on top of `base`.
    fn merged_over(self, base: RawConfig) -> RawConfig {
        // An explicit link in the overriding layer replaces the base's link
        // however the base expressed it, and vice versa.
        let (link, link_preset) = match (self.link, self.link_preset) {
            (None, None) => (base.link, base.link_preset),
            chosen => chosen,
        };
        RawConfig {
            preset: None,
            link_preset,
            symbol_rate_bd: self.symbol_rate_bd.or(base.symbol_rate_bd),
            qam_order: self.qam_order.or(base.qam_order),
            n_symbols: self.n_symbols.or(base.n_symbols),
            samples_per_symbol: self.samples_per_symbol.or(base.samples_per_symbol),
            rrc_rolloff: self.rrc_rolloff.or(base.rrc_rolloff),
            rrc_span_symbols: self.rrc_span_symbols.or(base.rrc_span_symbols),
            b2b_snr_db: self.b2b_snr_db.or(base.b2b_snr_db),
            tx_noise_fraction: self.tx_noise_fraction.or(base.tx_noise_fraction),
            lop1_dbm: self.lop1_dbm.or(base.lop1_dbm),
            master_seed: self.master_seed.or(base.master_seed),
            traces: self.traces.or(base.traces),
            parallel: self.parallel.or(base.parallel),
            compensation: self.compensation.or(base.compensation),
            link,
            ssfm: self.ssfm.or(base.ssfm),
            dbp: self.dbp.or(base.dbp),
            sweep: self.sweep.or(base.sweep),
        }
    }
}

// ---------------------------------------------------------------------------
// Resolved configuration
// ---------------------------------------------------------------------------

/// Sweep axes understood by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lop1Dbm,
    Kappa,
    DbpGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub d_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
}

/// Fully resolved, validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub wavelength_nm: f64,
    pub symbol_rate_bd: f64,
    pub qam_order: usize,
    pub n_symbols: usize,
    pub samples_per_symbol: usize,
    pub rrc_rolloff: f64,
    pub rrc_span_symbols: usize,
    /// Transceiver-noise floor target; +∞ disables the floor.
    pub b2b_snr_db: f64,
    /// Fraction of the floor injected at the transmitter (propagates
    /// through the nonlinear channel); the rest lands on receiver symbols.
    pub tx_noise_fraction: f64,
    pub lop1_dbm: Option<f64>,
    pub master_seed: u64,
    pub traces: usize,
    pub parallel: bool,
    pub compensation: Compensation,
    pub spans: Vec<FiberSpan>,
    pub mid_amp_nf: NfSource,
    pub lop2_rule: Lop2Rule,
    pub ase_enabled: bool,
    pub rx_amp_nf_db: Option<f64>,
    pub ssfm_steps_per_span: Option<usize>,
    pub ssfm_max_step_phase_rad: f64,
    pub nonlinear_mode: NonlinearMode,
    pub dbp_kappa: f64,
    pub dbp_d_ps_nm_km: f64,
    pub dbp_gamma_per_w_km: f64,
    pub dbp_mode: DbpMode,
    pub sweep: Option<SweepSpec>,
    /// Canonical merged raw form (preset applied, defaults materialized);
    /// serializing and re-parsing it is a fixed point.
    canonical: RawConfig,
}

impl ExperimentConfig {
    pub fn tx_config(&self) -> TxConfig {
        TxConfig {
            symbol_rate_bd: self.symbol_rate_bd,
            rolloff: self.rrc_rolloff,
            samples_per_symbol: self.samples_per_symbol,
            n_symbols: self.n_symbols,
            rrc_span_symbols: self.rrc_span_symbols,
        }
    }

    pub fn link_config(&self, lop1_dbm: f64) -> LinkConfig {
        LinkConfig {
            spans: self.spans.clone(),
            mid_amp_nf: self.mid_amp_nf.clone(),
            signal_wavelength_nm: self.wavelength_nm,
            lop1_dbm,
            lop2_rule: self.lop2_rule.clone(),
            ase_enabled: self.ase_enabled,
            rx_amp_nf_db: self.rx_amp_nf_db,
        }
    }

    pub fn ssfm_config(&self) -> SsfmConfig {
        SsfmConfig {
            steps: match self.ssfm_steps_per_span {
                Some(n) => StepPolicy::Fixed(n),
                None => StepPolicy::AdaptivePhase {
                    max_step_phase_rad: self.ssfm_max_step_phase_rad,
                },
            },
            nonlinear_mode: self.nonlinear_mode,
        }
    }

    pub fn dbp_config(&self) -> DbpConfig {
        DbpConfig {
            kappa: self.dbp_kappa,
            d_dbp_ps_nm_km: self.dbp_d_ps_nm_km,
            gamma_dbp_per_w_km: self.dbp_gamma_per_w_km,
            mode: self.dbp_mode,
            nonlinear_mode: self.nonlinear_mode,
        }
    }

    /// Dispersion the EDC inverts: the link's length-weighted span value.
    pub fn edc_d_ps_nm_km(&self) -> f64 {
        let total: f64 = self.spans.iter().map(|s| s.length_km).sum();
        self.spans
            .iter()
            .map(|s| s.dispersion_ps_nm_km * s.length_km)
            .sum::<f64>()
            / total
    }

    /// LOP1 values of the link's measured table, if it has one.
    pub fn lop_table_rows(&self) -> Option<Vec<f64>> {
        match &self.lop2_rule {
            Lop2Rule::Table(rows) => Some(rows.iter().map(|r| r.0).collect()),
            Lop2Rule::FixedGain(_) => None,
        }
    }

    /// Canonical TOML text of the merged config.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(&self.canonical).expect("canonical config serializes")
    }

    /// FNV-1a hash of the canonical form, as 16 hex digits.
    pub fn config_hash(&self) -> String {
        let mut hash = 0xCBF2_9CE4_8422_2325u64;
        for b in self.canonical_toml().bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
        }
        format!("{hash:016x}")
    }
}

// ---------------------------------------------------------------------------
// Parsing and resolution
// ---------------------------------------------------------------------------

fn parse_raw(text: &str, origin: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })
}

/// Parses and resolves a config file from disk. Relative link-preset and
/// profile paths resolve against the config file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw = parse_raw(&text, &path.display().to_string())?;
    resolve_config(raw, path.parent())
}

/// Parses and resolves a config from text (no file-system base directory;
/// only embedded presets and `"builtin"` profiles are reachable).
pub fn parse_config_str(text: &str, origin: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw = parse_raw(text, origin)?;
    resolve_config(raw, None)
}

/// Resolves a shipped preset by name, with optional overrides applied on
/// top. `overrides` uses the same schema as a config file.
pub fn preset_config(name: &str, overrides: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let base = preset::experiment_preset(name)?;
    let raw = parse_raw(base, &format!("preset '{name}'"))?;
    resolve_config(overrides.merged_over(raw), None)
}

pub fn resolve_config(
    mut raw: RawConfig,
    base_dir: Option<&Path>,
) -> Result<ExperimentConfig, ConfigError> {
    // Apply a named preset as the base layer.
    if let Some(name) = raw.preset.take() {
        let base = parse_raw(
            preset::experiment_preset(&name)?,
            &format!("preset '{name}'"),
        )?;
        raw = raw.merged_over(base);
    }

    // Resolve the link: inline section or named/file preset. Relative
    // paths inside the link resolve against the file that declared it.
    let (raw_link, link_base) = match (&raw.link, &raw.link_preset) {
        (Some(link), None) => (link.clone(), base_dir.map(std::path::PathBuf::from)),
        (None, Some(name)) => preset::load_link(name, base_dir)?,
        (Some(_), Some(_)) => {
            return Err(invalid("specify either 'link' or 'link_preset', not both"))
        }
        (None, None) => return Err(invalid("config needs a 'link' section or a 'link_preset'")),
    };

    let wavelength_nm = raw_link.signal_wavelength_nm;
    if !(wavelength_nm > 0.0) {
        return Err(invalid("signal_wavelength_nm must be positive"));
    }
    if raw_link.spans.is_empty() {
        return Err(invalid("link must define at least one span"));
    }
    let spans: Vec<FiberSpan> = raw_link
        .spans
        .iter()
        .map(|s| FiberSpan {
            length_km: s.length_km,
            alpha_db_per_km: s.alpha_db_per_km,
            dispersion_ps_nm_km: s.dispersion_ps_nm_km,
            gamma_per_w_km: s.gamma_per_w_km,
            ref_wavelength_nm: wavelength_nm,
        })
        .collect();
    for s in &spans {
        s.validate()
            .map_err(|e| invalid(format!("bad span: {e}")))?;
    }

    let mid_amp_nf = match (&raw_link.mid_amp.profile_csv, raw_link.mid_amp.nf_db) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "mid_amp: specify either 'profile_csv' or 'nf_db', not both",
            ))
        }
        (None, None) => {
            return Err(invalid("mid_amp needs a 'profile_csv' or an 'nf_db'"))
        }
        (Some(path), None) => {
            let profile = preset::load_profile(path, link_base.as_deref())?;
            profile
                .lookup(wavelength_nm)
                .map_err(|e| invalid(format!("amplifier profile: {e}")))?;
            NfSource::Profile(profile)
        }
        (None, Some(nf)) => {
            if !(nf >= 0.0) {
                return Err(invalid(format!("mid_amp.nf_db must be ≥ 0, got {nf}")));
            }
            NfSource::Fixed(nf)
        }
    };

    let lop2_rule = match (&raw_link.lop_map, raw_link.fixed_gain_db) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "link: specify either 'lop_map' or 'fixed_gain_db', not both",
            ))
        }
        (None, None) => {
            return Err(invalid("link needs a 'lop_map' or a 'fixed_gain_db'"))
        }
        (Some(map), None) => {
            if map.lop1_dbm.len() != map.lop2_dbm.len() || map.lop1_dbm.is_empty() {
                return Err(invalid(
                    "lop_map: lop1_dbm and lop2_dbm must be non-empty and equal length",
                ));
            }
            if map.lop1_dbm.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("lop_map: lop1_dbm must be strictly increasing"));
            }
            if spans.len() != 2 {
                return Err(invalid("a measured lop_map requires exactly 2 spans"));
            }
            Lop2Rule::Table(
                map.lop1_dbm
                    .iter()
                    .copied()
                    .zip(map.lop2_dbm.iter().copied())
                    .collect(),
            )
        }
        (None, Some(gain)) => Lop2Rule::FixedGain(gain),
    };

    // Scalar knobs with defaults.
    let symbol_rate_bd = raw
        .symbol_rate_bd
        .ok_or_else(|| invalid("symbol_rate_bd is required"))?;
    if !(symbol_rate_bd.is_finite() && symbol_rate_bd > 0.0) {
        return Err(invalid(format!(
            "symbol_rate_bd must be positive and finite, got {symbol_rate_bd}"
        )));
    }
    let qam_order = raw.qam_order.ok_or_else(|| invalid("qam_order is required"))?;
    if ![4, 16, 64, 256].contains(&qam_order) {
        return Err(invalid(format!(
            "qam_order must be one of 4, 16, 64, 256; got {qam_order}"
        )));
    }
    let n_symbols = raw.n_symbols.unwrap_or(32768);
    let samples_per_symbol = raw.samples_per_symbol.unwrap_or(2);
    let n_samples = n_symbols * samples_per_symbol;
    if n_samples < 64 || !n_samples.is_power_of_two() {
        return Err(invalid(format!(
            "n_symbols·samples_per_symbol must be a power of two ≥ 64, got {n_samples}"
        )));
    }
    let rrc_rolloff = raw.rrc_rolloff.unwrap_or(0.01);
    let rrc_span_symbols = raw.rrc_span_symbols.unwrap_or(128);
    let b2b_snr_db = raw.b2b_snr_db.unwrap_or(f64::INFINITY);
    if b2b_snr_db.is_nan() || b2b_snr_db == f64::NEG_INFINITY {
        return Err(invalid("b2b_snr_db must be finite or +inf"));
    }
    let tx_noise_fraction = raw.tx_noise_fraction.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&tx_noise_fraction) {
        return Err(invalid(format!(
            "tx_noise_fraction must lie in [0, 1], got {tx_noise_fraction}"
        )));
    }
    let traces = raw.traces.unwrap_or(50);
    if traces == 0 {
        return Err(invalid("traces must be ≥ 1"));
    }
    let compensation = match raw.compensation.as_deref().unwrap_or("dbp") {
        "edc" => Compensation::Edc,
        "dbp" => Compensation::Dbp,
        other => {
            return Err(invalid(format!(
                "compensation must be 'edc' or 'dbp', got '{other}'"
            )))
        }
    };

    let ssfm = raw.ssfm.clone().unwrap_or_default();
    if ssfm.steps_per_span == Some(0) {
        return Err(invalid("ssfm.steps_per_span must be ≥ 1"));
    }
    let ssfm_max_step_phase_rad = ssfm.max_step_phase_rad.unwrap_or(DEFAULT_MAX_STEP_PHASE_RAD);
    if !(ssfm_max_step_phase_rad > 0.0) {
        return Err(invalid("ssfm.max_step_phase_rad must be positive"));
    }
    let nonlinear_mode = match ssfm.nonlinear_mode.as_deref().unwrap_or("manakov") {
        "manakov" => NonlinearMode::Manakov,
        "scalar" => NonlinearMode::Scalar,
        other => {
            return Err(invalid(format!(
                "ssfm.nonlinear_mode must be 'manakov' or 'scalar', got '{other}'"
            )))
        }
    };

    let total_length: f64 = spans.iter().map(|s| s.length_km).sum();
    let link_d = spans
        .iter()
        .map(|s| s.dispersion_ps_nm_km * s.length_km)
        .sum::<f64>()
        / total_length;
    let link_gamma = spans
        .iter()
        .map(|s| s.gamma_per_w_km * s.length_km)
        .sum::<f64>()
        / total_length;
    let dbp = raw.dbp.clone().unwrap_or_default();
    let dbp_kappa = dbp.kappa.unwrap_or(0.5);
    let dbp_d_ps_nm_km = dbp.d_dbp_ps_nm_km.unwrap_or(link_d);
    let dbp_gamma_per_w_km = dbp.gamma_dbp_per_w_km.unwrap_or(link_gamma);
    let dbp_steps = dbp.steps_per_span.unwrap_or(1);
    if dbp_steps == 0 {
        return Err(invalid("dbp.steps_per_span must be ≥ 1"));
    }
    let dbp_mode = match dbp.mode.as_deref().unwrap_or("single_step_wh") {
        "single_step_wh" => DbpMode::SingleStepWh,
        "multi_step" => DbpMode::MultiStep {
            steps_per_span: dbp_steps,
        },
        other => {
            return Err(invalid(format!(
                "dbp.mode must be 'single_step_wh' or 'multi_step', got '{other}'"
            )))
        }
    };
    if !(0.0..=1.0).contains(&dbp_kappa) {
        return Err(invalid(format!("dbp.kappa must lie in [0, 1], got {dbp_kappa}")));
    }
    if dbp_gamma_per_w_km < 0.0 {
        return Err(invalid("dbp.gamma_dbp_per_w_km must be ≥ 0"));
    }

    let sweep = match &raw.sweep {
        None => None,
        Some(s) => {
            let axis = match s.axis.as_str() {
                "lop1_dbm" => SweepAxis::Lop1Dbm,
                "kappa" => SweepAxis::Kappa,
                "dbp_grid" => SweepAxis::DbpGrid,
                other => {
                    return Err(invalid(format!(
                        "sweep.axis must be 'lop1_dbm', 'kappa' or 'dbp_grid', got '{other}'"
                    )))
                }
            };
            let check_sorted = |name: &str, vals: &[f64]| -> Result<(), ConfigError> {
                if vals.is_empty() {
                    return Err(invalid(format!("sweep.{name} must be non-empty")));
                }
                if vals.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid(format!(
                        "sweep.{name} must be strictly increasing"
                    )));
                }
                Ok(())
            };
            let values = s.values.clone().unwrap_or_default();
            let d_values = s.d_values.clone().unwrap_or_default();
            let gamma_values = s.gamma_values.clone().unwrap_or_default();
            match axis {
                SweepAxis::Lop1Dbm => check_sorted("values", &values)?,
                SweepAxis::Kappa => {
                    check_sorted("values", &values)?;
                    if values.iter().any(|&k| !(0.0..=1.0).contains(&k)) {
                        return Err(invalid("sweep.values for kappa must lie in [0, 1]"));
                    }
                }
                SweepAxis::DbpGrid => {
                    check_sorted("d_values", &d_values)?;
                    check_sorted("gamma_values", &gamma_values)?;
                }
            }
            Some(SweepSpec {
                axis,
                values,
                d_values,
                gamma_values,
            })
        }
    };

    // Reject launch powers outside a measured table immediately.
    if let (Some(lop1), Lop2Rule::Table(_)) = (raw.lop1_dbm, &lop2_rule) {
        lop2_rule
            .resolve_lop2_dbm(lop1, spans[0].loss_db())
            .map_err(|e| invalid(e.to_string()))?;
    }

    let tx_probe = TxConfig {
        symbol_rate_bd,
        rolloff: rrc_rolloff,
        samples_per_symbol,
        n_symbols,
        rrc_span_symbols,
    };
    tx_probe.validate().map_err(|e| invalid(e.to_string()))?;

    // Materialize the canonical merged form (every default written out).
    let canonical = RawConfig {
        preset: None,
        link_preset: None,
        symbol_rate_bd: Some(symbol_rate_bd),
        qam_order: Some(qam_order),
        n_symbols: Some(n_symbols),
        samples_per_symbol: Some(samples_per_symbol),
        rrc_rolloff: Some(rrc_rolloff),
        rrc_span_symbols: Some(rrc_span_symbols),
        b2b_snr_db: Some(b2b_snr_db),
        tx_noise_fraction: Some(tx_noise_fraction),
        lop1_dbm: raw.lop1_dbm,
        master_seed: Some(raw.master_seed.unwrap_or(1)),
        traces: Some(traces),
        parallel: Some(raw.parallel.unwrap_or(true)),
        compensation: Some(compensation.as_str().to_string()),
        link: Some(RawLink {
            signal_wavelength_nm: wavelength_nm,
            spans: raw_link.spans.clone(),
            mid_amp: normalize_mid_amp(&raw_link.mid_amp),
            lop_map: raw_link.lop_map.clone(),
            fixed_gain_db: raw_link.fixed_gain_db,
            ase_enabled: Some(raw_link.ase_enabled.unwrap_or(true)),
            rx_amp_nf_db: raw_link.rx_amp_nf_db,
        }),
        ssfm: Some(RawSsfm {
            steps_per_span: ssfm.steps_per_span,
            max_step_phase_rad: Some(ssfm_max_step_phase_rad),
            nonlinear_mode: Some(
                match nonlinear_mode {
                    NonlinearMode::Manakov => "manakov",
                    NonlinearMode::Scalar => "scalar",
                }
                .to_string(),
            ),
        }),
        dbp: Some(RawDbp {
            kappa: Some(dbp_kappa),
            d_dbp_ps_nm_km: Some(dbp_d_ps_nm_km),
            gamma_dbp_per_w_km: Some(dbp_gamma_per_w_km),
            mode: Some(
                match dbp_mode {
                    DbpMode::SingleStepWh => "single_step_wh",
                    DbpMode::MultiStep { .. } => "multi_step",
                }
                .to_string(),
            ),
            steps_per_span: Some(dbp_steps),
        }),
        sweep: raw.sweep.clone(),
    };

    Ok(ExperimentConfig {
        wavelength_nm,
        symbol_rate_bd,
        qam_order,
        n_symbols,
        samples_per_symbol,
        rrc_rolloff,
        rrc_span_symbols,
        b2b_snr_db,
        tx_noise_fraction,
        lop1_dbm: raw.lop1_dbm,
        master_seed: raw.master_seed.unwrap_or(1),
        traces,
        parallel: raw.parallel.unwrap_or(true),
        compensation,
        spans,
        mid_amp_nf,
        lop2_rule,
        ase_enabled: raw_link.ase_enabled.unwrap_or(true),
        rx_amp_nf_db: raw_link.rx_amp_nf_db,
        ssfm_steps_per_span: ssfm.steps_per_span,
        ssfm_max_step_phase_rad,
        nonlinear_mode,
        dbp_kappa,
        dbp_d_ps_nm_km,
        dbp_gamma_per_w_km,
        dbp_mode,
        sweep,
        canonical,
    })
}

/// Keeps the canonical form portable: the shipped dataset is written as
/// `"builtin"`, so a canonical config re-parses from any directory.
fn normalize_mid_amp(raw: &RawMidAmp) -> RawMidAmp {
    match (&raw.profile_csv, raw.nf_db) {
        (Some(path), None) if preset::is_builtin_profile(path) => RawMidAmp {
            profile_csv: Some("builtin".to_string()),
            nf_db: None,
        },
        _ => raw.clone(),
    }
}
