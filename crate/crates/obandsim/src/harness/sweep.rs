//! Sweep orchestration: launch power, Wiener–Hammerstein split, and the
//! DBP (dispersion, γ) grid.
//!
//! Each trace propagates through the fibre once and is then scored by every
//! compensation variant of the sweep (common random numbers), so curves are
//! directly comparable and cheap. Traces fan out across threads when the
//! config enables `parallel`; results are collected in trace order, so
//! parallel and serial runs emit identical bytes.

use crate::dsp::{dbp_param_sweep, DbpConfig, DbpSweepOutcome};
use crate::harness::config::ExperimentConfig;
use crate::harness::run::TraceEngine;
use crate::harness::HarnessError;
use crate::metrics::{aggregate, Compensation, MetricsRecord};
use rayon::prelude::*;

/// What a [`SweepResult`] contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// A single operating point (the `run` subcommand).
    Single,
    /// SNR versus launch power, EDC and DBP variants.
    Lop,
    /// DBP gain versus the Wiener–Hammerstein split κ at fixed power.
    Kappa,
    /// SNR over the (d_dbp, γ_dbp) grid at fixed power.
    DbpGrid,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Single => "single",
            SweepKind::Lop => "lop",
            SweepKind::Kappa => "kappa",
            SweepKind::DbpGrid => "dbp_grid",
        }
    }
}

/// Run provenance stamped into every output file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub master_seed: u64,
    pub config_hash: String,
    pub tool_version: String,
    /// Extra `key=value` facts (optimal powers, sweep anchors, argmax).
    pub notes: Vec<String>,
}

/// Ordered sweep records plus run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub records: Vec<MetricsRecord>,
    pub meta: RunMeta,
    /// Full (d, γ) gain surface, present for [`SweepKind::DbpGrid`].
    pub dbp_map: Option<DbpSweepOutcome>,
}

fn meta(cfg: &ExperimentConfig) -> RunMeta {
    RunMeta {
        master_seed: cfg.master_seed,
        config_hash: cfg.config_hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        notes: Vec::new(),
    }
}

/// Maps trace indices through `f`, in parallel when configured, always
/// collecting in trace order.
fn map_traces<T: Send>(
    parallel: bool,
    n_traces: usize,
    f: impl Fn(u64) -> Result<T, HarnessError> + Sync + Send,
) -> Result<Vec<T>, HarnessError> {
    if parallel {
        (0..n_traces as u64).into_par_iter().map(f).collect()
    } else {
        (0..n_traces as u64).map(f).collect()
    }
}

fn format_dbm(v: f64) -> String {
    format!("{v}")
}

/// Runs the configured operating point over all traces and aggregates.
pub fn run_point(engine: &TraceEngine) -> Result<SweepResult, HarnessError> {
    let cfg = engine.cfg();
    let records = map_traces(cfg.parallel, cfg.traces, |trace| engine.run_single(trace))?;
    let aggregated = aggregate(&records)?;
    Ok(SweepResult {
        kind: SweepKind::Single,
        records: vec![aggregated],
        meta: meta(cfg),
        dbp_map: None,
    })
}

/// Linear-domain mean SNR in dB of per-trace records.
fn mean_snr_db(records: &[MetricsRecord]) -> f64 {
    let lin: f64 = records
        .iter()
        .map(|r| 10f64.powf(r.snr_db / 10.0))
        .sum::<f64>()
        / records.len() as f64;
    10.0 * lin.log10()
}

/// Coarse argmax of SNR over candidate launch powers for one compensation,
/// used to anchor κ and DBP-grid sweeps when the config leaves the power
/// open. Runs a reduced trace count; ties break toward the lower power.
fn optimal_lop(
    engine: &TraceEngine,
    candidates: &[f64],
    compensation: Compensation,
    traces: usize,
) -> Result<f64, HarnessError> {
    let cfg = engine.cfg();
    let dbp_cfg = cfg.dbp_config();
    let mut best: Option<(f64, f64)> = None; // (snr_db, lop)
    for &lop in candidates {
        let recs = map_traces(cfg.parallel, traces, |trace| {
            let prop = engine.propagate(trace, lop)?;
            engine.receive(&prop, compensation, &dbp_cfg)
        })?;
        let snr = mean_snr_db(&recs);
        if best.map_or(true, |(s, _)| snr > s) {
            best = Some((snr, lop));
        }
    }
    Ok(best.expect("non-empty candidate list").1)
}

fn lop_candidates(cfg: &ExperimentConfig) -> Result<Vec<f64>, HarnessError> {
    cfg.lop_table_rows().ok_or_else(|| {
        HarnessError::MissingLaunchPower(
            "no lop1_dbm configured and the link has no measured LOP table to search".to_string(),
        )
    })
}

/// SNR-versus-launch-power sweep, recording EDC and DBP at every power.
///
/// The trace noise streams depend only on the trace index, so every power
/// sees the same noise realizations and the curves are smooth. The optimal
/// power per variant is reported in the metadata notes.
pub fn sweep_lop(engine: &TraceEngine, powers: &[f64]) -> Result<SweepResult, HarnessError> {
    if powers.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    let cfg = engine.cfg();
    let dbp_cfg = cfg.dbp_config();
    let mut records = Vec::with_capacity(powers.len() * 2);
    for &lop in powers {
        let pairs = map_traces(cfg.parallel, cfg.traces, |trace| {
            let prop = engine.propagate(trace, lop)?;
            let edc_rec = engine.receive(&prop, Compensation::Edc, &dbp_cfg)?;
            let dbp_rec = engine.receive(&prop, Compensation::Dbp, &dbp_cfg)?;
            Ok((edc_rec, dbp_rec))
        })?;
        let (edc_recs, dbp_recs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        records.push(aggregate(&edc_recs)?);
        records.push(aggregate(&dbp_recs)?);
    }

    let mut result_meta = meta(cfg);
    let mut peaks = [0.0f64; 2];
    for (i, comp) in [Compensation::Edc, Compensation::Dbp].into_iter().enumerate() {
        let best = records
            .iter()
            .filter(|r| r.coords.compensation == comp)
            .max_by(|a, b| a.snr_db.partial_cmp(&b.snr_db).expect("finite SNR"))
            .expect("non-empty sweep");
        peaks[i] = best.snr_db;
        result_meta.notes.push(format!(
            "optimal_lop_{}_dbm={}",
            comp.as_str(),
            format_dbm(best.coords.lop1_dbm)
        ));
    }
    // The headline figure: achievable-SNR improvement, i.e. the DBP curve's
    // maximum over the EDC curve's maximum.
    result_meta
        .notes
        .push(format!("dbp_peak_gain_db={}", peaks[1] - peaks[0]));

    Ok(SweepResult {
        kind: SweepKind::Lop,
        records,
        meta: result_meta,
        dbp_map: None,
    })
}

/// DBP gain versus the Wiener–Hammerstein split κ at a fixed launch power.
///
/// The power is, in order of preference: `lop_override`, the config's
/// `lop1_dbm`, or the DBP-optimal power found by a reduced-trace search
/// over the link's measured LOP rows. The EDC baseline is recorded once
/// (it does not depend on κ), then one DBP record per κ.
pub fn sweep_kappa(
    engine: &TraceEngine,
    kappas: &[f64],
    lop_override: Option<f64>,
) -> Result<SweepResult, HarnessError> {
    if kappas.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    if kappas.iter().any(|k| !(0.0..=1.0).contains(k)) {
        return Err(HarnessError::InvalidSweepValue(
            "kappa values must lie in [0, 1]".to_string(),
        ));
    }
    let cfg = engine.cfg();
    let base_dbp = cfg.dbp_config();
    let lop = match lop_override.or(cfg.lop1_dbm) {
        Some(l) => l,
        None => {
            let candidates = lop_candidates(cfg)?;
            optimal_lop(engine, &candidates, Compensation::Dbp, cfg.traces.min(12))?
        }
    };

    let per_trace = map_traces(cfg.parallel, cfg.traces, |trace| {
        let prop = engine.propagate(trace, lop)?;
        let edc_rec = engine.receive(&prop, Compensation::Edc, &base_dbp)?;
        let mut dbp_recs = Vec::with_capacity(kappas.len());
        for &kappa in kappas {
            let cfg_k = DbpConfig {
                kappa,
                ..base_dbp
            };
            dbp_recs.push(engine.receive(&prop, Compensation::Dbp, &cfg_k)?);
        }
        Ok((edc_rec, dbp_recs))
    })?;

    let edc_recs: Vec<_> = per_trace.iter().map(|(e, _)| *e).collect();
    let mut records = vec![aggregate(&edc_recs)?];
    for (i, _) in kappas.iter().enumerate() {
        let recs: Vec<_> = per_trace.iter().map(|(_, d)| d[i]).collect();
        records.push(aggregate(&recs)?);
    }

    let mut result_meta = meta(cfg);
    result_meta
        .notes
        .push(format!("kappa_sweep_lop1_dbm={}", format_dbm(lop)));

    Ok(SweepResult {
        kind: SweepKind::Kappa,
        records,
        meta: result_meta,
        dbp_map: None,
    })
}

/// Sweeps the DBP (dispersion, γ) grid at a fixed launch power.
///
/// The power defaults to the EDC-optimal launch power (reduced-trace
/// search), matching the measurement procedure the sweep reproduces. CSV
/// records carry the EDC baseline and the argmax DBP point; the full SNR
/// surface is available in `dbp_map` and in the plot-data output.
pub fn sweep_dbp_grid(
    engine: &TraceEngine,
    d_values: &[f64],
    gamma_values: &[f64],
    lop_override: Option<f64>,
) -> Result<SweepResult, HarnessError> {
    if d_values.is_empty() || gamma_values.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    let cfg = engine.cfg();
    let base_dbp = cfg.dbp_config();
    let lop = match lop_override.or(cfg.lop1_dbm) {
        Some(l) => l,
        None => {
            let candidates = lop_candidates(cfg)?;
            optimal_lop(engine, &candidates, Compensation::Edc, cfg.traces.min(12))?
        }
    };

    let props = map_traces(cfg.parallel, cfg.traces, |trace| engine.propagate(trace, lop))?;
    let dsp_traces: Vec<_> = props.iter().map(|p| engine.dsp_trace(p)).collect();
    let outcome = dbp_param_sweep(
        &dsp_traces,
        base_dbp.kappa,
        d_values,
        gamma_values,
        base_dbp.nonlinear_mode,
    )?;
    drop(dsp_traces);

    // Summary records: EDC baseline and the full metrics at the argmax.
    let best_cfg = DbpConfig {
        d_dbp_ps_nm_km: outcome.best_d_ps_nm_km,
        gamma_dbp_per_w_km: outcome.best_gamma_per_w_km,
        ..base_dbp
    };
    let scored = map_traces(cfg.parallel, cfg.traces, |trace| {
        let prop = &props[trace as usize];
        let edc_rec = engine.receive(prop, Compensation::Edc, &base_dbp)?;
        let dbp_rec = engine.receive(prop, Compensation::Dbp, &best_cfg)?;
        Ok((edc_rec, dbp_rec))
    })?;
    let (edc_recs, dbp_recs): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
    let records = vec![aggregate(&edc_recs)?, aggregate(&dbp_recs)?];

    let mut result_meta = meta(cfg);
    result_meta.notes.push(format!(
        "dbp_grid_lop1_dbm={}",
        format_dbm(lop)
    ));
    result_meta.notes.push(format!(
        "best_d_dbp_ps_nm_km={}",
        outcome.best_d_ps_nm_km
    ));
    result_meta.notes.push(format!(
        "best_gamma_dbp_per_w_km={}",
        outcome.best_gamma_per_w_km
    ));

    Ok(SweepResult {
        kind: SweepKind::DbpGrid,
        records,
        meta: result_meta,
        dbp_map: Some(outcome),
    })
}
