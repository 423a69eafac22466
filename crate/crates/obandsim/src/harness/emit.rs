//! Output emission: the sweep CSV and the plot-ready column format.
//!
//! Both formats are byte-stable for a fixed input: floats print with
//! Rust's shortest round-trip formatting and metadata rides in leading
//! `#` comment lines. The CSV column set is fixed:
//!
//! ```text
//! lop1_dbm,lop2_dbm,wavelength_nm,symbol_rate_bd,kappa,compensation,snr_db,gmi_bits,air_gbps,n_traces,seed
//! ```

use crate::harness::sweep::{SweepKind, SweepResult};
use crate::harness::HarnessError;
use crate::metrics::{Compensation, MetricsRecord};
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str =
    "lop1_dbm,lop2_dbm,wavelength_nm,symbol_rate_bd,kappa,compensation,snr_db,gmi_bits,air_gbps,n_traces,seed";

fn write_meta(result: &SweepResult, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "# obandsim v{}", result.meta.tool_version)?;
    writeln!(
        w,
        "# kind={} seed={} config_hash={}",
        result.kind.as_str(),
        result.meta.master_seed,
        result.meta.config_hash
    )?;
    for note in &result.meta.notes {
        writeln!(w, "# {note}")?;
    }
    Ok(())
}

fn write_record(result: &SweepResult, r: &MetricsRecord, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.coords.lop1_dbm,
        r.coords.lop2_dbm,
        r.coords.wavelength_nm,
        r.coords.symbol_rate_bd,
        r.coords.kappa,
        r.coords.compensation.as_str(),
        r.snr_db,
        r.gmi_bits_per_pdm_symbol,
        r.air_bits_per_s / 1e9,
        r.n_traces,
        result.meta.master_seed
    )
}

/// Writes the pinned-schema CSV for any sweep result.
pub fn emit_csv(result: &SweepResult, w: &mut impl Write) -> Result<(), HarnessError> {
    if result.records.is_empty() {
        return Err(HarnessError::EmptyResult);
    }
    write_meta(result, w)?;
    writeln!(w, "{CSV_HEADER}")?;
    for r in &result.records {
        write_record(result, r, w)?;
    }
    Ok(())
}

/// Writes curve-grouped columns ready for plotting.
///
/// - `lop`: one row per launch power with EDC and DBP columns side by side
///   plus the DBP gain;
/// - `kappa`: one row per split value with the κ-independent EDC baseline
///   repeated and the gain;
/// - `dbp_grid`: the SNR surface as a (d × γ) matrix;
/// - `single`: the record as labelled `key,value` rows.
pub fn emit_plot_data(result: &SweepResult, w: &mut impl Write) -> Result<(), HarnessError> {
    if result.records.is_empty() {
        return Err(HarnessError::EmptyResult);
    }
    write_meta(result, w)?;
    match result.kind {
        SweepKind::Single => {
            writeln!(w, "{CSV_HEADER}")?;
            for r in &result.records {
                write_record(result, r, w)?;
            }
        }
        SweepKind::Lop => {
            writeln!(
                w,
                "lop1_dbm,lop2_dbm,snr_edc_db,snr_dbp_db,gain_db,gmi_edc_bits,gmi_dbp_bits,air_edc_gbps,air_dbp_gbps"
            )?;
            for pair in result.records.chunks_exact(2) {
                let (edc, dbp) = (&pair[0], &pair[1]);
                debug_assert_eq!(edc.coords.compensation, Compensation::Edc);
                debug_assert_eq!(dbp.coords.compensation, Compensation::Dbp);
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    edc.coords.lop1_dbm,
                    edc.coords.lop2_dbm,
                    edc.snr_db,
                    dbp.snr_db,
                    dbp.snr_db - edc.snr_db,
                    edc.gmi_bits_per_pdm_symbol,
                    dbp.gmi_bits_per_pdm_symbol,
                    edc.air_bits_per_s / 1e9,
                    dbp.air_bits_per_s / 1e9
                )?;
            }
        }
        SweepKind::Kappa => {
            let edc = &result.records[0];
            writeln!(w, "kappa,snr_edc_db,snr_dbp_db,gain_db")?;
            for dbp in &result.records[1..] {
                writeln!(
                    w,
                    "{},{},{},{}",
                    dbp.coords.kappa,
                    edc.snr_db,
                    dbp.snr_db,
                    dbp.snr_db - edc.snr_db
                )?;
            }
        }
        SweepKind::DbpGrid => {
            let map = result.dbp_map.as_ref().ok_or(HarnessError::EmptyResult)?;
            // The map is d-major: γ cycles fastest, so the first run of
            // entries sharing the first d spells out the γ axis.
            let first_d = map.map[0].d_dbp_ps_nm_km;
            let gammas: Vec<f64> = map
                .map
                .iter()
                .take_while(|p| p.d_dbp_ps_nm_km == first_d)
                .map(|p| p.gamma_dbp_per_w_km)
                .collect();
            let ds: Vec<f64> = map
                .map
                .iter()
                .step_by(gammas.len())
                .map(|p| p.d_dbp_ps_nm_km)
                .collect();
            write!(w, "d_dbp_ps_nm_km")?;
            for g in &gammas {
                write!(w, ",snr_db_at_gamma_{g}")?;
            }
            writeln!(w)?;
            for (i, d) in ds.iter().enumerate() {
                write!(w, "{d}")?;
                for (j, _) in gammas.iter().enumerate() {
                    write!(w, ",{}", map.map[i * gammas.len() + j].snr_db)?;
                }
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

/// File wrapper for [`emit_csv`]; unwritable paths surface as I/O errors.
pub fn emit_csv_to_path(result: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    let mut file = std::fs::File::create(path)?;
    emit_csv(result, &mut file)
}

/// File wrapper for [`emit_plot_data`].
pub fn emit_plot_data_to_path(result: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    let mut file = std::fs::File::create(path)?;
    emit_plot_data(result, &mut file)
}
