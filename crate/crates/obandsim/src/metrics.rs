//! Performance evaluation: SNR, generalized mutual information (GMI),
//! achievable information rate (AIR), and multi-trace aggregation.
//!
//! SNR is the transmit-referenced ratio E[|X|²]/E[|X−Y|²] over equalized
//! symbols, polarisations pooled. GMI is the bit-wise mutual information
//! under a circularly-symmetric Gaussian auxiliary channel whose variance
//! is fitted per polarisation from the residuals; LLRs use exact
//! log-sum-exp over the constellation subsets (no max-log approximation).

use crate::txrx::{map_bits, Constellation, SymbolFrame, TxRxError};
use num_complex::Complex64;
use thiserror::Error;

/// Reported SNR ceiling; exact matches clamp here instead of +∞.
pub const SNR_CAP_DB: f64 = 200.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("symbol frames must be non-empty")]
    EmptyFrame,
    #[error("symbol frames must have equal lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("bit count {got} does not match 2·log2(M)·n_symbols = {expected}")]
    BitCountMismatch { got: usize, expected: usize },
    #[error("GMI and AIR require non-negative inputs, got {0}")]
    NegativeInput(f64),
    #[error("cannot aggregate an empty record list")]
    EmptyAggregate,
    #[error("cannot aggregate records with differing sweep coordinates")]
    MixedCoords,
    #[error(transparent)]
    TxRx(#[from] TxRxError),
}

/// SNR estimate with the exact-match clamp flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrEstimate {
    pub snr_db: f64,
    /// True when the raw ratio exceeded [`SNR_CAP_DB`] (e.g. Y == X).
    pub clamped: bool,
}

/// Transmit-referenced SNR 10·log10(Σ|X|² / Σ|X−Y|²), polarisations pooled.
///
/// `rx` is expected to be scalar-equalized; the ratio is scale-sensitive by
/// construction. Estimates over fewer than a few thousand symbols carry
/// visible statistical error.
pub fn snr_estimate(tx: &SymbolFrame, rx: &SymbolFrame) -> Result<SnrEstimate, MetricsError> {
    if tx.is_empty() || rx.is_empty() {
        return Err(MetricsError::EmptyFrame);
    }
    if tx.len() != rx.len() {
        return Err(MetricsError::LengthMismatch(tx.len(), rx.len()));
    }
    let mut signal = 0.0;
    let mut error = 0.0;
    for (pol_tx, pol_rx) in [(&tx.pol_x, &rx.pol_x), (&tx.pol_y, &rx.pol_y)] {
        for (x, y) in pol_tx.iter().zip(pol_rx.iter()) {
            signal += x.norm_sqr();
            error += (x - y).norm_sqr();
        }
    }
    if error == 0.0 {
        return Ok(SnrEstimate {
            snr_db: SNR_CAP_DB,
            clamped: true,
        });
    }
    let snr_db = 10.0 * (signal / error).log10();
    if snr_db > SNR_CAP_DB {
        Ok(SnrEstimate {
            snr_db: SNR_CAP_DB,
            clamped: true,
        })
    } else {
        Ok(SnrEstimate {
            snr_db,
            clamped: false,
        })
    }
}

/// Error vector magnitude in dB, 10·log10(Σ|X−Y|² / Σ|X|²).
pub fn evm_db(tx: &SymbolFrame, rx: &SymbolFrame) -> Result<f64, MetricsError> {
    let snr = snr_estimate(tx, rx)?;
    Ok(-snr.snr_db)
}

/// GMI estimate in bits per dual-polarisation symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmiEstimate {
    pub bits_per_pdm_symbol: f64,
    /// True when a polarisation had zero residual noise and contributed the
    /// format ceiling log2(M) exactly.
    pub saturated: bool,
}

fn softplus(z: f64) -> f64 {
    // ln(1 + e^z) without overflow.
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Per-polarisation GMI of one symbol stream under the fitted Gaussian
/// auxiliary channel. Returns (gmi_bits, saturated).
fn gmi_one_pol(
    tx_syms: &[Complex64],
    rx_syms: &[Complex64],
    constellation: &Constellation,
) -> (f64, bool) {
    let bps = constellation.bits_per_symbol();
    let m = constellation.order();
    let n = tx_syms.len();

    // Fitted auxiliary-channel variance σ² = mean|X−Y|².
    let sigma_sq = tx_syms
        .iter()
        .zip(rx_syms)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        / n as f64;
    if sigma_sq < 1e-300 {
        return (bps as f64, true);
    }

    // Subset index lists: points whose bit i is 0 / 1.
    let labels = constellation.labels();
    let mut subset0: Vec<Vec<usize>> = vec![Vec::with_capacity(m / 2); bps];
    let mut subset1: Vec<Vec<usize>> = vec![Vec::with_capacity(m / 2); bps];
    for (j, &label) in labels.iter().enumerate() {
        for i in 0..bps {
            let bit = (label >> (bps - 1 - i)) & 1;
            if bit == 0 {
                subset0[i].push(j);
            } else {
                subset1[i].push(j);
            }
        }
    }
    // Transmitted labels recovered by nearest point (tx symbols are exact
    // constellation points).
    let points = constellation.points();
    let inv_sigma_sq = 1.0 / sigma_sq;

    let mut penalty_sum = vec![0.0f64; bps];
    let mut weights = vec![0.0f64; m];
    for (x, y) in tx_syms.iter().zip(rx_syms) {
        // exp(−|y−p_j|²/σ²) with a global max shift; at least one weight is 1.
        let mut max_e = f64::NEG_INFINITY;
        let e: Vec<f64> = points
            .iter()
            .map(|p| {
                let v = -(y - p).norm_sqr() * inv_sigma_sq;
                if v > max_e {
                    max_e = v;
                }
                v
            })
            .collect();
        for (w, &ej) in weights.iter_mut().zip(&e) {
            *w = (ej - max_e).exp();
        }

        let tx_label = labels[constellation.nearest(*x)];
        for i in 0..bps {
            let sum0: f64 = subset0[i].iter().map(|&j| weights[j]).sum();
            let sum1: f64 = subset1[i].iter().map(|&j| weights[j]).sum();
            // Exact LLR: the max shift cancels in the difference.
            let llr = (sum0.ln() - sum1.ln()).clamp(-1e6, 1e6);
            let tx_bit = (tx_label >> (bps - 1 - i)) & 1;
            let b_sign = if tx_bit == 0 { 1.0 } else { -1.0 };
            penalty_sum[i] += softplus(-b_sign * llr) / std::f64::consts::LN_2;
        }
    }

    let gmi: f64 = penalty_sum
        .iter()
        .map(|&s| 1.0 - s / n as f64)
        .sum();
    (gmi, false)
}

/// Bit-wise GMI in bits per dual-polarisation symbol.
///
/// `tx_bits` is the transmitted bit stream in [`map_bits`] layout (first
/// half polarisation x, log2(M) bits per symbol, MSB first). The estimate
/// is clamped below at 0; a zero-noise polarisation returns its log2(M)
/// ceiling exactly with the `saturated` flag set.
pub fn gmi_estimate(
    tx_bits: &[u8],
    rx: &SymbolFrame,
    constellation: &Constellation,
) -> Result<GmiEstimate, MetricsError> {
    if rx.is_empty() {
        return Err(MetricsError::EmptyFrame);
    }
    let bps = constellation.bits_per_symbol();
    let expected = 2 * bps * rx.len();
    if tx_bits.len() != expected {
        return Err(MetricsError::BitCountMismatch {
            got: tx_bits.len(),
            expected,
        });
    }
    let tx = map_bits(tx_bits, constellation)?;
    if tx.len() != rx.len() {
        return Err(MetricsError::LengthMismatch(tx.len(), rx.len()));
    }

    let (gmi_x, sat_x) = gmi_one_pol(&tx.pol_x, &rx.pol_x, constellation);
    let (gmi_y, sat_y) = gmi_one_pol(&tx.pol_y, &rx.pol_y, constellation);
    Ok(GmiEstimate {
        bits_per_pdm_symbol: (gmi_x + gmi_y).max(0.0),
        saturated: sat_x || sat_y,
    })
}

/// AIR = symbol_rate · GMI, in bits per second.
///
/// `gmi_bits_per_pdm_symbol` is already polarisation-summed, so no further
/// factor of two applies.
pub fn air_bits_per_s(gmi_bits_per_pdm_symbol: f64, symbol_rate_bd: f64) -> Result<f64, MetricsError> {
    if gmi_bits_per_pdm_symbol < 0.0 {
        return Err(MetricsError::NegativeInput(gmi_bits_per_pdm_symbol));
    }
    Ok(gmi_bits_per_pdm_symbol * symbol_rate_bd)
}

/// Which receiver compensation produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compensation {
    Edc,
    Dbp,
}

impl Compensation {
    pub fn as_str(self) -> &'static str {
        match self {
            Compensation::Edc => "edc",
            Compensation::Dbp => "dbp",
        }
    }
}

/// Sweep coordinates a record was measured at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCoords {
    pub lop1_dbm: f64,
    pub lop2_dbm: f64,
    pub wavelength_nm: f64,
    pub symbol_rate_bd: f64,
    pub kappa: f64,
    pub compensation: Compensation,
}

/// One measured point: metrics plus the coordinates they belong to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub coords: SweepCoords,
    pub snr_db: f64,
    pub gmi_bits_per_pdm_symbol: f64,
    pub air_bits_per_s: f64,
    pub n_traces: usize,
}

/// Combines records measured at identical coordinates.
///
/// SNR is averaged in the linear power domain (then converted back to dB);
/// GMI and AIR average arithmetically; trace counts add. All means are
/// weighted by each record's trace count, so aggregating aggregates is
/// consistent.
pub fn aggregate(records: &[MetricsRecord]) -> Result<MetricsRecord, MetricsError> {
    let first = records.first().ok_or(MetricsError::EmptyAggregate)?;
    if records.iter().any(|r| r.coords != first.coords) {
        return Err(MetricsError::MixedCoords);
    }
    let total: f64 = records.iter().map(|r| r.n_traces as f64).sum();
    let snr_lin = records
        .iter()
        .map(|r| r.n_traces as f64 * 10f64.powf(r.snr_db / 10.0))
        .sum::<f64>()
        / total;
    let gmi = records
        .iter()
        .map(|r| r.n_traces as f64 * r.gmi_bits_per_pdm_symbol)
        .sum::<f64>()
        / total;
    let air = records
        .iter()
        .map(|r| r.n_traces as f64 * r.air_bits_per_s)
        .sum::<f64>()
        / total;
    Ok(MetricsRecord {
        coords: first.coords,
        snr_db: 10.0 * snr_lin.log10(),
        gmi_bits_per_pdm_symbol: gmi,
        air_bits_per_s: air,
        n_traces: records.iter().map(|r| r.n_traces).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_standard_normal, stream};
    use crate::txrx::{build_constellation, generate_bits, scalar_equalize};
    use rand::RngCore;

    fn awgn_frame(tx: &SymbolFrame, sigma_sq: f64, rng: &mut impl RngCore) -> SymbolFrame {
        let mut rx = tx.clone();
        for pol in [&mut rx.pol_x, &mut rx.pol_y] {
            for v in pol.iter_mut() {
                *v += complex_standard_normal(rng) * sigma_sq.sqrt();
            }
        }
        rx
    }

    fn qam_frame(order: usize, n_symbols: usize, seed: u64) -> (Vec<u8>, SymbolFrame) {
        let c = build_constellation(order).unwrap();
        let bps = c.bits_per_symbol();
        let bits = generate_bits(2 * bps * n_symbols, &mut stream(seed, "bits", 0)).unwrap();
        let frame = map_bits(&bits, &c).unwrap();
        (bits, frame)
    }

    #[test]
    fn snr_clamps_on_exact_match() {
        let (_, frame) = qam_frame(16, 4096, 1);
        let est = snr_estimate(&frame, &frame).unwrap();
        assert_eq!(est.snr_db, SNR_CAP_DB);
        assert!(est.clamped);

        let empty = SymbolFrame {
            pol_x: vec![],
            pol_y: vec![],
        };
        assert!(snr_estimate(&empty, &empty).is_err());
    }

    #[test]
    fn snr_calibrated_against_injected_noise() {
        let (_, frame) = qam_frame(256, 1 << 16, 2);
        // Unit-energy constellation + noise var 0.01 → 20 dB.
        let rx = awgn_frame(&frame, 0.01, &mut stream(2, "awgn", 0));
        let est = snr_estimate(&frame, &rx).unwrap();
        assert!((est.snr_db - 20.0).abs() < 0.05, "snr {}", est.snr_db);
        assert!(!est.clamped);
    }

    #[test]
    fn snr_scale_invariant_after_equalization() {
        let (_, frame) = qam_frame(64, 1 << 14, 3);
        let rx = awgn_frame(&frame, 0.02, &mut stream(3, "awgn", 0));
        let eq = scalar_equalize(&rx, &frame).unwrap();
        let base = snr_estimate(&frame, &eq).unwrap().snr_db;

        let scale = Complex64::new(0.3, -1.7);
        let scaled = SymbolFrame {
            pol_x: rx.pol_x.iter().map(|v| v * scale).collect(),
            pol_y: rx.pol_y.iter().map(|v| v * scale).collect(),
        };
        let eq2 = scalar_equalize(&scaled, &frame).unwrap();
        let snr2 = snr_estimate(&frame, &eq2).unwrap().snr_db;
        assert!((base - snr2).abs() <= 0.001, "{base} vs {snr2}");
    }

    #[test]
    fn gmi_noiseless_saturates_at_format_ceiling() {
        let (bits, frame) = qam_frame(256, 1 << 12, 4);
        let c = build_constellation(256).unwrap();
        let est = gmi_estimate(&bits, &frame, &c).unwrap();
        assert_eq!(est.bits_per_pdm_symbol, 16.0);
        assert!(est.saturated);
    }

    #[test]
    fn gmi_vanishes_at_low_snr() {
        let (bits, frame) = qam_frame(4, 1 << 14, 5);
        let c = build_constellation(4).unwrap();
        // SNR = −20 dB.
        let rx = awgn_frame(&frame, 100.0, &mut stream(5, "awgn", 0));
        let est = gmi_estimate(&bits, &rx, &c).unwrap();
        assert!(est.bits_per_pdm_symbol >= 0.0);
        assert!(est.bits_per_pdm_symbol < 0.1, "gmi {}", est.bits_per_pdm_symbol);
    }

    #[test]
    fn gmi_monotone_in_snr() {
        let (bits, frame) = qam_frame(16, 1 << 14, 6);
        let c = build_constellation(16).unwrap();
        let mut last = -1.0;
        for (i, snr_db) in [0.0, 5.0, 10.0, 15.0, 20.0].into_iter().enumerate() {
            let sigma_sq = 10f64.powf(-snr_db / 10.0);
            let rx = awgn_frame(&frame, sigma_sq, &mut stream(6, "awgn", i as u64));
            let est = gmi_estimate(&bits, &rx, &c).unwrap();
            assert!(
                est.bits_per_pdm_symbol > last,
                "GMI not increasing at {snr_db} dB: {} after {last}",
                est.bits_per_pdm_symbol
            );
            assert!(est.bits_per_pdm_symbol <= 8.0);
            last = est.bits_per_pdm_symbol;
        }
    }

    #[test]
    fn air_consistency_values() {
        assert_eq!(air_bits_per_s(16.0, 50e9).unwrap(), 800e9);
        assert!((air_bits_per_s(9.88, 50e9).unwrap() - 494e9).abs() < 1e-3);
        assert_eq!(air_bits_per_s(0.0, 50e9).unwrap(), 0.0);
        assert!(air_bits_per_s(-0.1, 50e9).is_err());
    }

    fn record(snr_db: f64, comp: Compensation) -> MetricsRecord {
        MetricsRecord {
            coords: SweepCoords {
                lop1_dbm: 0.0,
                lop2_dbm: 0.96,
                wavelength_nm: 1310.0,
                symbol_rate_bd: 50e9,
                kappa: 0.5,
                compensation: comp,
            },
            snr_db,
            gmi_bits_per_pdm_symbol: 12.0,
            air_bits_per_s: 600e9,
            n_traces: 1,
        }
    }

    #[test]
    fn aggregate_contracts() {
        let fifty: Vec<MetricsRecord> = (0..50).map(|_| record(19.0, Compensation::Edc)).collect();
        let agg = aggregate(&fifty).unwrap();
        assert!((agg.snr_db - 19.0).abs() < 1e-12);
        assert_eq!(agg.n_traces, 50);
        assert_eq!(agg.gmi_bits_per_pdm_symbol, 12.0);

        // Linear-domain mean: 19 and 21 dB average to 20.114, not 20.0.
        let pair = vec![record(19.0, Compensation::Edc), record(21.0, Compensation::Edc)];
        let agg = aggregate(&pair).unwrap();
        assert!((agg.snr_db - 20.114126071303584).abs() < 1e-9, "snr {}", agg.snr_db);
        assert!((agg.snr_db - 20.0).abs() > 0.1);

        // Permutation invariance.
        let fwd = vec![record(15.0, Compensation::Dbp), record(18.0, Compensation::Dbp)];
        let rev: Vec<MetricsRecord> = fwd.iter().rev().copied().collect();
        assert!(
            (aggregate(&fwd).unwrap().snr_db - aggregate(&rev).unwrap().snr_db).abs() < 1e-12
        );

        assert!(aggregate(&[]).is_err());
        let mixed = vec![record(19.0, Compensation::Edc), record(19.0, Compensation::Dbp)];
        assert!(aggregate(&mixed).is_err());
    }
}
