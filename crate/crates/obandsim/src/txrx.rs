//! Everything between bits and the fibre: QAM constellations, bit
//! generation and mapping, root-raised-cosine pulse shaping, the matched
//! filter, the calibrated transceiver-noise floor, and the scalar receiver
//! equalizer.
//!
//! Pulse shaping and matched filtering are done in the frequency domain
//! with the analytic RRC spectrum sampled on the FFT grid (no tap
//! truncation). Both filters are zero-phase, so symbol instants sit at
//! sample offsets `0, S, 2S, …` with no group delay to compensate; the
//! `delay_hint` argument of [`matched_filter`] exists for deliberately
//! probing timing error.

use crate::fft::FftEngine;
use crate::grid::{GridError, SampledField, TimeGrid};
use crate::rng::complex_standard_normal;
use num_complex::Complex64;
use rand::RngCore;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TxRxError {
    #[error("unsupported QAM order {0}: expected one of 4, 16, 64, 256")]
    UnsupportedOrder(usize),
    #[error("bit count must be positive")]
    EmptyBitRequest,
    #[error("bit count {got} is not divisible by 2·log2(M) = {per_symbol_pair}")]
    IndivisibleBits { got: usize, per_symbol_pair: usize },
    #[error("bits must be 0 or 1, got {0}")]
    NotABit(u8),
    #[error(
        "occupied bandwidth (1+rolloff)·symbol_rate = {occupied_hz} Hz exceeds sample rate {sample_rate_hz} Hz"
    )]
    BandwidthViolation { occupied_hz: f64, sample_rate_hz: f64 },
    #[error("rolloff must satisfy 0 < rolloff ≤ 1, got {0}")]
    BadRolloff(f64),
    #[error("samples_per_symbol must be ≥ 2, got {0}")]
    BadOversampling(usize),
    #[error("n_symbols must be positive, rrc_span_symbols must be positive")]
    BadTxConfig,
    #[error("field length {field_len} is not n_symbols·samples_per_symbol = {expected}")]
    FieldLengthMismatch { field_len: usize, expected: usize },
    #[error("symbol frames must have equal lengths ({0} vs {1})")]
    FrameLengthMismatch(usize, usize),
    #[error("cannot equalize a zero-power frame")]
    ZeroPowerFrame,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Gray-labelled square QAM with unit mean symbol energy.
///
/// Labelling is per-axis binary-reflected Gray code: for order M the label
/// has log2(M) bits, the first half indexing the in-phase level and the
/// second half the quadrature level, MSB first. Axis index 0 is the most
/// positive level, so the all-zeros label maps to the top-right corner
/// point (for QPSK, `(1+i)/√2`).
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<Complex64>,
    labels: Vec<u16>,
}

fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

/// Builds the Gray-labelled square QAM constellation of the given order.
pub fn build_constellation(order: usize) -> Result<Constellation, TxRxError> {
    if ![4, 16, 64, 256].contains(&order) {
        return Err(TxRxError::UnsupportedOrder(order));
    }
    let bits_per_symbol = order.trailing_zeros() as usize;
    let bits_per_axis = bits_per_symbol / 2;
    let levels = 1usize << bits_per_axis;

    // Axis amplitude for index k (k = 0 is the most positive level).
    let amp = |k: usize| (levels as f64 - 1.0) - 2.0 * k as f64;
    // Mean energy of odd-integer square QAM is 2(M−1)/3.
    let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt().recip();

    let mut points = vec![Complex64::new(0.0, 0.0); order];
    let mut labels = vec![0u16; order];
    for ki in 0..levels {
        for kq in 0..levels {
            let label = ((gray(ki) as u16) << bits_per_axis) | gray(kq) as u16;
            let idx = ki * levels + kq;
            points[idx] = Complex64::new(amp(ki), amp(kq)) * scale;
            labels[idx] = label;
        }
    }
    Ok(Constellation {
        order,
        bits_per_symbol,
        points,
        labels,
    })
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Point carrying the given label.
    pub fn point_for_label(&self, label: u16) -> Complex64 {
        // labels are a bijection; build-once inverse would be overkill here.
        let idx = self.labels.iter().position(|&l| l == label).expect("label in range");
        self.points[idx]
    }

    /// Index of the constellation point nearest to `y`.
    pub fn nearest(&self, y: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Transmitter configuration: symbol rate, RRC shaping, and frame length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxConfig {
    pub symbol_rate_bd: f64,
    pub rolloff: f64,
    pub samples_per_symbol: usize,
    pub n_symbols: usize,
    /// Truncation length used when materializing time-domain taps (see
    /// [`rrc_taps`]); the frequency-domain shaping path does not truncate.
    pub rrc_span_symbols: usize,
}

impl TxConfig {
    pub fn validate(&self) -> Result<(), TxRxError> {
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(TxRxError::BadRolloff(self.rolloff));
        }
        if self.samples_per_symbol < 2 {
            return Err(TxRxError::BadOversampling(self.samples_per_symbol));
        }
        if self.n_symbols == 0 || self.rrc_span_symbols == 0 {
            return Err(TxRxError::BadTxConfig);
        }
        let occupied = (1.0 + self.rolloff) * self.symbol_rate_bd;
        let sample_rate = self.sample_rate_hz();
        if occupied > sample_rate {
            return Err(TxRxError::BandwidthViolation {
                occupied_hz: occupied,
                sample_rate_hz: sample_rate,
            });
        }
        Ok(())
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.symbol_rate_bd * self.samples_per_symbol as f64
    }

    pub fn n_samples(&self) -> usize {
        self.n_symbols * self.samples_per_symbol
    }

    pub fn grid(&self) -> Result<TimeGrid, GridError> {
        TimeGrid::new(self.n_samples(), self.sample_rate_hz())
    }
}

/// One frame of symbols on both polarisations.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub pol_x: Vec<Complex64>,
    pub pol_y: Vec<Complex64>,
}

impl SymbolFrame {
    pub fn len(&self) -> usize {
        self.pol_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pol_x.is_empty()
    }

    /// Mean symbol energy per polarisation (x, y).
    pub fn per_pol_energy(&self) -> (f64, f64) {
        let n = self.len().max(1) as f64;
        (
            self.pol_x.iter().map(|s| s.norm_sqr()).sum::<f64>() / n,
            self.pol_y.iter().map(|s| s.norm_sqr()).sum::<f64>() / n,
        )
    }
}

/// Reproducible pseudo-random bits (values 0/1) from the given stream.
pub fn generate_bits(n: usize, rng: &mut impl RngCore) -> Result<Vec<u8>, TxRxError> {
    if n == 0 {
        return Err(TxRxError::EmptyBitRequest);
    }
    let mut bits = Vec::with_capacity(n);
    let mut word = 0u64;
    let mut remaining = 0;
    for _ in 0..n {
        if remaining == 0 {
            word = rng.next_u64();
            remaining = 64;
        }
        bits.push((word & 1) as u8);
        word >>= 1;
        remaining -= 1;
    }
    Ok(bits)
}

/// Maps a bit sequence onto both polarisations.
///
/// The first half of the bits feeds polarisation x, the second half
/// polarisation y; each group of log2(M) bits forms one label, MSB first.
pub fn map_bits(bits: &[u8], constellation: &Constellation) -> Result<SymbolFrame, TxRxError> {
    let bps = constellation.bits_per_symbol();
    if bits.is_empty() || bits.len() % (2 * bps) != 0 {
        return Err(TxRxError::IndivisibleBits {
            got: bits.len(),
            per_symbol_pair: 2 * bps,
        });
    }
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return Err(TxRxError::NotABit(b));
    }
    let half = bits.len() / 2;
    let map_half = |chunk: &[u8]| -> Vec<Complex64> {
        chunk
            .chunks_exact(bps)
            .map(|label_bits| {
                let mut label = 0u16;
                for &b in label_bits {
                    label = (label << 1) | b as u16;
                }
                constellation.point_for_label(label)
            })
            .collect()
    };
    Ok(SymbolFrame {
        pol_x: map_half(&bits[..half]),
        pol_y: map_half(&bits[half..]),
    })
}

/// Minimum-distance demapping back to bits, inverse of [`map_bits`].
pub fn demap_nearest(frame: &SymbolFrame, constellation: &Constellation) -> Vec<u8> {
    let bps = constellation.bits_per_symbol();
    let mut bits = Vec::with_capacity(2 * bps * frame.len());
    for pol in [&frame.pol_x, &frame.pol_y] {
        for &y in pol {
            let label = constellation.labels()[constellation.nearest(y)];
            for k in (0..bps).rev() {
                bits.push(((label >> k) & 1) as u8);
            }
        }
    }
    bits
}

/// Root-raised-cosine amplitude response sampled on the FFT grid.
///
/// Normalized so that the shape → matched-filter cascade has exactly unit
/// gain at symbol instants (H(0) = √S) and the time-domain taps have unit
/// energy. The underlying raised cosine satisfies the Nyquist vestigial
/// symmetry exactly on the grid, so the cascade is ISI-free to round-off.
pub fn rrc_frequency_response(n: usize, samples_per_symbol: usize, rolloff: f64) -> Vec<f64> {
    let s = samples_per_symbol as f64;
    // Frequencies in units of the symbol rate: f_k/R = k·S/N for DC-first bins.
    let mut h = vec![0.0; n];
    for (k, h_k) in h.iter_mut().enumerate() {
        let k_signed = if k < n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        let f = (k_signed * s / n as f64).abs();
        let edge0 = (1.0 - rolloff) / 2.0;
        let edge1 = (1.0 + rolloff) / 2.0;
        let g = if f <= edge0 {
            s
        } else if f < edge1 {
            0.5 * s * (1.0 + (std::f64::consts::PI * (f - edge0) / rolloff).cos())
        } else {
            0.0
        };
        *h_k = g.sqrt();
    }
    h
}

/// Analytic time-domain RRC taps truncated to `span_symbols`, unit energy.
///
/// Used for documentation and for cross-checking the frequency-domain path;
/// the shaping itself never truncates.
pub fn rrc_taps(samples_per_symbol: usize, rolloff: f64, span_symbols: usize) -> Vec<f64> {
    let s = samples_per_symbol as f64;
    let half = (span_symbols * samples_per_symbol) / 2;
    let n_taps = 2 * half + 1;
    let pi = std::f64::consts::PI;
    let mut taps = Vec::with_capacity(n_taps);
    for i in 0..n_taps {
        let t = (i as f64 - half as f64) / s; // in symbol periods
        let tap = if t == 0.0 {
            1.0 - rolloff + 4.0 * rolloff / pi
        } else if (t.abs() - 1.0 / (4.0 * rolloff)).abs() < 1e-12 {
            rolloff / 2f64.sqrt()
                * ((1.0 + 2.0 / pi) * (pi / (4.0 * rolloff)).sin()
                    + (1.0 - 2.0 / pi) * (pi / (4.0 * rolloff)).cos())
        } else {
            ((pi * t * (1.0 - rolloff)).sin()
                + 4.0 * rolloff * t * (pi * t * (1.0 + rolloff)).cos())
                / (pi * t * (1.0 - (4.0 * rolloff * t).powi(2)))
        };
        taps.push(tap);
    }
    let energy: f64 = taps.iter().map(|t| t * t).sum();
    let norm = energy.sqrt().recip();
    taps.iter().map(|t| t * norm).collect()
}

/// Upsamples and RRC-shapes a symbol frame into a waveform.
pub fn shape(frame: &SymbolFrame, tx: &TxConfig) -> Result<SampledField, TxRxError> {
    tx.validate()?;
    if frame.len() != tx.n_symbols {
        return Err(TxRxError::FrameLengthMismatch(frame.len(), tx.n_symbols));
    }
    let n = tx.n_samples();
    let grid = tx.grid()?;
    let h = rrc_frequency_response(n, tx.samples_per_symbol, tx.rolloff);
    let mut engine = FftEngine::new(n);

    let shape_pol = |symbols: &[Complex64], engine: &mut FftEngine| -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, &sym) in symbols.iter().enumerate() {
            buf[k * tx.samples_per_symbol] = sym;
        }
        engine.forward_inplace(&mut buf);
        for (v, &h_k) in buf.iter_mut().zip(&h) {
            *v *= h_k;
        }
        engine.inverse_inplace(&mut buf);
        buf
    };

    let pol_x = shape_pol(&frame.pol_x, &mut engine);
    let pol_y = shape_pol(&frame.pol_y, &mut engine);
    Ok(SampledField::new(grid, pol_x, pol_y)?)
}

/// RRC matched filter and symbol-instant downsampling.
///
/// `delay_hint` shifts the sampling instants by that many samples
/// (circularly). The filters are zero-phase, so the correct value for a
/// waveform produced by [`shape`] is 0; a wrong hint degrades EVM but is
/// not an error.
pub fn matched_filter(
    field: &SampledField,
    tx: &TxConfig,
    delay_hint: isize,
) -> Result<SymbolFrame, TxRxError> {
    tx.validate()?;
    let n = field.grid().n_samples();
    if n != tx.n_samples() {
        return Err(TxRxError::FieldLengthMismatch {
            field_len: n,
            expected: tx.n_samples(),
        });
    }
    let h = rrc_frequency_response(n, tx.samples_per_symbol, tx.rolloff);
    let mut engine = FftEngine::new(n);

    let filter_pol = |samples: &[Complex64], engine: &mut FftEngine| -> Vec<Complex64> {
        let mut buf = samples.to_vec();
        engine.forward_inplace(&mut buf);
        for (v, &h_k) in buf.iter_mut().zip(&h) {
            *v *= h_k;
        }
        engine.inverse_inplace(&mut buf);
        (0..tx.n_symbols)
            .map(|k| {
                let idx = (k * tx.samples_per_symbol) as isize + delay_hint;
                buf[idx.rem_euclid(n as isize) as usize]
            })
            .collect()
    };

    let pol_x = filter_pol(field.pol_x(), &mut engine);
    let pol_y = filter_pol(field.pol_y(), &mut engine);
    Ok(SymbolFrame { pol_x, pol_y })
}

/// Adds the calibrated white transceiver-noise floor to a waveform.
///
/// The variance is chosen so that the back-to-back chain
/// `shape → load_transceiver_noise → matched_filter → scalar_equalize`
/// measures `b2b_snr_db` on the recovered symbols. An infinite target
/// disables the noise. The calibration assumes an RRC-shaped signal
/// matched-filtered by the same `tx` configuration.
pub fn load_transceiver_noise(
    field: &SampledField,
    tx: &TxConfig,
    b2b_snr_db: f64,
    rng: &mut impl RngCore,
) -> Result<SampledField, TxRxError> {
    if b2b_snr_db.is_infinite() && b2b_snr_db > 0.0 {
        return Ok(field.clone());
    }
    let snr_lin = 10f64.powf(b2b_snr_db / 10.0);
    let (px, py) = field.per_pol_power_w();
    // Post-matched-filter symbol energy per pol is S·P_pol; white noise of
    // per-sample variance σ² lands as symbol-noise variance σ², so the
    // target is met with σ² = S·P_pol / SNR.
    let s = tx.samples_per_symbol as f64;
    let mut out = field.clone();
    let (bx, by) = out.buffers_mut();
    for (buf, p) in [(bx, px), (by, py)] {
        let sigma = (s * p / snr_lin).sqrt();
        for v in buf.iter_mut() {
            *v += complex_standard_normal(rng) * sigma;
        }
    }
    Ok(out)
}

/// Adds circular Gaussian noise of the given variance to each symbol.
///
/// Receiver-side counterpart of [`load_transceiver_noise`] for noise that
/// must not propagate through the channel; applied in the symbol domain
/// after equalization.
pub fn add_symbol_noise(
    frame: &SymbolFrame,
    variance_per_pol: f64,
    rng: &mut impl RngCore,
) -> SymbolFrame {
    if variance_per_pol <= 0.0 {
        return frame.clone();
    }
    let sigma = variance_per_pol.sqrt();
    let mut out = frame.clone();
    for pol in [&mut out.pol_x, &mut out.pol_y] {
        for v in pol.iter_mut() {
            *v += complex_standard_normal(rng) * sigma;
        }
    }
    out
}

/// Per-polarisation complex scalar equalizer.
///
/// Applies a = E[X·conj(Y)]/E[|Y|²] to Y, the minimizer of E[|X − aY|²].
/// The output is invariant to any nonzero complex scale on the input.
pub fn scalar_equalize(rx: &SymbolFrame, tx: &SymbolFrame) -> Result<SymbolFrame, TxRxError> {
    if rx.len() != tx.len() {
        return Err(TxRxError::FrameLengthMismatch(rx.len(), tx.len()));
    }
    let equalize_pol = |rx_pol: &[Complex64], tx_pol: &[Complex64]| -> Result<Vec<Complex64>, TxRxError> {
        let mut cross = Complex64::new(0.0, 0.0);
        let mut power = 0.0;
        for (x, y) in tx_pol.iter().zip(rx_pol) {
            cross += x * y.conj();
            power += y.norm_sqr();
        }
        if power <= 0.0 {
            return Err(TxRxError::ZeroPowerFrame);
        }
        let a = cross / power;
        Ok(rx_pol.iter().map(|y| a * y).collect())
    };
    Ok(SymbolFrame {
        pol_x: equalize_pol(&rx.pol_x, &tx.pol_x)?,
        pol_y: equalize_pol(&rx.pol_y, &tx.pol_y)?,
    })
}
