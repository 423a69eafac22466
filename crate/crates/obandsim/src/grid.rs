//! Time/frequency grids and the dual-polarisation field container.
//!
//! Field samples are complex baseband amplitudes in units of √W, so
//! `|sample|²` is instantaneous power in watts and `γ·|A|²` carries rad/km
//! when `γ` is given in 1/(W·km). All values are immutable after
//! construction; every operation returns a new value.

use crate::fft::FftEngine;
use crate::rng::complex_standard_normal;
use num_complex::Complex64;
use rand::RngCore;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("n_samples must be a power of two ≥ 64, got {0}")]
    BadSampleCount(usize),
    #[error("sample rate must be positive and finite, got {0} Hz")]
    BadSampleRate(f64),
    #[error("polarisation buffers must match the grid length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("power must be a positive finite value, got {0} W")]
    NonPositivePower(f64),
    #[error("cannot scale a zero-power field to power {0} W")]
    ZeroPowerField(f64),
    #[error("noise variance must be non-negative, got {0}")]
    NegativeVariance(f64),
}

/// Uniform sampling grid: a power-of-two number of samples at a fixed rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n_samples: usize,
    sample_rate_hz: f64,
}

impl TimeGrid {
    /// Builds a grid with `n_samples` (power of two, ≥ 64) at `sample_rate_hz`.
    pub fn new(n_samples: usize, sample_rate_hz: f64) -> Result<Self, GridError> {
        if n_samples < 64 || !n_samples.is_power_of_two() {
            return Err(GridError::BadSampleCount(n_samples));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(GridError::BadSampleRate(sample_rate_hz));
        }
        Ok(Self {
            n_samples,
            sample_rate_hz,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Sample spacing in seconds.
    pub fn dt_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Total duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate_hz
    }

    /// Angular-frequency spacing 2π·sample_rate/n_samples in rad/s.
    pub fn delta_omega_rad_per_s(&self) -> f64 {
        std::f64::consts::TAU * self.sample_rate_hz / self.n_samples as f64
    }

    /// Angular frequencies ω_k in rad/s, in FFT bin order.
    ///
    /// DC first, then positive frequencies, then negative frequencies;
    /// values span [−π·sample_rate, π·sample_rate). This is the only place
    /// the frequency ordering is defined — channel and DSP code index
    /// spectra with this accessor.
    pub fn omega_rad_per_s(&self) -> Vec<f64> {
        let n = self.n_samples as isize;
        let dw = self.delta_omega_rad_per_s();
        (0..n)
            .map(|k| {
                let k_signed = if k < n / 2 { k } else { k - n };
                k_signed as f64 * dw
            })
            .collect()
    }

    /// Angular frequencies in rad/ps, the units used with β₂ in ps²/km.
    pub fn omega_rad_per_ps(&self) -> Vec<f64> {
        self.omega_rad_per_s().iter().map(|w| w * 1e-12).collect()
    }
}

/// Converts dBm to watts.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    1e-3 * 10f64.powf(p_dbm / 10.0)
}

/// Converts watts to dBm; rejects non-positive powers (log of zero).
pub fn watts_to_dbm(p_w: f64) -> Result<f64, GridError> {
    if !(p_w.is_finite() && p_w > 0.0) {
        return Err(GridError::NonPositivePower(p_w));
    }
    Ok(10.0 * (p_w / 1e-3).log10())
}

/// Dual-polarisation complex baseband waveform on a shared [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: TimeGrid,
    pol_x: Vec<Complex64>,
    pol_y: Vec<Complex64>,
}

impl SampledField {
    pub fn new(
        grid: TimeGrid,
        pol_x: Vec<Complex64>,
        pol_y: Vec<Complex64>,
    ) -> Result<Self, GridError> {
        for buf in [&pol_x, &pol_y] {
            if buf.len() != grid.n_samples() {
                return Err(GridError::LengthMismatch {
                    expected: grid.n_samples(),
                    got: buf.len(),
                });
            }
        }
        Ok(Self { grid, pol_x, pol_y })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        let buf = vec![Complex64::new(0.0, 0.0); grid.n_samples()];
        Self {
            grid,
            pol_x: buf.clone(),
            pol_y: buf,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn pol_x(&self) -> &[Complex64] {
        &self.pol_x
    }

    pub fn pol_y(&self) -> &[Complex64] {
        &self.pol_y
    }

    pub(crate) fn buffers_mut(&mut self) -> (&mut Vec<Complex64>, &mut Vec<Complex64>) {
        (&mut self.pol_x, &mut self.pol_y)
    }

    /// Average total power mean(|x|² + |y|²) in watts.
    pub fn average_power_w(&self) -> f64 {
        let sum: f64 = self
            .pol_x
            .iter()
            .zip(&self.pol_y)
            .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
            .sum();
        sum / self.grid.n_samples() as f64
    }

    /// Peak instantaneous total power max(|x|² + |y|²) in watts.
    pub fn peak_power_w(&self) -> f64 {
        self.pol_x
            .iter()
            .zip(&self.pol_y)
            .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Per-polarisation average powers (x, y) in watts.
    pub fn per_pol_power_w(&self) -> (f64, f64) {
        let n = self.grid.n_samples() as f64;
        let px: f64 = self.pol_x.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        let py: f64 = self.pol_y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        (px, py)
    }

    /// Multiplies both polarisations by a real scale factor.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = self.clone();
        for v in out.pol_x.iter_mut().chain(out.pol_y.iter_mut()) {
            *v *= scale;
        }
        out
    }

    /// Rescales the waveform so its average total power is `p_w`.
    ///
    /// Pure global real scaling: the waveform shape is preserved. `p_w = 0`
    /// yields the all-zero field; scaling a zero-power field to a nonzero
    /// power is rejected.
    pub fn set_average_power(&self, p_w: f64) -> Result<Self, GridError> {
        if !(p_w.is_finite() && p_w >= 0.0) {
            return Err(GridError::NonPositivePower(p_w));
        }
        if p_w == 0.0 {
            return Ok(Self::zeros(self.grid));
        }
        let current = self.average_power_w();
        if current <= 0.0 {
            return Err(GridError::ZeroPowerField(p_w));
        }
        Ok(self.scaled((p_w / current).sqrt()))
    }

    /// Adds another field sample-wise; grids must be identical.
    pub fn add(&self, other: &Self) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::LengthMismatch {
                expected: self.grid.n_samples(),
                got: other.grid.n_samples(),
            });
        }
        let mut out = self.clone();
        for (a, b) in out.pol_x.iter_mut().zip(&other.pol_x) {
            *a += b;
        }
        for (a, b) in out.pol_y.iter_mut().zip(&other.pol_y) {
            *a += b;
        }
        Ok(out)
    }

    /// Relative L2 distance ‖a − b‖ / ‖a‖ across both polarisations.
    pub fn relative_l2_distance(&self, other: &Self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in self.pol_x.iter().zip(&other.pol_x) {
            num += (a - b).norm_sqr();
            den += a.norm_sqr();
        }
        for (a, b) in self.pol_y.iter().zip(&other.pol_y) {
            num += (a - b).norm_sqr();
            den += a.norm_sqr();
        }
        if den == 0.0 {
            return if num == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (num / den).sqrt()
    }
}

/// White circularly-symmetric Gaussian noise field.
///
/// Each polarisation receives independent samples with E[|n|²] =
/// `variance_per_pol_w`. Output is a deterministic function of the RNG
/// state: the same stream yields the bitwise-identical field.
pub fn gaussian_noise(
    grid: TimeGrid,
    variance_per_pol_w: f64,
    rng: &mut impl RngCore,
) -> Result<SampledField, GridError> {
    if !(variance_per_pol_w.is_finite() && variance_per_pol_w >= 0.0) {
        return Err(GridError::NegativeVariance(variance_per_pol_w));
    }
    if variance_per_pol_w == 0.0 {
        return Ok(SampledField::zeros(grid));
    }
    let sigma = variance_per_pol_w.sqrt();
    let n = grid.n_samples();
    let pol_x: Vec<Complex64> = (0..n).map(|_| complex_standard_normal(rng) * sigma).collect();
    let pol_y: Vec<Complex64> = (0..n).map(|_| complex_standard_normal(rng) * sigma).collect();
    SampledField::new(grid, pol_x, pol_y)
}

/// Forward FFT of both polarisations (no normalization), new field.
pub fn field_fft(field: &SampledField) -> SampledField {
    let mut out = field.clone();
    let mut engine = FftEngine::new(field.grid().n_samples());
    let (x, y) = out.buffers_mut();
    engine.forward_inplace(x);
    engine.forward_inplace(y);
    out
}

/// Inverse FFT of both polarisations (1/N factor applied), new field.
pub fn field_ifft(field: &SampledField) -> SampledField {
    let mut out = field.clone();
    let mut engine = FftEngine::new(field.grid().n_samples());
    let (x, y) = out.buffers_mut();
    engine.inverse_inplace(x);
    engine.inverse_inplace(y);
    out
}
