//! Forward physical-layer model: fibre spans integrated with the symmetric
//! split-step Fourier method, attenuation, and mid-link amplification with
//! ASE noise from a wavelength-dependent gain/NF profile.
//!
//! Sign conventions (mirrored exactly by the DSP module):
//!
//! - dispersion multiplies the spectrum by `exp(+i·(β₂/2)·ω²·L)` with β₂ in
//!   ps²/km and ω in rad/ps; the compensating operator is its conjugate;
//! - Kerr nonlinearity rotates samples by `exp(+i·θ(t))` with
//!   θ = (8/9)·γ·L_eff·(|x|²+|y|²) in Manakov mode and θ_p = γ·L_eff·|p|²
//!   per polarisation in scalar mode.

use crate::fft::FftEngine;
use crate::grid::{dbm_to_watts, gaussian_noise, watts_to_dbm, GridError, SampledField};
use num_complex::Complex64;
use rand::RngCore;
use thiserror::Error;

/// Speed of light in nm/ps (= m/s · 1e-3).
pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 299_792.458;
/// Speed of light in m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 2.997_924_58e8;
/// Planck constant in J·s.
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

/// Received power the link output is normalized to, in dBm.
pub const RX_POWER_DBM: f64 = 2.0;

/// Default adaptive bound on the per-step peak nonlinear phase, in rad.
pub const DEFAULT_MAX_STEP_PHASE_RAD: f64 = 3e-3;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("fibre span must have positive length, non-negative loss and γ")]
    BadSpan,
    #[error("split-step integration needs at least one step")]
    BadStepCount,
    #[error("adaptive step bound must be positive, got {0} rad")]
    BadPhaseBound(f64),
    #[error("amplifier profile: {0}")]
    BadProfile(String),
    #[error("wavelength {0} nm outside profile range [{1}, {2}] nm")]
    WavelengthOutOfRange(f64, f64, f64),
    #[error("launch power {lop1_dbm} dBm outside the LOP table range [{min}, {max}] dBm (extrapolation refused)")]
    LopOutOfTable { lop1_dbm: f64, min: f64, max: f64 },
    #[error("LOP table rule requires exactly 2 spans, link has {0}")]
    TableNeedsTwoSpans(usize),
    #[error("link must contain at least one span")]
    NoSpans,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// One fibre span: length, loss, dispersion, and Kerr coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpan {
    pub length_km: f64,
    pub alpha_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub gamma_per_w_km: f64,
    /// Wavelength at which `dispersion_ps_nm_km` applies (dispersion slope
    /// is not modelled, so this is also the only wavelength the span is
    /// valid for).
    pub ref_wavelength_nm: f64,
}

impl FiberSpan {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.length_km > 0.0
            && self.alpha_db_per_km >= 0.0
            && self.gamma_per_w_km >= 0.0
            && self.ref_wavelength_nm > 0.0
        {
            Ok(())
        } else {
            Err(ChannelError::BadSpan)
        }
    }

    pub fn beta2_ps2_per_km(&self) -> f64 {
        dispersion_to_beta2(self.dispersion_ps_nm_km, self.ref_wavelength_nm)
    }

    /// Span loss in dB.
    pub fn loss_db(&self) -> f64 {
        self.alpha_db_per_km * self.length_km
    }
}

/// Converts dispersion D [ps/(nm·km)] at `wavelength_nm` to β₂ [ps²/km].
pub fn dispersion_to_beta2(d_ps_nm_km: f64, wavelength_nm: f64) -> f64 {
    -d_ps_nm_km * wavelength_nm * wavelength_nm
        / (std::f64::consts::TAU * SPEED_OF_LIGHT_NM_PER_PS)
}

/// Loss-weighted effective length (1 − e^{−αL})/α in km.
pub fn effective_length_km(alpha_db_per_km: f64, length_km: f64) -> f64 {
    let alpha_lin = alpha_db_per_km * std::f64::consts::LN_10 / 10.0;
    if alpha_lin == 0.0 {
        length_km
    } else {
        -(-alpha_lin * length_km).exp_m1() / alpha_lin
    }
}

/// Chooses between the Manakov (8/9, joint power) and scalar
/// (per-polarisation) Kerr terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearMode {
    Manakov,
    Scalar,
}

impl NonlinearMode {
    /// Phase-coefficient prefactor η.
    pub fn eta(self) -> f64 {
        match self {
            NonlinearMode::Manakov => 8.0 / 9.0,
            NonlinearMode::Scalar => 1.0,
        }
    }
}

/// Frequency-domain dispersion operator exp(+i·(β₂/2)·ω²·L).
///
/// Exactly unitary; the inverse is the conjugate (negate β₂·L).
pub fn apply_dispersion(field: &SampledField, beta2_ps2_per_km: f64, length_km: f64) -> SampledField {
    let n = field.grid().n_samples();
    let omega = field.grid().omega_rad_per_ps();
    let factor: Vec<Complex64> = omega
        .iter()
        .map(|w| Complex64::from_polar(1.0, 0.5 * beta2_ps2_per_km * w * w * length_km))
        .collect();
    let mut out = field.clone();
    let mut engine = FftEngine::new(n);
    let (x, y) = out.buffers_mut();
    for buf in [x, y] {
        engine.forward_inplace(buf);
        for (v, f) in buf.iter_mut().zip(&factor) {
            *v *= f;
        }
        engine.inverse_inplace(buf);
    }
    out
}

/// Kerr phase rotation exp(+i·θ(t)) over an effective length.
///
/// Sample magnitudes are unchanged; a negative `gamma_per_w_km` therefore
/// realizes the exact inverse rotation.
pub fn apply_nonlinear(
    field: &SampledField,
    gamma_per_w_km: f64,
    eff_length_km: f64,
    mode: NonlinearMode,
) -> SampledField {
    let mut out = field.clone();
    let coeff = gamma_per_w_km * eff_length_km;
    if coeff == 0.0 {
        return out;
    }
    let (x, y) = out.buffers_mut();
    match mode {
        NonlinearMode::Manakov => {
            let c = coeff * 8.0 / 9.0;
            for (xv, yv) in x.iter_mut().zip(y.iter_mut()) {
                let theta = c * (xv.norm_sqr() + yv.norm_sqr());
                let rot = Complex64::from_polar(1.0, theta);
                *xv *= rot;
                *yv *= rot;
            }
        }
        NonlinearMode::Scalar => {
            for buf in [x, y] {
                for v in buf.iter_mut() {
                    let theta = coeff * v.norm_sqr();
                    *v *= Complex64::from_polar(1.0, theta);
                }
            }
        }
    }
    out
}

/// Uniform amplitude scaling 10^(−αL/20).
pub fn apply_attenuation(field: &SampledField, alpha_db_per_km: f64, length_km: f64) -> SampledField {
    field.scaled(10f64.powf(-alpha_db_per_km * length_km / 20.0))
}

/// Step-count policy for the split-step integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// Fixed number of uniform steps per span.
    Fixed(usize),
    /// Uniform steps sized so the peak nonlinear phase per step stays
    /// below the bound (conservatively estimated from the launch peak
    /// power).
    AdaptivePhase { max_step_phase_rad: f64 },
}

/// Split-step integrator configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsfmConfig {
    pub steps: StepPolicy,
    pub nonlinear_mode: NonlinearMode,
}

impl SsfmConfig {
    pub fn fixed(steps_per_span: usize) -> Self {
        Self {
            steps: StepPolicy::Fixed(steps_per_span),
            nonlinear_mode: NonlinearMode::Manakov,
        }
    }

    pub fn adaptive() -> Self {
        Self {
            steps: StepPolicy::AdaptivePhase {
                max_step_phase_rad: DEFAULT_MAX_STEP_PHASE_RAD,
            },
            nonlinear_mode: NonlinearMode::Manakov,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        match self.steps {
            StepPolicy::Fixed(0) => Err(ChannelError::BadStepCount),
            StepPolicy::AdaptivePhase { max_step_phase_rad } if max_step_phase_rad <= 0.0 => {
                Err(ChannelError::BadPhaseBound(max_step_phase_rad))
            }
            _ => Ok(()),
        }
    }
}

/// Post-run diagnostics from one span integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsfmReport {
    pub steps_used: usize,
    /// Largest per-sample nonlinear phase applied in any single step, rad.
    pub max_step_phase_rad: f64,
    /// True when a fixed step count was forced and the peak step phase
    /// exceeded the adaptive default bound — a hint that the fixed count is
    /// too coarse for the launch power, not an error.
    pub phase_bound_exceeded: bool,
}

fn step_count(field: &SampledField, span: &FiberSpan, cfg: &SsfmConfig) -> usize {
    match cfg.steps {
        StepPolicy::Fixed(n) => n,
        StepPolicy::AdaptivePhase { max_step_phase_rad } => {
            let eta = cfg.nonlinear_mode.eta();
            let peak = field.peak_power_w();
            let phase_total = eta * span.gamma_per_w_km * peak * span.length_km;
            (phase_total / max_step_phase_rad).ceil().max(1.0) as usize
        }
    }
}

/// Propagates a field through one span with the symmetric split-step scheme.
///
/// Each step applies a half dispersion step, the Kerr rotation weighted by
/// the step's loss-weighted effective length, the second half dispersion
/// step, and the step attenuation; adjacent half steps are merged so the
/// scheme costs one transform pair per step and polarisation. The scheme is
/// second-order accurate in the step size, exact for γ = 0 at any step
/// count, and exact for β₂ = 0 at any step count.
pub fn ssfm_propagate(
    field: &SampledField,
    span: &FiberSpan,
    cfg: &SsfmConfig,
) -> Result<(SampledField, SsfmReport), ChannelError> {
    span.validate()?;
    cfg.validate()?;

    let n_steps = step_count(field, span, cfg);
    let h = span.length_km / n_steps as f64;
    let l_eff_step = effective_length_km(span.alpha_db_per_km, h);
    let beta2 = span.beta2_ps2_per_km();
    let amp_step = 10f64.powf(-span.alpha_db_per_km * h / 20.0);
    let eta = cfg.nonlinear_mode.eta();
    let coeff = span.gamma_per_w_km * l_eff_step;

    let n = field.grid().n_samples();
    let omega = field.grid().omega_rad_per_ps();
    let half_disp: Vec<Complex64> = omega
        .iter()
        .map(|w| Complex64::from_polar(1.0, 0.25 * beta2 * w * w * h))
        .collect();
    let full_disp: Vec<Complex64> = half_disp.iter().map(|f| f * f).collect();

    let mut out = field.clone();
    let mut engine = FftEngine::new(n);
    let mut max_step_phase = 0.0f64;

    {
        let (x, y) = out.buffers_mut();

        let disp = |x: &mut [Complex64], y: &mut [Complex64],
                    table: &[Complex64],
                    engine: &mut FftEngine| {
            for buf in [x, y] {
                engine.forward_inplace(buf);
                for (v, f) in buf.iter_mut().zip(table) {
                    *v *= f;
                }
                engine.inverse_inplace(buf);
            }
        };

        disp(x, y, &half_disp, &mut engine);
        for step in 0..n_steps {
            // Kerr rotation and step attenuation fused in one pass.
            match cfg.nonlinear_mode {
                NonlinearMode::Manakov => {
                    let c = coeff * eta;
                    for (xv, yv) in x.iter_mut().zip(y.iter_mut()) {
                        let theta = c * (xv.norm_sqr() + yv.norm_sqr());
                        max_step_phase = max_step_phase.max(theta);
                        let rot = Complex64::from_polar(amp_step, theta);
                        *xv *= rot;
                        *yv *= rot;
                    }
                }
                NonlinearMode::Scalar => {
                    for buf in [&mut *x, &mut *y] {
                        for v in buf.iter_mut() {
                            let theta = coeff * v.norm_sqr();
                            max_step_phase = max_step_phase.max(theta);
                            *v *= Complex64::from_polar(amp_step, theta);
                        }
                    }
                }
            }
            if step + 1 < n_steps {
                disp(x, y, &full_disp, &mut engine);
            }
        }
        disp(x, y, &half_disp, &mut engine);
    }

    let report = SsfmReport {
        steps_used: n_steps,
        max_step_phase_rad: max_step_phase,
        phase_bound_exceeded: matches!(cfg.steps, StepPolicy::Fixed(_))
            && max_step_phase > DEFAULT_MAX_STEP_PHASE_RAD,
    };
    Ok((out, report))
}

/// Wavelength-dependent amplifier gain/NF table, sorted by wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplifierProfile {
    rows: Vec<(f64, f64, f64)>, // (wavelength_nm, gain_db, nf_db)
}

impl AmplifierProfile {
    pub fn new(rows: Vec<(f64, f64, f64)>) -> Result<Self, ChannelError> {
        if rows.is_empty() {
            return Err(ChannelError::BadProfile("profile has no rows".into()));
        }
        for pair in rows.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(ChannelError::BadProfile(format!(
                    "wavelengths must be strictly increasing ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for &(w, g, nf) in &rows {
            if !(w > 0.0 && g.is_finite() && nf >= 0.0) {
                return Err(ChannelError::BadProfile(format!(
                    "bad row ({w}, {g}, {nf}): need positive wavelength, finite gain, nf ≥ 0"
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Parses the shipped plain-text format: a `wavelength_nm,gain_db,nf_db`
    /// header followed by one comma-separated row per wavelength.
    pub fn from_csv_str(text: &str) -> Result<Self, ChannelError> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .map(|(_, l)| l.trim())
            .ok_or_else(|| ChannelError::BadProfile("empty profile file".into()))?;
        if header != "wavelength_nm,gain_db,nf_db" {
            return Err(ChannelError::BadProfile(format!(
                "expected header 'wavelength_nm,gain_db,nf_db', got '{header}'"
            )));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(ChannelError::BadProfile(format!(
                    "line {}: expected 3 comma-separated fields",
                    lineno + 1
                )));
            }
            let parse = |s: &str| -> Result<f64, ChannelError> {
                s.trim().parse::<f64>().map_err(|e| {
                    ChannelError::BadProfile(format!("line {}: {e}", lineno + 1))
                })
            };
            rows.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[(f64, f64, f64)] {
        &self.rows
    }

    pub fn min_wavelength_nm(&self) -> f64 {
        self.rows[0].0
    }

    pub fn max_wavelength_nm(&self) -> f64 {
        self.rows[self.rows.len() - 1].0
    }

    /// Linear interpolation between adjacent rows; out-of-range rejected.
    pub fn lookup(&self, wavelength_nm: f64) -> Result<(f64, f64), ChannelError> {
        let (min, max) = (self.min_wavelength_nm(), self.max_wavelength_nm());
        if !(wavelength_nm >= min && wavelength_nm <= max) {
            return Err(ChannelError::WavelengthOutOfRange(wavelength_nm, min, max));
        }
        let idx = self
            .rows
            .partition_point(|&(w, _, _)| w <= wavelength_nm)
            .min(self.rows.len() - 1);
        let hi = self.rows[idx];
        let lo = self.rows[idx.saturating_sub(1)];
        if (hi.0 - lo.0).abs() < f64::EPSILON {
            return Ok((hi.1, hi.2));
        }
        let t = (wavelength_nm - lo.0) / (hi.0 - lo.0);
        Ok((lo.1 + t * (hi.1 - lo.1), lo.2 + t * (hi.2 - lo.2)))
    }
}

/// Per-polarisation ASE power spectral density (GF − 1)·hν/2 in W/Hz.
pub fn ase_psd_w_per_hz(gain_db: f64, nf_db: f64, wavelength_nm: f64) -> f64 {
    let g = 10f64.powf(gain_db / 10.0);
    let f = 10f64.powf(nf_db / 10.0);
    let nu = SPEED_OF_LIGHT_M_PER_S / (wavelength_nm * 1e-9);
    ((g * f - 1.0) * PLANCK_J_S * nu / 2.0).max(0.0)
}

/// Amplifies the field and adds white ASE noise.
///
/// Amplitude is scaled by 10^(gain/20); each polarisation receives white
/// Gaussian noise of total power `ase_psd · sample_rate` (the PSD spread
/// over the whole simulated band).
pub fn amplify(
    field: &SampledField,
    gain_db: f64,
    nf_db: f64,
    wavelength_nm: f64,
    rng: &mut impl RngCore,
) -> Result<SampledField, ChannelError> {
    let amplified = field.scaled(10f64.powf(gain_db / 20.0));
    let variance = ase_psd_w_per_hz(gain_db, nf_db, wavelength_nm) * field.grid().sample_rate_hz();
    if variance == 0.0 {
        return Ok(amplified);
    }
    let noise = gaussian_noise(*field.grid(), variance, rng)?;
    Ok(amplified.add(&noise)?)
}

/// Where the mid-link amplifier takes its noise figure from.
#[derive(Debug, Clone, PartialEq)]
pub enum NfSource {
    /// Interpolated from a measured gain/NF profile at the signal wavelength.
    Profile(AmplifierProfile),
    /// Explicit noise figure in dB.
    Fixed(f64),
}

impl NfSource {
    pub fn nf_db(&self, wavelength_nm: f64) -> Result<f64, ChannelError> {
        match self {
            NfSource::Profile(p) => Ok(p.lookup(wavelength_nm)?.1),
            NfSource::Fixed(nf) => Ok(*nf),
        }
    }
}

/// How the launch power into the next span is determined.
#[derive(Debug, Clone, PartialEq)]
pub enum Lop2Rule {
    /// Measured (LOP1 dBm → LOP2 dBm) rows; queries interpolate linearly in
    /// dB and extrapolation is refused. Encodes the amplifier's measured
    /// gain compression, so it requires exactly two spans.
    Table(Vec<(f64, f64)>),
    /// Fixed amplifier gain in dB at every span boundary.
    FixedGain(f64),
}

impl Lop2Rule {
    /// Resolves the span-2 launch power for a given LOP1.
    pub fn resolve_lop2_dbm(&self, lop1_dbm: f64, span1_loss_db: f64) -> Result<f64, ChannelError> {
        match self {
            Lop2Rule::Table(rows) => {
                let min = rows.first().map(|r| r.0).unwrap_or(f64::NAN);
                let max = rows.last().map(|r| r.0).unwrap_or(f64::NAN);
                if rows.is_empty() || !(lop1_dbm >= min && lop1_dbm <= max) {
                    return Err(ChannelError::LopOutOfTable {
                        lop1_dbm,
                        min,
                        max,
                    });
                }
                let idx = rows.partition_point(|r| r.0 <= lop1_dbm).min(rows.len() - 1);
                let hi = rows[idx];
                let lo = rows[idx.saturating_sub(1)];
                if (hi.0 - lo.0).abs() < f64::EPSILON {
                    return Ok(hi.1);
                }
                let t = (lop1_dbm - lo.0) / (hi.0 - lo.0);
                Ok(lo.1 + t * (hi.1 - lo.1))
            }
            Lop2Rule::FixedGain(gain_db) => Ok(lop1_dbm - span1_loss_db + gain_db),
        }
    }
}

/// Full link description: spans, amplification rule, and launch power.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub spans: Vec<FiberSpan>,
    pub mid_amp_nf: NfSource,
    pub signal_wavelength_nm: f64,
    pub lop1_dbm: f64,
    pub lop2_rule: Lop2Rule,
    /// When false, amplifiers scale without adding ASE (noise-free link).
    pub ase_enabled: bool,
    /// Noise figure of the receive-side amplifier bringing the signal to
    /// [`RX_POWER_DBM`]. `None` models that stage as noiseless
    /// normalization (its noise then lives in the calibrated transceiver
    /// floor).
    pub rx_amp_nf_db: Option<f64>,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.spans.is_empty() {
            return Err(ChannelError::NoSpans);
        }
        for span in &self.spans {
            span.validate()?;
        }
        if matches!(self.lop2_rule, Lop2Rule::Table(_)) && self.spans.len() != 2 {
            return Err(ChannelError::TableNeedsTwoSpans(self.spans.len()));
        }
        // Fail early if the launch power cannot be resolved.
        self.lop2_rule
            .resolve_lop2_dbm(self.lop1_dbm, self.spans[0].loss_db())?;
        self.mid_amp_nf.nf_db(self.signal_wavelength_nm)?;
        Ok(())
    }
}

/// Per-span ground truth recorded while propagating, consumed by the DSP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanKnowledge {
    pub length_km: f64,
    pub alpha_db_per_km: f64,
    pub launch_power_w: f64,
}

/// Link provenance: what the receiver is allowed to know.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkKnowledge {
    pub spans: Vec<SpanKnowledge>,
    pub wavelength_nm: f64,
}

impl LinkKnowledge {
    pub fn total_length_km(&self) -> f64 {
        self.spans.iter().map(|s| s.length_km).sum()
    }

    /// Σ launch_power · L_eff over spans, the single-step nonlinear weight
    /// in W·km.
    pub fn power_length_weight_w_km(&self) -> f64 {
        self.spans
            .iter()
            .map(|s| s.launch_power_w * effective_length_km(s.alpha_db_per_km, s.length_km))
            .sum()
    }
}

/// Propagates a field through the whole link.
///
/// Sets the launch power, runs each span through the split-step integrator,
/// and applies the boundary amplifier with the gain needed to realize the
/// link's LOP2 rule (ASE drawn from `rng` when enabled). The output is
/// normalized to [`RX_POWER_DBM`] — the receive amplifier chain is modelled
/// as noiseless normalization, its noise being part of the calibrated
/// transceiver floor. Returns the received field together with the per-span
/// launch-power record.
pub fn propagate_link(
    field: &SampledField,
    link: &LinkConfig,
    cfg: &SsfmConfig,
    rng: &mut impl RngCore,
) -> Result<(SampledField, LinkKnowledge), ChannelError> {
    link.validate()?;

    let mut current = field.set_average_power(dbm_to_watts(link.lop1_dbm))?;
    let mut launch_dbm = link.lop1_dbm;
    let mut knowledge = LinkKnowledge {
        spans: Vec::with_capacity(link.spans.len()),
        wavelength_nm: link.signal_wavelength_nm,
    };

    for (i, span) in link.spans.iter().enumerate() {
        // Record the known signal launch power; ASE riding on the field is
        // not part of the launch-power bookkeeping the DSP consumes.
        knowledge.spans.push(SpanKnowledge {
            length_km: span.length_km,
            alpha_db_per_km: span.alpha_db_per_km,
            launch_power_w: dbm_to_watts(launch_dbm),
        });
        let (propagated, _report) = ssfm_propagate(&current, span, cfg)?;
        current = propagated;

        if i + 1 < link.spans.len() {
            let target_dbm = link
                .lop2_rule
                .resolve_lop2_dbm(launch_dbm, span.loss_db())?;
            // Gain that brings the attenuated signal to the target power.
            let gain_db = target_dbm - (launch_dbm - span.loss_db());
            let nf_db = link.mid_amp_nf.nf_db(link.signal_wavelength_nm)?;
            current = if link.ase_enabled {
                amplify(&current, gain_db, nf_db, link.signal_wavelength_nm, rng)?
            } else {
                current.scaled(10f64.powf(gain_db / 20.0))
            };
            launch_dbm = target_dbm;
        }
    }

    let received = match link.rx_amp_nf_db {
        Some(nf_db) if link.ase_enabled => {
            let gain_db = RX_POWER_DBM - watts_to_dbm(current.average_power_w())?;
            amplify(&current, gain_db, nf_db, link.signal_wavelength_nm, rng)?
        }
        _ => current.set_average_power(dbm_to_watts(RX_POWER_DBM))?,
    };
    Ok((received, knowledge))
}
