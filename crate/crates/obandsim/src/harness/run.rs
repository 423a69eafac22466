//! The per-trace simulation pipeline:
//! bits → map → shape → transmitter noise share → link propagation →
//! (EDC | DBP) → matched filter → scalar equalizer → receiver noise share →
//! metrics.
//!
//! Every random draw comes from `stream(master_seed, label, trace_index)`
//! with the labels `"bits"`, `"tx_noise"`, `"ase"`, `"rx_noise"`, so a
//! trace is a pure function of `(config, master_seed, trace_index)` and
//! traces can run on any thread in any order.

use crate::channel::propagate_link;
use crate::dsp::{dbp_multi_step, dbp_single_step_wh, edc, DbpConfig, DbpMode, DspTrace};
use crate::grid::{watts_to_dbm, SampledField};
use crate::harness::config::ExperimentConfig;
use crate::harness::HarnessError;
use crate::metrics::{
    air_bits_per_s, gmi_estimate, snr_estimate, Compensation, MetricsRecord, SweepCoords,
};
use crate::rng::{complex_standard_normal, stream};
use crate::txrx::{
    build_constellation, generate_bits, load_transceiver_noise, map_bits, matched_filter,
    scalar_equalize, Constellation, SymbolFrame, TxConfig,
};
use crate::channel::LinkKnowledge;

/// One propagated trace: the transmitted reference and the received field.
#[derive(Debug, Clone)]
pub struct PropagatedTrace {
    pub trace_index: u64,
    pub lop1_dbm: f64,
    pub tx_bits: Vec<u8>,
    pub tx_frame: SymbolFrame,
    pub rx_field: SampledField,
    pub knowledge: LinkKnowledge,
}

/// Builds and scores traces for one experiment configuration.
pub struct TraceEngine {
    cfg: ExperimentConfig,
    constellation: Constellation,
    tx_cfg: TxConfig,
}

impl TraceEngine {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, HarnessError> {
        let constellation = build_constellation(cfg.qam_order)?;
        let tx_cfg = cfg.tx_config();
        tx_cfg.validate()?;
        Ok(Self {
            cfg,
            constellation,
            tx_cfg,
        })
    }

    pub fn cfg(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn tx_cfg(&self) -> &TxConfig {
        &self.tx_cfg
    }

    fn bits_per_trace(&self) -> usize {
        2 * self.constellation.bits_per_symbol() * self.cfg.n_symbols
    }

    /// Runs the transmitter and the fibre for one trace at the given launch
    /// power.
    pub fn propagate(&self, trace_index: u64, lop1_dbm: f64) -> Result<PropagatedTrace, HarnessError> {
        let seed = self.cfg.master_seed;
        let tx_bits = generate_bits(
            self.bits_per_trace(),
            &mut stream(seed, "bits", trace_index),
        )?;
        let tx_frame = map_bits(&tx_bits, &self.constellation)?;
        let mut field = crate::txrx::shape(&tx_frame, &self.tx_cfg)?;

        // Transmitter share of the calibrated noise floor: a fraction f of
        // the total noise budget, i.e. an injection SNR of b2b − 10·log10(f).
        let f = self.cfg.tx_noise_fraction;
        if self.cfg.b2b_snr_db.is_finite() && f > 0.0 {
            let inject_db = self.cfg.b2b_snr_db - 10.0 * f.log10();
            field = load_transceiver_noise(
                &field,
                &self.tx_cfg,
                inject_db,
                &mut stream(seed, "tx_noise", trace_index),
            )?;
        }

        let link = self.cfg.link_config(lop1_dbm);
        let (rx_field, knowledge) = propagate_link(
            &field,
            &link,
            &self.cfg.ssfm_config(),
            &mut stream(seed, "ase", trace_index),
        )?;

        Ok(PropagatedTrace {
            trace_index,
            lop1_dbm,
            tx_bits,
            tx_frame,
            rx_field,
            knowledge,
        })
    }

    /// Receiver share of the noise floor for one trace, drawn once so every
    /// compensation variant of the trace sees the same realization.
    pub fn rx_noise(&self, trace_index: u64) -> Option<SymbolFrame> {
        let f = self.cfg.tx_noise_fraction;
        if !self.cfg.b2b_snr_db.is_finite() || f >= 1.0 {
            return None;
        }
        // Unit-energy constellation: symbol-domain variance (1−f)·E_s/SNR.
        let variance = (1.0 - f) / 10f64.powf(self.cfg.b2b_snr_db / 10.0);
        let sigma = variance.sqrt();
        let mut rng = stream(self.cfg.master_seed, "rx_noise", trace_index);
        let n = self.cfg.n_symbols;
        let draw = |rng: &mut rand_chacha::ChaCha12Rng| {
            (0..n).map(|_| complex_standard_normal(rng) * sigma).collect()
        };
        Some(SymbolFrame {
            pol_x: draw(&mut rng),
            pol_y: draw(&mut rng),
        })
    }

    /// Applies a compensator and measures one trace.
    pub fn receive(
        &self,
        prop: &PropagatedTrace,
        compensation: Compensation,
        dbp_cfg: &DbpConfig,
    ) -> Result<MetricsRecord, HarnessError> {
        let compensated = match compensation {
            Compensation::Edc => edc(&prop.rx_field, &prop.knowledge, self.cfg.edc_d_ps_nm_km()),
            Compensation::Dbp => match dbp_cfg.mode {
                DbpMode::SingleStepWh => {
                    dbp_single_step_wh(&prop.rx_field, &prop.knowledge, dbp_cfg)?
                }
                DbpMode::MultiStep { .. } => {
                    dbp_multi_step(&prop.rx_field, &prop.knowledge, dbp_cfg)?
                }
            },
        };
        let symbols = matched_filter(&compensated, &self.tx_cfg, 0)?;
        let mut equalized = scalar_equalize(&symbols, &prop.tx_frame)?;
        if let Some(noise) = self.rx_noise(prop.trace_index) {
            for (v, n) in equalized.pol_x.iter_mut().zip(&noise.pol_x) {
                *v += n;
            }
            for (v, n) in equalized.pol_y.iter_mut().zip(&noise.pol_y) {
                *v += n;
            }
        }

        let snr = snr_estimate(&prop.tx_frame, &equalized)?;
        let gmi = gmi_estimate(&prop.tx_bits, &equalized, &self.constellation)?;
        let air = air_bits_per_s(gmi.bits_per_pdm_symbol, self.cfg.symbol_rate_bd)?;

        Ok(MetricsRecord {
            coords: SweepCoords {
                lop1_dbm: prop.lop1_dbm,
                lop2_dbm: self.lop2_dbm(&prop.knowledge, prop.lop1_dbm),
                wavelength_nm: self.cfg.wavelength_nm,
                symbol_rate_bd: self.cfg.symbol_rate_bd,
                kappa: dbp_cfg.kappa,
                compensation,
            },
            snr_db: snr.snr_db,
            gmi_bits_per_pdm_symbol: gmi.bits_per_pdm_symbol,
            air_bits_per_s: air,
            n_traces: 1,
        })
    }

    fn lop2_dbm(&self, knowledge: &LinkKnowledge, lop1_dbm: f64) -> f64 {
        if knowledge.spans.len() < 2 {
            return lop1_dbm;
        }
        // The dB-domain rule value, not a watts round trip, so table rows
        // appear verbatim in the output.
        self.cfg
            .lop2_rule
            .resolve_lop2_dbm(lop1_dbm, self.cfg.spans[0].loss_db())
            .or_else(|_| watts_to_dbm(knowledge.spans[1].launch_power_w))
            .unwrap_or(lop1_dbm)
    }

    /// Full pipeline for one trace with the configured compensation.
    pub fn run_single(&self, trace_index: u64) -> Result<MetricsRecord, HarnessError> {
        let lop1 = self.cfg.lop1_dbm.ok_or_else(|| {
            HarnessError::MissingLaunchPower(
                "run needs lop1_dbm in the config (or a sweep subcommand)".to_string(),
            )
        })?;
        let prop = self.propagate(trace_index, lop1)?;
        self.receive(&prop, self.cfg.compensation, &self.cfg.dbp_config())
    }

    /// Packs a propagated trace for the DBP parameter sweep.
    pub fn dsp_trace(&self, prop: &PropagatedTrace) -> DspTrace {
        DspTrace {
            rx_field: prop.rx_field.clone(),
            link: prop.knowledge.clone(),
            tx_frame: prop.tx_frame.clone(),
            tx_cfg: self.tx_cfg,
            rx_symbol_noise: self.rx_noise(prop.trace_index),
        }
    }
}
