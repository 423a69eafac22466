//! Coherent O-band fibre transmission simulator.
//!
//! Models a dual-polarisation QAM link — pulse shaping, split-step fibre
//! propagation near the zero-dispersion wavelength, mid-link amplification
//! with ASE noise — and the receiver DSP that undoes it: electronic
//! dispersion compensation (EDC) and single-step Wiener–Hammerstein digital
//! backpropagation (DBP). Performance is evaluated with the usual coherent
//! metrics (SNR, GMI, AIR) and a sweep harness regenerates launch-power and
//! split-ratio curves as CSV or plot-ready tables.
//!
//! Module map:
//!
//! - [`grid`] — time/frequency grids, the dual-polarisation field, units.
//! - [`rng`] — deterministic per-source random streams.
//! - [`fft`] — shared FFT engine with per-thread transform counting.
//! - [`txrx`] — constellations, RRC shaping, transceiver noise, equalizer.
//! - [`channel`] — fibre spans, split-step integration, amplifiers.
//! - [`dsp`] — EDC, single-step and multi-step DBP, parameter sweeps.
//! - [`metrics`] — SNR, GMI, AIR, multi-trace aggregation.
//! - [`harness`] — experiment configs, presets, sweeps, CSV emission.

pub mod channel;
pub mod dsp;
pub mod fft;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod txrx;

pub use grid::{dbm_to_watts, watts_to_dbm, SampledField, TimeGrid};
pub use txrx::{build_constellation, Constellation, SymbolFrame, TxConfig};

// The guide's code blocks run as doctests so the book can never drift from
// the library (`cargo test --doc`).
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields-and-grids.md")]
    mod fields_and_grids {}
    #[doc = include_str!("../../../book/src/transmitter-receiver.md")]
    mod transmitter_receiver {}
    #[doc = include_str!("../../../book/src/fibre-channel.md")]
    mod fibre_channel {}
    #[doc = include_str!("../../../book/src/backpropagation.md")]
    mod backpropagation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics_chapter {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness_chapter {}
}
