//! FFT plumbing shared by the channel and DSP modules.
//!
//! Conventions, fixed once and relied on everywhere:
//!
//! - The forward transform carries no scale factor; the inverse carries the
//!   1/N factor, so `inverse(forward(x)) == x` and any frequency-domain
//!   multiplication by a unit-magnitude factor is exactly unitary.
//! - Bin ordering is DC-first: bin 0 is DC, bins `1..N/2` are positive
//!   frequencies, bins `N/2..N` are negative frequencies.
//!   [`crate::grid::TimeGrid::omega_rad_per_s`] publishes the matching
//!   angular frequencies so callers never re-derive the ordering.
//!
//! Transform counts are tracked per thread so callers can assert how many
//! transforms an operation performed (the single-step backpropagation
//! contract depends on this).

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::Cell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

thread_local! {
    static FORWARD_COUNT: Cell<u64> = const { Cell::new(0) };
    static INVERSE_COUNT: Cell<u64> = const { Cell::new(0) };
}

/// Forward/inverse transform counts accumulated on the calling thread.
///
/// Each transform of one buffer (one polarisation) increments the
/// corresponding counter by one, so one round trip on a dual-polarisation
/// field adds two to each counter. Counts are monotone; callers measure a
/// region by differencing two snapshots taken on the same thread.
pub fn transform_counts() -> (u64, u64) {
    (
        FORWARD_COUNT.with(|c| c.get()),
        INVERSE_COUNT.with(|c| c.get()),
    )
}

fn plan_cache() -> &'static Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn plan(size: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
    cache
        .entry((size, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(size)
            } else {
                planner.plan_fft_inverse(size)
            }
        })
        .clone()
}

/// Reusable transform pair for one grid size, with its scratch buffer.
pub struct FftEngine {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl FftEngine {
    pub fn new(size: usize) -> Self {
        let forward = plan(size, true);
        let inverse = plan(size, false);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            size,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// In-place forward transform (no normalization).
    pub fn forward_inplace(&mut self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.size, "buffer length must match plan size");
        self.forward.process_with_scratch(buf, &mut self.scratch);
        FORWARD_COUNT.with(|c| c.set(c.get() + 1));
    }

    /// In-place inverse transform, carrying the 1/N factor.
    pub fn inverse_inplace(&mut self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.size, "buffer length must match plan size");
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let scale = 1.0 / self.size as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        INVERSE_COUNT.with(|c| c.set(c.get() + 1));
    }
}
