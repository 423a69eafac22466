//! Shared test support: the independent mutual-information oracle and
//! small helpers for building test traces.
//!
//! The oracle computes the bit-wise mutual information of a Gray-mapped
//! constellation on the AWGN channel by direct two-dimensional quadrature
//! of the defining integrals — no LLRs, no softplus — so it shares no code
//! path with `metrics::gmi_estimate`.

use num_complex::Complex64;
use obandsim::txrx::Constellation;

/// Σ_i I(B_i; Y) in bits per (single-polarisation) symbol for the AWGN
/// channel y = x + n, n ~ CN(0, σ²), with σ² = 1/SNR on the unit-energy
/// constellation.
///
/// Midpoint-rule quadrature on a grid resolving σ/4; the integrand decays
/// as a Gaussian, so truncation at ±8σ beyond the constellation and the
/// grid spacing both contribute error far below the comparison tolerance.
pub fn bitwise_mi_oracle(constellation: &Constellation, snr_db: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    let sigma_sq = 1.0 / snr;
    let sigma = sigma_sq.sqrt();

    let points = constellation.points();
    let labels = constellation.labels();
    let m = constellation.order();
    let bps = constellation.bits_per_symbol();

    let max_amp = points
        .iter()
        .map(|p| p.re.abs().max(p.im.abs()))
        .fold(0.0f64, f64::max);
    let reach = max_amp + 8.0 * sigma;
    let step = sigma / 4.0;
    let n_axis = (2.0 * reach / step).ceil() as usize;

    // Subset membership per bit: indices of points whose bit i is 0.
    let bit_is_zero: Vec<Vec<bool>> = (0..bps)
        .map(|i| {
            labels
                .iter()
                .map(|&l| (l >> (bps - 1 - i)) & 1 == 0)
                .collect()
        })
        .collect();

    let norm = 1.0 / (std::f64::consts::PI * sigma_sq);
    let cell = step * step;
    let mut mi = vec![0.0f64; bps];
    let mut likelihood = vec![0.0f64; m];

    for iy in 0..n_axis {
        let y_im = -reach + (iy as f64 + 0.5) * step;
        for ix in 0..n_axis {
            let y_re = -reach + (ix as f64 + 0.5) * step;
            let y = Complex64::new(y_re, y_im);

            let mut p_y = 0.0;
            for (l, p) in likelihood.iter_mut().zip(points) {
                *l = norm * (-(y - p).norm_sqr() / sigma_sq).exp();
                p_y += *l;
            }
            p_y /= m as f64;
            if p_y < 1e-300 {
                continue;
            }

            for (i, zeros) in bit_is_zero.iter().enumerate() {
                let mut p0 = 0.0;
                let mut p1 = 0.0;
                for (l, &is_zero) in likelihood.iter().zip(zeros) {
                    if is_zero {
                        p0 += l;
                    } else {
                        p1 += l;
                    }
                }
                // p(y | B_i = b) with equiprobable symbols.
                p0 *= 2.0 / m as f64;
                p1 *= 2.0 / m as f64;
                for p_b in [p0, p1] {
                    if p_b > 1e-300 {
                        mi[i] += 0.5 * p_b * (p_b / p_y).log2() * cell;
                    }
                }
            }
        }
    }
    mi.iter().sum()
}

#[cfg(test)]
mod sanity {
    // (The oracle is exercised by the acceptance and metrics-oracle tests.)
}
