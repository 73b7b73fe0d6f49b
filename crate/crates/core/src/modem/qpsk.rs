//! Gray-mapped QPSK with root-raised-cosine pulses (roll-off 0.5, span 8 symbols).
//!
//! Bit pair `(b0, b1)` maps to `((1 - 2 b0) + j (1 - 2 b1)) / √2`. Symbol `i`
//! peaks at time `i + 1/2`; pulse tails falling outside the block are cut so
//! the block keeps its nominal duration. The pulse is scaled for unit mean
//! sample power.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::{receive_filter, require_sps, IqSignal, Origin, C64};
use crate::error::{Error, Result};
use crate::params::SYMBOL_RATE_HZ;

pub const ROLL_OFF: f64 = 0.5;
pub const SPAN_SYMBOLS: usize = 8;

/// Root-raised-cosine impulse response at `t` symbol periods (unnormalised).
pub fn rrc(t: f64, beta: f64) -> f64 {
    let eps = 1e-9;
    if t.abs() < eps {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if (t.abs() - 1.0 / (4.0 * beta)).abs() < eps {
        let a = (1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin();
        let b = (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos();
        return beta / 2f64.sqrt() * (a + b);
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// RRC taps at `osf` samples per symbol, centred, `SPAN_SYMBOLS * osf + 1` long,
/// scaled so that `Σ h² = osf`.
pub fn rrc_taps(osf: usize) -> Vec<f64> {
    let n = SPAN_SYMBOLS * osf;
    let mut h: Vec<f64> = (0..=n)
        .map(|k| rrc((k as f64 - n as f64 / 2.0) / osf as f64, ROLL_OFF))
        .collect();
    let energy: f64 = h.iter().map(|v| v * v).sum();
    let scale = (osf as f64 / energy).sqrt();
    h.iter_mut().for_each(|v| *v *= scale);
    h
}

pub fn map_symbol(b0: u8, b1: u8) -> C64 {
    C64::new(
        (1.0 - 2.0 * f64::from(b0 & 1)) * FRAC_1_SQRT_2,
        (1.0 - 2.0 * f64::from(b1 & 1)) * FRAC_1_SQRT_2,
    )
}

pub fn map_symbols(bits: &[u8]) -> Result<Vec<C64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::InvalidLength {
            expected: "an even number of QPSK bits".into(),
            actual: bits.len(),
        });
    }
    Ok(bits.chunks(2).map(|p| map_symbol(p[0], p[1])).collect())
}

/// Pulse-shaped samples, `osf` per QPSK symbol (`osf` even).
pub fn qpsk_samples(bits: &[u8], osf: usize) -> Result<Vec<C64>> {
    let symbols = map_symbols(bits)?;
    let h = rrc_taps(osf);
    let half_span = (SPAN_SYMBOLS * osf / 2) as isize;
    let n_out = symbols.len() * osf;
    let mut out = vec![C64::new(0.0, 0.0); n_out];
    for (i, s) in symbols.iter().enumerate() {
        let peak = (i * osf + osf / 2) as isize;
        let lo = (peak - half_span).max(0);
        let hi = (peak + half_span).min(n_out as isize - 1);
        for n in lo..=hi {
            out[n as usize] += s * h[(n - peak + half_span) as usize];
        }
    }
    Ok(out)
}

pub fn qpsk_modulate(bits: &[u8], osf: usize) -> Result<IqSignal> {
    Ok(IqSignal::new(qpsk_samples(bits, osf)?, osf as f64 * SYMBOL_RATE_HZ, Origin::Tx))
}

/// Soft bits from a filtered series where sample `first + 2 i · period` lies on
/// the boundary opening symbol `i` and `period` is the symbol length in base
/// symbol periods. `phase` rotates the constellation back before slicing.
pub fn qpsk_soft_from_series(
    series: &[C64],
    first: usize,
    n_bits: usize,
    period: usize,
    phase: f64,
) -> Result<Vec<f64>> {
    let n_sym = n_bits / 2;
    let step = 2 * period;
    let needed = first + step * n_sym;
    if series.len() < needed.max(1) {
        return Err(Error::Truncated {
            needed,
            available: series.len(),
        });
    }
    let rot = C64::from_polar(1.0, -phase);
    let mut out = Vec::with_capacity(n_bits);
    for i in 0..n_sym {
        let y = series[first + step * i + period] * rot;
        // bit 0 of the pair on I, bit 1 on Q; positive soft means bit 1
        out.push(-y.re);
        out.push(-y.im);
    }
    Ok(out)
}

/// Demodulates one block at 2 or 8 samples per symbol with carrier phase `phase`.
///
/// Input conventions match [`super::gmsk::gmsk_demodulate`].
pub fn qpsk_demodulate(sig: &IqSignal, n_bits: usize) -> Result<Vec<f64>> {
    qpsk_demodulate_with_phase(sig, n_bits, 0.0)
}

pub fn qpsk_demodulate_with_phase(sig: &IqSignal, n_bits: usize, phase: f64) -> Result<Vec<f64>> {
    if !n_bits.is_multiple_of(2) {
        return Err(Error::InvalidLength {
            expected: "an even number of QPSK bits".into(),
            actual: n_bits,
        });
    }
    let sps = require_sps(sig, &[2, 8])?;
    let n_sym = n_bits / 2;
    if sps == 2 {
        return qpsk_soft_from_series(&sig.samples, 0, n_bits, 1, phase);
    }
    if sig.len() < n_sym * sps {
        return Err(Error::Truncated {
            needed: n_sym * sps,
            available: sig.len(),
        });
    }
    let series = receive_filter(&sig.samples, sps, 2 * n_sym + 1);
    qpsk_soft_from_series(&series, 0, n_bits, 1, phase)
}
