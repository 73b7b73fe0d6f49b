//! GMSK, BT = 0.3, modulation index 1/2.
//!
//! The frequency pulse is a unit-width rectangle convolved with a Gaussian,
//! truncated to three symbols and scaled so that each symbol turns the phase
//! by exactly `±π/2`. Bit 1 raises the frequency.
//!
//! Demodulation is coherent on the two-sample-per-symbol receive-filter
//! output. At the boundary closing symbol `k` the phase has turned by
//! `(π/2) Σ_{i≤k} a_i`; removing the `j^{k+1}` ramp leaves a real value whose
//! sign changes at every 0 bit, so bits come from consecutive sign products.
//! The bits are not precoded, so this last step is a two-state differential
//! decode, done here in max-log form.

use std::f64::consts::PI;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::{receive_filter, require_sps, IqSignal, Origin, C64};
use crate::error::{Error, Result};
use crate::params::SYMBOL_RATE_HZ;

pub const BT: f64 = 0.3;
/// Frequency pulse length in symbols.
pub const PULSE_SYMBOLS: usize = 3;

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Untruncated frequency pulse at `t` symbols from its centre, area 1/2.
fn frequency_pulse(t: f64) -> f64 {
    let sigma = 2f64.ln().sqrt() / (2.0 * PI * BT);
    0.5 * (normal_cdf((t + 0.5) / sigma) - normal_cdf((t - 0.5) / sigma))
}

/// Cumulative phase pulse `q(u)` at `u = j / osf`, `j = 0..=3 osf`, where `u`
/// runs from the start of the truncated pulse. `q(0) = 0`, `q(3) = 1/2`.
pub fn phase_pulse(osf: usize) -> Vec<f64> {
    const SUB: usize = 64;
    let half = PULSE_SYMBOLS as f64 / 2.0;
    let h = 1.0 / (osf * SUB) as f64;
    let mut q = Vec::with_capacity(PULSE_SYMBOLS * osf + 1);
    let mut acc = 0.0;
    q.push(0.0);
    for j in 0..PULSE_SYMBOLS * osf {
        // Simpson's rule over each of SUB/2 double steps inside [j, j+1] / osf
        let u0 = j as f64 / osf as f64;
        let mut seg = 0.0;
        for s in 0..SUB / 2 {
            let a = u0 + 2.0 * s as f64 * h - half;
            seg += frequency_pulse(a) + 4.0 * frequency_pulse(a + h) + frequency_pulse(a + 2.0 * h);
        }
        acc += seg * h / 3.0;
        q.push(acc);
    }
    let total = acc;
    q.iter_mut().for_each(|v| *v *= 0.5 / total);
    q
}

/// [`phase_pulse`] computed once per oversampling factor.
fn cached_phase_pulse(osf: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    let mut map = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    map.entry(osf).or_insert_with(|| Arc::new(phase_pulse(osf))).clone()
}

/// Unit-modulus GMSK samples, `osf` per symbol, `bits.len() * osf` in total.
pub fn gmsk_samples(bits: &[u8], osf: usize) -> Vec<C64> {
    let q = cached_phase_pulse(osf);
    let a = |i: isize| -> f64 {
        if i < 0 || i as usize >= bits.len() {
            0.0
        } else if bits[i as usize] & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    };
    let mut out = Vec::with_capacity(bits.len() * osf);
    // Sum of a_i over pulses that have fully passed.
    let mut settled = 0.0;
    for sym in 0..bits.len() as isize {
        if sym >= 2 {
            settled += a(sym - 2);
        }
        for frac in 0..osf {
            let partial = a(sym + 1) * q[frac] + a(sym) * q[osf + frac] + a(sym - 1) * q[2 * osf + frac];
            let phase = PI * (0.5 * settled + partial);
            out.push(C64::from_polar(1.0, phase));
        }
    }
    out
}

pub fn gmsk_modulate(bits: &[u8], osf: usize) -> IqSignal {
    IqSignal::new(gmsk_samples(bits, osf), osf as f64 * SYMBOL_RATE_HZ, Origin::Tx)
}

/// Pseudo-symbols `z_{k+1} · j^{-(k+1)}` for bits `0..n_bits`, where
/// `series[first + 2 i]` lies on the boundary opening symbol `i`.
///
/// On a clean block with carrier phase `φ` these are `±e^{jφ}` with the sign
/// flipping at every 0 bit.
pub fn pseudo_symbols(series: &[C64], first: usize, n_bits: usize) -> Result<Vec<C64>> {
    let needed = first + 2 * n_bits + 1;
    if series.len() < needed {
        return Err(Error::Truncated {
            needed,
            available: series.len(),
        });
    }
    let mut rot = C64::new(1.0, 0.0);
    Ok((0..n_bits)
        .map(|k| {
            rot *= C64::new(0.0, -1.0);
            series[first + 2 * (k + 1)] * rot
        })
        .collect())
}

/// Differential precoding: transmitted bit `k` is 1 when data bits `k - 1`
/// and `k` agree, with a 1 before the block. Pseudo-symbol `k` then has the
/// sign of data bit `k` (see [`pseudo_symbols`]).
pub fn precode(bits: &[u8]) -> Vec<u8> {
    let mut prev = 1;
    bits.iter()
        .map(|&b| {
            let d = u8::from(b & 1 == prev);
            prev = b & 1;
            d
        })
        .collect()
}

/// Max-log soft bits from real pseudo-symbol projections: bit `k` is 1 when
/// `y_k` keeps the sign of `y_{k-1}`; the block opens on a positive reference.
pub fn soft_from_projections(y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut prev = f64::INFINITY;
    for &v in y {
        out.push((prev * v).signum() * prev.abs().min(v.abs()));
        prev = v;
    }
    out
}

/// Carrier phase modulo π from the squared pseudo-symbols.
pub fn blind_phase(pseudo: &[C64]) -> f64 {
    pseudo.iter().map(|z| z * z).sum::<C64>().arg() / 2.0
}

/// Coherent soft bits with a known carrier phase. Positive means bit 1.
///
/// A π phase error flips only the soft value of bit 0.
pub fn gmsk_soft_from_series(series: &[C64], first: usize, n_bits: usize, phase: f64) -> Result<Vec<f64>> {
    let rot = C64::from_polar(1.0, -phase);
    let y: Vec<f64> = pseudo_symbols(series, first, n_bits)?
        .iter()
        .map(|z| (z * rot).re)
        .collect();
    Ok(soft_from_projections(&y))
}

/// Demodulates one block, estimating the carrier phase blindly.
///
/// At 8 samples per symbol the input is the raw block starting at its first
/// sample and is passed through the receive filter here. At 2 samples per
/// symbol the input is already filtered and sample `2 i` sits on the boundary
/// opening symbol `i`, as produced by [`receive_filter`].
pub fn gmsk_demodulate(sig: &IqSignal, n_bits: usize) -> Result<Vec<f64>> {
    let series = filtered(sig, n_bits)?;
    let phase = blind_phase(&pseudo_symbols(&series, 0, n_bits)?);
    gmsk_soft_from_series(&series, 0, n_bits, phase)
}

pub fn gmsk_demodulate_with_phase(sig: &IqSignal, n_bits: usize, phase: f64) -> Result<Vec<f64>> {
    gmsk_soft_from_series(&filtered(sig, n_bits)?, 0, n_bits, phase)
}

fn filtered(sig: &IqSignal, n_bits: usize) -> Result<Vec<C64>> {
    let sps = require_sps(sig, &[2, 8])?;
    if sps == 2 {
        return Ok(sig.samples.clone());
    }
    if sig.len() < n_bits * sps {
        return Err(Error::Truncated {
            needed: n_bits * sps,
            available: sig.len(),
        });
    }
    Ok(receive_filter(&sig.samples, sps, 2 * n_bits + 1))
}
