//! Carrier recovery for one block.
//!
//! Raising the decision points to the modulation's power (squares for GMSK
//! pseudo-symbols, fourth powers for QPSK) strips the data and leaves a tone
//! at `P · f` with chirp `P · r`. For each candidate Doppler rate the chirp is
//! removed and a zero-padded FFT finds the frequency; the best peak over the
//! rate grid wins. The phase comes out modulo `2π / P`.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::modem::C64;

/// A linear frequency track `f(t) = freq_hz + rate_hz_per_s · (t - t_ref_s)`
/// with phase `phase` at `t_ref_s`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Track {
    pub freq_hz: f64,
    pub rate_hz_per_s: f64,
    pub t_ref_s: f64,
    pub phase: f64,
}

impl Track {
    pub fn constant(freq_hz: f64) -> Self {
        Track {
            freq_hz,
            ..Track::default()
        }
    }

    pub fn freq_at(&self, t_s: f64) -> f64 {
        self.freq_hz + self.rate_hz_per_s * (t_s - self.t_ref_s)
    }

    /// Carrier phase at `t_s`.
    pub fn phase_at(&self, t_s: f64) -> f64 {
        let d = t_s - self.t_ref_s;
        self.phase + 2.0 * PI * (self.freq_hz * d + 0.5 * self.rate_hz_per_s * d * d)
    }

    /// This track with a residual track (referenced to `residual.t_ref_s`) added on.
    pub fn plus(&self, residual: &Track) -> Track {
        let t = residual.t_ref_s;
        Track {
            freq_hz: self.freq_at(t) + residual.freq_hz,
            rate_hz_per_s: self.rate_hz_per_s + residual.rate_hz_per_s,
            t_ref_s: t,
            phase: self.phase_at(t) + residual.phase,
        }
    }
}

/// Search ranges for [`estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierSearch {
    /// Largest residual frequency considered, Hz.
    pub freq_span_hz: f64,
    /// Doppler-rate candidates, Hz/s.
    pub rates: Vec<f64>,
}

impl CarrierSearch {
    pub fn fixed_rate(freq_span_hz: f64, rate: f64) -> Self {
        CarrierSearch {
            freq_span_hz,
            rates: vec![rate],
        }
    }

    /// Rates `-max..=max` in steps of `step`.
    pub fn rate_grid(freq_span_hz: f64, max_rate: f64, step: f64) -> Self {
        let n = (max_rate / step).floor() as i64;
        CarrierSearch {
            freq_span_hz,
            rates: (-n..=n).map(|k| k as f64 * step).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierEstimate {
    /// Residual track, referenced to time zero of the point times.
    pub track: Track,
    /// Normalised peak, `|Σ w| / Σ |w|` in `[0, 1]`.
    pub quality: f64,
}

/// Estimates frequency, rate and phase (mod `2π / power`) of `points`
/// taken at `t_first + k · dt` seconds.
///
/// `power` is 2 for pseudo-symbols on the real axis and 4 for QPSK, whose
/// fourth powers all equal `-1`.
pub fn estimate(points: &[C64], t_first: f64, dt: f64, power: u32, search: &CarrierSearch) -> CarrierEstimate {
    let n = points.len();
    if n == 0 || search.rates.is_empty() {
        return CarrierEstimate {
            track: Track::default(),
            quality: 0.0,
        };
    }
    let p = f64::from(power);
    let sign = if power.is_multiple_of(4) { -1.0 } else { 1.0 };
    let raised: Vec<C64> = points.iter().map(|z| z.powu(power) * sign).collect();
    let total: f64 = raised.iter().map(|w| w.norm()).sum();
    let len = (16 * n).next_power_of_two().max(256);
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut buf = vec![C64::new(0.0, 0.0); len];
    let bin_hz = 1.0 / (len as f64 * dt * p);
    let max_bin = ((search.freq_span_hz / bin_hz).floor() as usize).min(len / 2 - 1);

    // peak magnitude and refined frequency for one rate
    let mut scan = |rate: f64| {
        buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (k, w) in raised.iter().enumerate() {
            let t = t_first + k as f64 * dt;
            // the FFT phase reference is the first point; the chirp keeps absolute time
            buf[k] = w * C64::from_polar(1.0, -PI * p * rate * t * t);
        }
        fft.process(&mut buf);
        let mag = |b: i64| buf[b.rem_euclid(len as i64) as usize].norm();
        let (mut peak_bin, mut peak) = (0i64, f64::NEG_INFINITY);
        for b in -(max_bin as i64)..=max_bin as i64 {
            let v = mag(b);
            if v > peak {
                peak = v;
                peak_bin = b;
            }
        }
        let delta = parabola(mag(peak_bin - 1), peak, mag(peak_bin + 1));
        (peak, (peak_bin as f64 + delta) * bin_hz)
    };

    let peaks: Vec<(f64, f64)> = search.rates.iter().map(|&r| scan(r)).collect();
    let i = (0..peaks.len()).fold(0, |b, i| if peaks[i].0 > peaks[b].0 { i } else { b });
    let (freq, rate) = (peaks[i].1, search.rates[i]);
    let sum: C64 = raised
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let t = t_first + k as f64 * dt;
            w * C64::from_polar(1.0, -p * 2.0 * PI * (freq * t + 0.5 * rate * t * t))
        })
        .sum();
    CarrierEstimate {
        track: Track {
            freq_hz: freq,
            rate_hz_per_s: rate,
            t_ref_s: 0.0,
            phase: sum.arg() / p,
        },
        quality: if total > 0.0 { sum.norm() / total } else { 0.0 },
    }
}

/// Offset of a parabola's vertex through three equally spaced samples, in `[-0.5, 0.5]`.
fn parabola(l: f64, c: f64, r: f64) -> f64 {
    let den = l - 2.0 * c + r;
    if den.abs() > 1e-300 {
        (0.5 * (l - r) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}
