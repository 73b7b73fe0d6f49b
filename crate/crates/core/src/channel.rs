//! LEO channel impairments: Doppler ramp, symbol timing offset and AWGN.
//!
//! SNR is referenced to the 488.28125 Hz symbol-rate bandwidth: with signal
//! power `P` at `sps` samples per symbol the complex noise variance per sample
//! is `P · sps / SNR`. The harness applies Doppler, then timing, then noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::{IqSignal, Origin, C64, TX_OSF};

/// How swept "Doppler" values are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DopplerMode {
    /// Values are frequency ramp slopes in Hz/s.
    #[default]
    Rate,
    /// Values are constant carrier offsets in Hz.
    Offset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// SNR in dB over 488.28125 Hz; `None` means noiseless.
    pub snr_db: Option<f64>,
    /// Frequency ramp in Hz/s.
    #[serde(default)]
    pub doppler_rate: f64,
    #[serde(default)]
    pub initial_cfo_hz: f64,
    /// Delay in eighths of a symbol, `0..8`.
    #[serde(default)]
    pub timing_offset_eighths: u8,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            snr_db: None,
            doppler_rate: 0.0,
            initial_cfo_hz: 0.0,
            timing_offset_eighths: 0,
            rng_seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timing_offset_eighths >= 8 {
            return Err(Error::Config(format!(
                "timing offset {} must be below 8 eighths",
                self.timing_offset_eighths
            )));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::Config("SNR must be finite; omit it for a noiseless channel".into()));
            }
        }
        if !self.doppler_rate.is_finite() || !self.initial_cfo_hz.is_finite() {
            return Err(Error::Config("Doppler parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Applies a linear frequency ramp `cfo + rate · t` through a double accumulator.
///
/// `t0_s` is the time of the first sample, so hops cut from one packet see one
/// continuous carrier trajectory. The phase update uses the ramp's exact
/// integral over each sample step, giving `2π (cfo t + rate t² / 2)`.
pub fn apply_doppler(sig: &IqSignal, rate: f64, initial_cfo: f64, t0_s: f64) -> IqSignal {
    let fs = sig.sample_rate_hz;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut freq_acc = rate * t0_s;
    let mut phase_acc = two_pi * (initial_cfo * t0_s + 0.5 * rate * t0_s * t0_s);
    phase_acc = phase_acc.rem_euclid(two_pi);
    let half_step = 0.5 * rate / fs;
    let samples = sig
        .samples
        .iter()
        .map(|s| {
            let out = s * C64::from_polar(1.0, phase_acc);
            phase_acc = (phase_acc + two_pi * (initial_cfo + freq_acc + half_step) / fs).rem_euclid(two_pi);
            freq_acc += rate / fs;
            out
        })
        .collect();
    IqSignal {
        samples,
        origin: Origin::Channel,
        ..sig.clone()
    }
}

/// Delays a signal by `k` eighths of a symbol, keeping its length. The
/// oversampling must be a multiple of 8 so the delay is a whole number of samples.
pub fn apply_timing_offset(sig: &IqSignal, k_eighths: usize) -> Result<IqSignal> {
    let sps = match sig.samples_per_symbol() {
        Some(sps) if sps % TX_OSF == 0 => sps,
        _ => {
            return Err(Error::UnsupportedRate {
                rate_hz: sig.sample_rate_hz,
                reason: "timing offsets need a multiple of 8 samples per symbol",
            })
        }
    };
    let k = (k_eighths * sps / TX_OSF).min(sig.len());
    let mut samples = vec![C64::new(0.0, 0.0); k];
    samples.extend_from_slice(&sig.samples[..sig.len() - k]);
    Ok(IqSignal {
        samples,
        origin: Origin::Channel,
        ..sig.clone()
    })
}

/// Complex noise variance per sample for `snr_db` over the symbol-rate bandwidth.
pub fn noise_variance(signal_power: f64, samples_per_symbol: f64, snr_db: f64) -> f64 {
    signal_power * samples_per_symbol / 10f64.powf(snr_db / 10.0)
}

/// Mean power over the samples that carry signal (exact zeros are guard space).
pub fn occupied_power(sig: &IqSignal) -> f64 {
    let (sum, n) = sig
        .samples
        .iter()
        .filter(|s| s.norm_sqr() > 0.0)
        .fold((0.0, 0usize), |(a, n), s| (a + s.norm_sqr(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Adds complex white Gaussian noise in place from a caller-owned generator.
pub fn add_noise_with(samples: &mut [C64], variance: f64, rng: &mut impl rand::Rng) {
    let sd = (variance / 2.0).sqrt();
    for s in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *s += C64::new(re * sd, im * sd);
    }
}

/// Adds AWGN at `snr_db`. `signal_power` defaults to the occupied-sample power.
pub fn add_awgn(sig: &IqSignal, snr_db: Option<f64>, rng_seed: u64, signal_power: Option<f64>) -> IqSignal {
    let mut out = IqSignal {
        origin: Origin::Channel,
        ..sig.clone()
    };
    let Some(snr) = snr_db else {
        return out;
    };
    let power = signal_power.unwrap_or_else(|| occupied_power(sig));
    let sps = sig.sample_rate_hz / crate::params::SYMBOL_RATE_HZ;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    add_noise_with(&mut out.samples, noise_variance(power, sps, snr), &mut rng);
    out
}

/// Doppler, timing offset and noise in the harness order.
pub fn apply_channel(sig: &IqSignal, cfg: &ChannelConfig, t0_s: f64) -> Result<IqSignal> {
    cfg.validate()?;
    let shifted = apply_doppler(sig, cfg.doppler_rate, cfg.initial_cfo_hz, t0_s);
    let delayed = if cfg.timing_offset_eighths > 0 {
        apply_timing_offset(&shifted, usize::from(cfg.timing_offset_eighths))?
    } else {
        shifted
    };
    Ok(add_awgn(&delayed, cfg.snr_db, cfg.rng_seed, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::gmsk_modulate;
    use crate::params::SYMBOL_RATE_HZ;

    fn ones(n: usize) -> IqSignal {
        IqSignal::new(vec![C64::new(1.0, 0.0); n], 8.0 * SYMBOL_RATE_HZ, Origin::Tx)
    }

    #[test]
    fn identity_without_doppler() {
        let sig = gmsk_modulate(&[1, 0, 1, 1, 0], 8);
        assert_eq!(apply_doppler(&sig, 0.0, 0.0, 0.0).samples, sig.samples);
    }

    #[test]
    fn ramp_phase_matches_closed_form() {
        let sig = ones(4000);
        let (rate, cfo) = (400.0, 12.5);
        let out = apply_doppler(&sig, rate, cfo, 0.0);
        let fs = sig.sample_rate_hz;
        for (n, s) in out.samples.iter().enumerate().step_by(97) {
            let t = n as f64 / fs;
            let expect = 2.0 * std::f64::consts::PI * (cfo * t + 0.5 * rate * t * t);
            let err = (s.arg() - expect).rem_euclid(2.0 * std::f64::consts::PI);
            let err = err.min(2.0 * std::f64::consts::PI - err);
            assert!(err < 1e-6, "n={n} err={err}");
        }
        assert!(out.samples.iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn timing_offsets_add_up() {
        let sig = gmsk_modulate(&[1, 0, 0, 1, 1, 1, 0, 1], 8);
        let a = apply_timing_offset(&apply_timing_offset(&sig, 3).unwrap(), 5).unwrap();
        let b = apply_timing_offset(&sig, 8).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(&b.samples[8..], &sig.samples[..sig.len() - 8]);
        let wrong = IqSignal::new(vec![], 2.0 * SYMBOL_RATE_HZ, Origin::Tx);
        assert!(apply_timing_offset(&wrong, 1).is_err());
        let wide = IqSignal::new(vec![C64::new(1.0, 0.0); 64], 32.0 * SYMBOL_RATE_HZ, Origin::Tx);
        let d = apply_timing_offset(&wide, 3).unwrap();
        assert_eq!(d.samples.iter().take_while(|s| s.re == 0.0).count(), 12);
    }

    #[test]
    fn noise_is_seeded() {
        let sig = ones(256);
        assert_eq!(add_awgn(&sig, Some(3.0), 9, None), add_awgn(&sig, Some(3.0), 9, None));
        assert_ne!(add_awgn(&sig, Some(3.0), 9, None), add_awgn(&sig, Some(3.0), 10, None));
        assert_eq!(add_awgn(&sig, None, 9, None).samples, sig.samples);
    }
}
