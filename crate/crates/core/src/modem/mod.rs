//! Baseband waveforms: GMSK and QPSK block modulators, hop synthesis and demodulators.
//!
//! Sample `n` of a block modulated at `osf` samples per symbol sits at time
//! `n / osf` symbol periods after the block start.

pub mod gmsk;
pub mod iq;
pub mod qpsk;
pub mod synth;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SYMBOL_RATE_HZ;
use crate::txchain::Modulation;

pub use gmsk::{gmsk_demodulate, gmsk_modulate, gmsk_samples, precode};
pub use iq::{pack_hops, read_iq, unpack_hops, write_iq, HopRecord, IqSidecar};
pub use qpsk::{qpsk_demodulate, qpsk_modulate, qpsk_samples};
pub use synth::{synthesize_fullband, synthesize_narrowband, NarrowbandHop};

pub type C64 = Complex64;

/// Transmit oversampling factor of the narrowband path.
pub const TX_OSF: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Tx,
    Channel,
    Channelized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqSignal {
    pub samples: Vec<C64>,
    pub sample_rate_hz: f64,
    pub center_freq_offset_hz: f64,
    pub origin: Origin,
}

impl IqSignal {
    pub fn new(samples: Vec<C64>, sample_rate_hz: f64, origin: Origin) -> Self {
        IqSignal {
            samples,
            sample_rate_hz,
            center_freq_offset_hz: 0.0,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples per symbol when the rate is an integer multiple of the symbol rate.
    pub fn samples_per_symbol(&self) -> Option<usize> {
        let ratio = self.sample_rate_hz / SYMBOL_RATE_HZ;
        let rounded = ratio.round();
        ((ratio - rounded).abs() < 1e-9 && rounded >= 1.0).then_some(rounded as usize)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// How long a QPSK symbol lasts relative to the GMSK symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpskTiming {
    /// Same 488.28125 baud as GMSK; QPSK blocks last half as long.
    #[default]
    EqualSymbolRate,
    /// Half the baud; QPSK blocks last as long as GMSK blocks.
    EqualDuration,
}

/// Bit mapping in front of the GMSK phase modulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GmskPrecoding {
    /// Differential precoding so that each Laurent pseudo-symbol carries one
    /// bit and coherent detection needs no differential decode.
    #[default]
    Differential,
    /// Bits drive the frequency pulses directly; the receiver decodes
    /// pairs of pseudo-symbols.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModemConfig {
    #[serde(default)]
    pub qpsk_timing: QpskTiming,
    #[serde(default)]
    pub gmsk_precoding: GmskPrecoding,
}

impl ModemConfig {
    /// Length of one modulation symbol in base symbol periods.
    pub fn symbol_periods(&self, modulation: Modulation) -> usize {
        match (modulation, self.qpsk_timing) {
            (Modulation::Gmsk, _) | (Modulation::Qpsk, QpskTiming::EqualSymbolRate) => 1,
            (Modulation::Qpsk, QpskTiming::EqualDuration) => 2,
        }
    }

    /// Block duration in base symbol periods for `n_bits` block bits.
    pub fn block_periods(&self, n_bits: usize, modulation: Modulation) -> usize {
        n_bits.div_ceil(modulation.bits_per_symbol()) * self.symbol_periods(modulation)
    }

    /// Modulates one hop block at `osf` samples per base symbol period.
    pub fn modulate_block(&self, bits: &[u8], modulation: Modulation, osf: usize) -> Result<Vec<C64>> {
        match modulation {
            Modulation::Gmsk => match self.gmsk_precoding {
                GmskPrecoding::Differential => Ok(gmsk_samples(&precode(bits), osf)),
                GmskPrecoding::Off => Ok(gmsk_samples(bits, osf)),
            },
            Modulation::Qpsk => qpsk_samples(bits, osf * self.symbol_periods(modulation)),
        }
    }
}

pub(crate) fn require_sps(sig: &IqSignal, allowed: &[usize]) -> Result<usize> {
    match sig.samples_per_symbol() {
        Some(sps) if allowed.contains(&sps) => Ok(sps),
        _ => Err(Error::UnsupportedRate {
            rate_hz: sig.sample_rate_hz,
            reason: "expected an integer oversampling of the symbol rate",
        }),
    }
}

/// Two-symbol Hann receive filter decimated to two samples per symbol.
///
/// Output `j` is the windowed sum over input samples `(j - 2) * sps / 2 ..`
/// `+ 2 * sps`, centred half an input sample before time `j / 2` symbols.
/// Samples outside the slice count as zero. This is exactly the channel-centre
/// bin of the channelizer run with two bins per channel.
pub fn receive_filter(samples: &[C64], sps: usize, n_out: usize) -> Vec<C64> {
    assert!(sps >= 2 && sps.is_multiple_of(2), "receive filter needs an even oversampling");
    let w = crate::detector::hann(2 * sps);
    let half = (sps / 2) as isize;
    (0..n_out)
        .map(|j| {
            let first = (j as isize - 2) * half;
            let mut acc = C64::new(0.0, 0.0);
            for (k, wk) in w.iter().enumerate() {
                let idx = first + k as isize;
                if idx >= 0 && (idx as usize) < samples.len() {
                    acc += samples[idx as usize] * wk;
                }
            }
            acc
        })
        .collect()
}
