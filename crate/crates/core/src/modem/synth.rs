//! Packet synthesis: per-hop narrowband blocks or one full-band composite.

use serde::{Deserialize, Serialize};

use super::{IqSignal, ModemConfig, Origin, C64, TX_OSF};
use crate::error::{Error, Result};
use crate::params::{DataRateProfile, SYMBOL_RATE_HZ};
use crate::txchain::PacketBlocks;

/// One hop of a packet at 8 samples per symbol, in its own channel's baseband.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrowbandHop {
    /// Position in the packet: headers first, then fragments.
    pub block: usize,
    /// Plan channel index.
    pub channel: u32,
    /// Packet-relative index of `signal.samples[0]` at 8 samples per symbol.
    pub start_sample: i64,
    pub n_bits: usize,
    pub signal: IqSignal,
}

fn check_plan(blocks: &PacketBlocks, profile: &DataRateProfile) -> Result<()> {
    if blocks.plan.len() != blocks.n_blocks() {
        return Err(Error::InvalidLength {
            expected: format!("{} plan entries", blocks.n_blocks()),
            actual: blocks.plan.len(),
        });
    }
    if let Some(&index) = blocks.plan.channel_indices.iter().find(|&&c| c >= profile.n_cf) {
        return Err(Error::PlanOutOfBand {
            index,
            n_channels: profile.n_cf,
        });
    }
    Ok(())
}

pub fn synthesize_narrowband(
    blocks: &PacketBlocks,
    profile: &DataRateProfile,
    cfg: &ModemConfig,
) -> Result<Vec<NarrowbandHop>> {
    check_plan(blocks, profile)?;
    let modulation = blocks.modulation();
    let mut start = 0i64;
    let mut hops = Vec::with_capacity(blocks.n_blocks());
    for (block, (bits, channel)) in blocks.blocks().enumerate() {
        let samples = cfg.modulate_block(bits, modulation, TX_OSF)?;
        let len = samples.len() as i64;
        let mut signal = IqSignal::new(samples, TX_OSF as f64 * SYMBOL_RATE_HZ, Origin::Tx);
        signal.center_freq_offset_hz = profile.channel_offset_hz(channel);
        hops.push(NarrowbandHop {
            block,
            channel,
            start_sample: start,
            n_bits: bits.len(),
            signal,
        });
        start += len;
    }
    Ok(hops)
}

/// Composite signal at `samples_per_symbol · Rs` with every block moved to its
/// plan channel's offset from the band centre.
pub fn synthesize_fullband(
    blocks: &PacketBlocks,
    profile: &DataRateProfile,
    cfg: &ModemConfig,
    samples_per_symbol: usize,
) -> Result<IqSignal> {
    check_plan(blocks, profile)?;
    let fs = samples_per_symbol as f64 * SYMBOL_RATE_HZ;
    let modulation = blocks.modulation();
    let mut out: Vec<C64> = Vec::new();
    for (bits, channel) in blocks.blocks() {
        let offset = profile.channel_offset_hz(channel);
        if offset.abs() >= fs / 2.0 - SYMBOL_RATE_HZ / 2.0 {
            return Err(Error::PlanOutOfBand {
                index: channel,
                n_channels: (fs / SYMBOL_RATE_HZ) as u32,
            });
        }
        let samples = cfg.modulate_block(bits, modulation, samples_per_symbol)?;
        let n0 = out.len();
        let step = 2.0 * std::f64::consts::PI * offset / fs;
        out.extend(samples.iter().enumerate().map(|(k, s)| {
            // offsets are whole multiples of Rs, so reduce the phase exactly
            let n = ((n0 + k) as u64 % (samples_per_symbol as u64 * 1024)) as f64;
            s * C64::from_polar(1.0, step * n)
        }));
    }
    Ok(IqSignal::new(out, fs, Origin::Tx))
}
