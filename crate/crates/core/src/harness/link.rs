//! One packet through the channel, in either synthesis mode, plus the
//! oracle view of where it ended up.

use super::seed::derive_seed;
use crate::channel::{add_awgn, apply_channel, apply_doppler, apply_timing_offset, ChannelConfig};
use crate::error::Result;
use crate::modem::{synthesize_fullband, synthesize_narrowband, IqSignal, ModemConfig, NarrowbandHop, C64, TX_OSF};
use crate::params::{DataRateProfile, SYMBOL_RATE_HZ};
use crate::rxchain::carrier::Track;
use crate::rxchain::receiver::OracleSync;
use crate::txchain::PacketBlocks;

/// Symbols of silence appended to each hop so a timing delay does not cut
/// the last pulse off.
pub const HOP_TAIL_SYMBOLS: usize = 4;

/// Mean power of the transmitted samples.
fn tx_power<'a>(samples: impl Iterator<Item = &'a C64>) -> f64 {
    let (sum, n) = samples.fold((0.0, 0usize), |(a, n), s| (a + s.norm_sqr(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Narrowband hops through Doppler, timing offset and noise. Doppler follows
/// one trajectory over the packet; each hop gets its own noise stream, scaled
/// to that hop's transmitted power.
pub fn impair_hops(hops: &[NarrowbandHop], cfg: &ChannelConfig) -> Result<Vec<NarrowbandHop>> {
    cfg.validate()?;
    let fs = TX_OSF as f64 * SYMBOL_RATE_HZ;
    hops.iter()
        .map(|h| {
            let mut padded = h.signal.clone();
            padded
                .samples
                .extend(std::iter::repeat_n(C64::new(0.0, 0.0), HOP_TAIL_SYMBOLS * TX_OSF));
            let t0 = h.start_sample as f64 / fs;
            let mut sig = apply_doppler(&padded, cfg.doppler_rate, cfg.initial_cfo_hz, t0);
            if cfg.timing_offset_eighths > 0 {
                sig = apply_timing_offset(&sig, usize::from(cfg.timing_offset_eighths))?;
            }
            let power = tx_power(h.signal.samples.iter());
            let seed = derive_seed(cfg.rng_seed, &[h.block as u64]);
            Ok(NarrowbandHop {
                signal: add_awgn(&sig, cfg.snr_db, seed, Some(power)),
                ..h.clone()
            })
        })
        .collect()
}

/// Synthesizes a packet's hops and sends them through the channel.
pub fn narrowband_link(
    blocks: &PacketBlocks,
    profile: &DataRateProfile,
    modem: &ModemConfig,
    cfg: &ChannelConfig,
) -> Result<Vec<NarrowbandHop>> {
    impair_hops(&synthesize_narrowband(blocks, profile, modem)?, cfg)
}

/// Synthesizes the full-band composite with `lead_symbols` of silence in
/// front and sends it through the channel.
pub fn fullband_link(
    blocks: &PacketBlocks,
    profile: &DataRateProfile,
    modem: &ModemConfig,
    samples_per_symbol: usize,
    lead_symbols: usize,
    cfg: &ChannelConfig,
) -> Result<IqSignal> {
    let tx = synthesize_fullband(blocks, profile, modem, samples_per_symbol)?;
    let power = tx_power(tx.samples.iter());
    let mut samples = vec![C64::new(0.0, 0.0); lead_symbols * samples_per_symbol];
    samples.extend_from_slice(&tx.samples);
    samples.extend(std::iter::repeat_n(C64::new(0.0, 0.0), HOP_TAIL_SYMBOLS * samples_per_symbol));
    let padded = IqSignal { samples, ..tx };
    let clean = ChannelConfig { snr_db: None, ..*cfg };
    let sig = apply_channel(&padded, &clean, 0.0)?;
    Ok(add_awgn(&sig, cfg.snr_db, cfg.rng_seed, Some(power)))
}

/// Where the packet starting at `start_s` (before the channel) sits after it.
///
/// Doppler runs on the transmit time axis from sample 0 and the timing
/// offset delays everything after, so the carrier reference moves with the delay.
pub fn oracle_for(blocks: &PacketBlocks, n_header_replicas: usize, cfg: &ChannelConfig, start_s: f64) -> OracleSync {
    let delay = f64::from(cfg.timing_offset_eighths) / (TX_OSF as f64 * SYMBOL_RATE_HZ);
    let start = start_s + delay;
    OracleSync {
        start_s: start,
        track: Track {
            freq_hz: cfg.initial_cfo_hz,
            rate_hz_per_s: cfg.doppler_rate,
            t_ref_s: delay,
            phase: 0.0,
        },
        header_channels: blocks.plan.channel_indices[..n_header_replicas].to_vec(),
        carrier_delay_s: 0.0,
    }
}

/// [`oracle_for`] for a full-band capture, where the timing delay also
/// turns each channel's carrier.
pub fn fullband_oracle_for(
    blocks: &PacketBlocks,
    n_header_replicas: usize,
    cfg: &ChannelConfig,
    start_s: f64,
) -> OracleSync {
    OracleSync {
        carrier_delay_s: f64::from(cfg.timing_offset_eighths) / (TX_OSF as f64 * SYMBOL_RATE_HZ),
        ..oracle_for(blocks, n_header_replicas, cfg, start_s)
    }
}
