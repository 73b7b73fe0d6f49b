//! Receive front ends: where block series and header candidates come from.
//!
//! Both front ends hand out a block as a [`BlockSeries`] on the
//! two-sample-per-symbol grid with a carrier track already removed. The
//! narrowband one works from per-hop captures at 8 samples per symbol and
//! filters them itself; the fullband one reads channelizer bins out of a
//! [`BlockStore`].

use super::carrier::Track;
use super::demap::BlockSeries;
use crate::detector::{channelize, BlockStore, ChannelizerConfig, DetectionEvent, HeaderDetector};
use crate::error::{Error, Result};
use crate::modem::{receive_filter, IqSignal, NarrowbandHop, C64, TX_OSF};
use crate::params::SYMBOL_RATE_HZ;

/// Symbols of context kept on each side of a block.
const GUARD_SYMBOLS: usize = 2;

/// A header detection placed on the absolute time and frequency axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub event: DetectionEvent,
    /// Header start, seconds.
    pub start_s: f64,
    /// Centre of the OBW channel the header was found in, Hz from band centre.
    pub channel_freq_hz: f64,
    /// Offset from that centre, Hz.
    pub cfo_hz: f64,
}

pub trait Frontend: Sync {
    /// The block opening at `t0_s` and lasting `n_periods` symbol periods,
    /// seen in the channel centred at `channel_freq_hz` with `track` removed.
    fn block_series(&self, channel_freq_hz: f64, track: &Track, t0_s: f64, n_periods: usize) -> Result<BlockSeries>;

    /// Spacing of timing hypotheses worth trying around a detection.
    fn timing_step_s(&self) -> f64;

    /// Channelizer the header detector must be built for.
    fn channelizer(&self) -> &ChannelizerConfig;

    /// Header candidates in time order. `stop` is consulted after each
    /// capture so callers can quit scanning once a header decodes.
    fn candidates(
        &self,
        detector: &HeaderDetector,
        stop: &mut dyn FnMut(&[Candidate]) -> bool,
    ) -> Result<Vec<Candidate>>;
}

/// Hop captures of one packet at 8 samples per symbol, each in the
/// baseband of its own channel.
///
/// Only each hop's `channel`, `start_sample` and `signal` are used.
pub struct NarrowbandFrontend<'a> {
    hops: Vec<&'a NarrowbandHop>,
    n_cf: u32,
    chan: ChannelizerConfig,
}

impl<'a> NarrowbandFrontend<'a> {
    pub fn new(hops: &'a [NarrowbandHop], n_cf: u32) -> Result<Self> {
        for h in hops {
            if h.signal.samples_per_symbol() != Some(TX_OSF) {
                return Err(Error::UnsupportedRate {
                    rate_hz: h.signal.sample_rate_hz,
                    reason: "narrowband hops are captured at 8 samples per symbol",
                });
            }
        }
        let mut hops: Vec<&NarrowbandHop> = hops.iter().collect();
        hops.sort_by_key(|h| h.start_sample);
        Ok(NarrowbandFrontend {
            hops,
            n_cf,
            chan: ChannelizerConfig::narrowband(),
        })
    }

    fn hop_freq(&self, h: &NarrowbandHop) -> f64 {
        (f64::from(h.channel) - f64::from(self.n_cf / 2)) * SYMBOL_RATE_HZ
    }

    fn fs() -> f64 {
        TX_OSF as f64 * SYMBOL_RATE_HZ
    }

    /// The capture that best contains `[t0, t1]`.
    fn hop_for(&self, t0_s: f64, t1_s: f64) -> Option<&NarrowbandHop> {
        let fs = Self::fs();
        self.hops
            .iter()
            .map(|h| {
                let start = h.start_sample as f64 / fs;
                let end = start + h.signal.len() as f64 / fs;
                (h, (t0_s - start).min(end - t1_s))
            })
            .filter(|(_, margin)| *margin > -1.0 / SYMBOL_RATE_HZ)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(h, _)| *h)
    }
}

impl Frontend for NarrowbandFrontend<'_> {
    fn block_series(&self, channel_freq_hz: f64, track: &Track, t0_s: f64, n_periods: usize) -> Result<BlockSeries> {
        let t1_s = t0_s + n_periods as f64 / SYMBOL_RATE_HZ;
        let hop = self.hop_for(t0_s, t1_s).ok_or(Error::Truncated {
            needed: n_periods * TX_OSF,
            available: 0,
        })?;
        let fs = Self::fs();
        let shift = channel_freq_hz - self.hop_freq(hop);
        let g = GUARD_SYMBOLS * TX_OSF;
        let s0 = (t0_s * fs).round() as i64 - hop.start_sample - g as i64;
        let len = (n_periods + 2 * GUARD_SYMBOLS) * TX_OSF;
        let seg: Vec<C64> = (0..len as i64)
            .map(|i| {
                let idx = s0 + i;
                if idx < 0 || idx as usize >= hop.signal.len() {
                    return C64::new(0.0, 0.0);
                }
                let t = (hop.start_sample + idx) as f64 / fs;
                let phase = track.phase_at(t) + 2.0 * std::f64::consts::PI * shift * t;
                hop.signal.samples[idx as usize] * C64::from_polar(1.0, -phase)
            })
            .collect();
        Ok(BlockSeries {
            series: receive_filter(&seg, TX_OSF, 2 * (n_periods + 2 * GUARD_SYMBOLS) + 1),
            first: 2 * GUARD_SYMBOLS,
        })
    }

    fn timing_step_s(&self) -> f64 {
        1.0 / Self::fs()
    }

    fn channelizer(&self) -> &ChannelizerConfig {
        &self.chan
    }

    fn candidates(
        &self,
        detector: &HeaderDetector,
        stop: &mut dyn FnMut(&[Candidate]) -> bool,
    ) -> Result<Vec<Candidate>> {
        let mut out = Vec::new();
        for hop in &self.hops {
            let frames = channelize(&hop.signal, &self.chan)?;
            if frames.is_empty() {
                continue;
            }
            let mut store = BlockStore::new(self.chan.clone(), frames.len())?;
            store.store_frames(&frames)?;
            let hop_t0 = hop.start_sample as f64 / Self::fs();
            let found: Vec<Candidate> = detector
                .detect(&store)?
                .into_iter()
                .map(|event| Candidate {
                    start_s: hop_t0 + event.start_symbols() / SYMBOL_RATE_HZ,
                    channel_freq_hz: self.hop_freq(hop) + event.channel_index as f64 * SYMBOL_RATE_HZ,
                    cfo_hz: event.fine_cfo_hz,
                    event,
                })
                .collect();
            if stop(&found) {
                out.extend(found);
                break;
            }
            out.extend(found);
        }
        Ok(out)
    }
}

/// A channelized full-band capture. Bin 0 is the band centre.
pub struct FullbandFrontend {
    store: BlockStore,
}

impl FullbandFrontend {
    pub fn new(sig: &IqSignal, chan: &ChannelizerConfig) -> Result<Self> {
        let frames = channelize(sig, chan)?;
        let mut store = BlockStore::new(chan.clone(), frames.len().max(1))?;
        store.store_frames(&frames)?;
        Ok(FullbandFrontend { store })
    }

    pub fn from_store(store: BlockStore) -> Self {
        FullbandFrontend { store }
    }

    pub fn store(&self) -> &BlockStore {
        &self.store
    }
}

impl Frontend for FullbandFrontend {
    fn block_series(&self, channel_freq_hz: f64, track: &Track, t0_s: f64, n_periods: usize) -> Result<BlockSeries> {
        let cfg = self.store.config();
        let t_mid = t0_s + 0.5 * n_periods as f64 / SYMBOL_RATE_HZ;
        let freq_mid = channel_freq_hz + track.freq_at(t_mid);
        let offset = (freq_mid / SYMBOL_RATE_HZ).round() as i64;
        let mk = cfg.fft_len() as i64;
        if offset < -mk / 2 || offset >= mk - mk / 2 {
            return Err(Error::PlanOutOfBand {
                index: offset.unsigned_abs() as u32,
                n_channels: mk as u32,
            });
        }
        let bin = cfg.obw_bin(offset);
        let shift = channel_freq_hz - offset as f64 * SYMBOL_RATE_HZ;
        let f0 = cfg.frame_at(t0_s * SYMBOL_RATE_HZ).round() as i64 - 2 * GUARD_SYMBOLS as i64;
        let n = 2 * (n_periods + 2 * GUARD_SYMBOLS) + 1;
        let raw = self.store.fetch_padded(bin, f0, n);
        let series = raw
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let t = cfg.frame_time_symbols(f0 + i as i64) / SYMBOL_RATE_HZ;
                let phase = track.phase_at(t) + 2.0 * std::f64::consts::PI * shift * t;
                v * C64::from_polar(1.0, -phase)
            })
            .collect();
        Ok(BlockSeries {
            series,
            first: 2 * GUARD_SYMBOLS,
        })
    }

    fn timing_step_s(&self) -> f64 {
        0.5 / SYMBOL_RATE_HZ
    }

    fn channelizer(&self) -> &ChannelizerConfig {
        self.store.config()
    }

    fn candidates(
        &self,
        detector: &HeaderDetector,
        stop: &mut dyn FnMut(&[Candidate]) -> bool,
    ) -> Result<Vec<Candidate>> {
        let found: Vec<Candidate> = detector
            .detect(&self.store)?
            .into_iter()
            .map(|event| Candidate {
                start_s: event.start_symbols() / SYMBOL_RATE_HZ,
                channel_freq_hz: event.channel_index as f64 * SYMBOL_RATE_HZ,
                cfo_hz: event.fine_cfo_hz,
                event,
            })
            .collect();
        stop(&found);
        Ok(found)
    }
}
