//! Syncword cross-correlation header detector.
//!
//! Every bin's series is correlated against the channelized syncword of a
//! clean header, `c_k`, and each lag goes through an `M_det`-point FFT:
//!
//! `X_m(f) = Σ_{k<N} conj(c_k) r_{f+k} e^{-j2πkm/M_det}`, `P_m = |X_m|²`.
//!
//! The peak over `m` gives the fine CFO in steps of `2 Rs / M_det` (976/M Hz)
//! and the bin gives the coarse offset. A lag is reported when its peak power
//! exceeds `threshold × median` and nothing larger shows up within the search
//! interval on either side, in the same or an adjacent bin. The median is
//! pooled over all bins: noise is white, and a bin's own median is inflated
//! when a signal fills most of the capture.

use std::collections::VecDeque;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::channelizer::{channelize, Channelizer, ChannelizerConfig};
use super::store::BlockStore;
use crate::error::{Error, Result};
use crate::modem::{IqSignal, ModemConfig, C64};
use crate::params::SYMBOL_RATE_HZ;
use crate::txchain::{header_prefix_bits, Modulation, PREAMBLE};

/// Correlator FFT length used unless configured otherwise.
pub const DET_FFT_LEN: usize = 128;

/// Default peak-to-median acceptance ratio.
///
/// On noise the per-lag peak is the largest of `M_det` exponential bins, with
/// median near `ln M_det`. A ratio of 3.5 puts single-lag false alarms around
/// `M_det e^{-3.5 ln(M_det)·0.98}`, roughly 10⁻⁵ per lag, which the
/// search-interval rule thins to below 10⁻³ per channel-second.
pub const DEFAULT_THRESHOLD: f64 = 3.5;

const TEMPLATE_GUARD_SYMBOLS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Correlator length in output samples; `None` spans the syncword
    /// (64 for GMSK, 32 for QPSK).
    #[serde(default)]
    pub window_len: Option<usize>,
    pub fft_len: usize,
    pub search_interval_bits: usize,
    pub threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window_len: None,
            fft_len: DET_FFT_LEN,
            search_interval_bits: 48,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    /// Coarse CFO in OBW channels (signed offset from the bin-0 frequency).
    pub channel_index: i64,
    /// Header start in output samples (half symbols) from input sample 0.
    pub sample_index: i64,
    /// Remaining offset from the channel centre, `|fine| ≤ Rs / 2`.
    pub fine_cfo_hz: f64,
    pub peak_power: f64,
    /// Peak power over the median peak power across bins.
    pub score: f64,
}

impl DetectionEvent {
    /// Carrier estimate relative to the bin-0 frequency.
    pub fn cfo_hz(&self) -> f64 {
        self.channel_index as f64 * SYMBOL_RATE_HZ + self.fine_cfo_hz
    }

    /// Header start in symbols from input sample 0.
    pub fn start_symbols(&self) -> f64 {
        self.sample_index as f64 / 2.0
    }
}

/// Correlation peaks of one bin: per lag the peak power and its signed FFT bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTrace {
    pub power: Vec<f64>,
    pub fine_bin: Vec<i64>,
}

pub struct HeaderDetector {
    cfg: DetectorConfig,
    chan: ChannelizerConfig,
    modulation: Modulation,
    taps: Vec<C64>,
    /// Header start to the first correlated lag, in symbols.
    sync_offset_symbols: f64,
    fft: Arc<dyn Fft<f64>>,
    interval_frames: usize,
}

impl HeaderDetector {
    pub fn new(
        modulation: Modulation,
        chan: &ChannelizerConfig,
        cfg: &DetectorConfig,
        modem: &ModemConfig,
    ) -> Result<Self> {
        if cfg.fft_len == 0 || !(cfg.threshold.is_finite() && cfg.threshold > 0.0) {
            return Err(Error::Config("detector needs a positive FFT length and threshold".into()));
        }
        let period = modem.symbol_periods(modulation);
        let frames_per_bit = 2 * period / modulation.bits_per_symbol();
        let sync_frames = crate::txchain::SYNCWORD_BITS * frames_per_bit;
        let n = cfg.window_len.unwrap_or(sync_frames);
        if n == 0 || n > sync_frames + 2 * TEMPLATE_GUARD_SYMBOLS {
            return Err(Error::Config(format!(
                "correlator length {n} outside 1..={} for {modulation}",
                sync_frames + 2 * TEMPLATE_GUARD_SYMBOLS
            )));
        }

        // modulate the known prefix at the channelizer input rate and cut the
        // bin-0 output where the syncword starts
        let mk = chan.fft_len();
        let prefix = modem.modulate_block(&header_prefix_bits(), modulation, mk)?;
        let guard = TEMPLATE_GUARD_SYMBOLS * mk;
        let mut buf = vec![C64::new(0.0, 0.0); guard];
        buf.extend(prefix);
        buf.extend(std::iter::repeat_n(C64::new(0.0, 0.0), guard));
        let sync_start = (PREAMBLE.len() / modulation.bits_per_symbol() * period) as f64;
        let f0 = chan.frame_at(TEMPLATE_GUARD_SYMBOLS as f64 + sync_start).round() as i64;
        let mut ch = Channelizer::new(chan.clone())?;
        let taps = ch.frames(&buf, f0, n).iter().map(|f| f.bins[0].conj()).collect();
        let sync_offset_symbols = chan.frame_time_symbols(f0) - TEMPLATE_GUARD_SYMBOLS as f64;

        Ok(HeaderDetector {
            cfg: cfg.clone(),
            chan: chan.clone(),
            modulation,
            taps,
            sync_offset_symbols,
            fft: FftPlanner::new().plan_fft_forward(cfg.fft_len),
            interval_frames: cfg.search_interval_bits * frames_per_bit,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn template_len(&self) -> usize {
        self.taps.len()
    }

    /// Fine CFO step, `2 Rs / M_det`.
    pub fn fine_resolution_hz(&self) -> f64 {
        self.chan.output_rate_hz() / self.cfg.fft_len as f64
    }

    /// Correlates one bin's series at every lag that fits.
    pub fn correlate(&self, series: &[C64]) -> CorrelationTrace {
        let n = self.taps.len();
        let m = self.cfg.fft_len;
        let lags = (series.len() + 1).saturating_sub(n);
        let mut buf = vec![C64::new(0.0, 0.0); m];
        let mut scratch = vec![C64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = Vec::with_capacity(lags);
        let mut fine_bin = Vec::with_capacity(lags);
        for f in 0..lags {
            buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for (k, (c, r)) in self.taps.iter().zip(&series[f..f + n]).enumerate() {
                buf[k % m] += c * r;
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let (best, p) = buf
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm_sqr()))
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            power.push(p);
            fine_bin.push(if best >= m / 2 { best as i64 - m as i64 } else { best as i64 });
        }
        CorrelationTrace { power, fine_bin }
    }

    /// Runs the detector over every bin of the frames held in `store`.
    pub fn detect(&self, store: &BlockStore) -> Result<Vec<DetectionEvent>> {
        if store.config() != &self.chan {
            return Err(Error::Config("block store and detector use different channelizers".into()));
        }
        let held = store.held();
        let len = (held.end - held.start) as usize;
        let mk = self.chan.fft_len() as i64;
        // rows in ascending signed offset so that adjacent rows are adjacent bins
        let offsets: Vec<i64> = (-mk / 2..mk - mk / 2).collect();
        let traces: Vec<CorrelationTrace> = crate::par::map_indexed(offsets.len(), |r| {
            let bin = self.chan.obw_bin(offsets[r]);
            let series = store.fetch_time_series(bin, held.start, len).expect("range is held");
            self.correlate(&series)
        });
        Ok(self.pick_peaks(&offsets, &traces, held.start))
    }

    /// Channelizes a signal and detects headers in it.
    pub fn detect_signal(&self, sig: &IqSignal) -> Result<Vec<DetectionEvent>> {
        let frames = channelize(sig, &self.chan)?;
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        let mut store = BlockStore::new(self.chan.clone(), frames.len())?;
        store.store_frames(&frames)?;
        self.detect(&store)
    }

    fn pick_peaks(&self, offsets: &[i64], traces: &[CorrelationTrace], first_frame: i64) -> Vec<DetectionEvent> {
        let pooled: Vec<f64> = traces.iter().flat_map(|t| t.power.iter().copied()).collect();
        let floor_median = median(&pooled);
        let argmax: Vec<Vec<usize>> = traces
            .iter()
            .map(|t| window_argmax(&t.power, self.interval_frames))
            .collect();
        let mut events = Vec::new();
        for (row, trace) in traces.iter().enumerate() {
            let floor = self.cfg.threshold * floor_median;
            for (f, &p) in trace.power.iter().enumerate() {
                if !(p >= floor && p > 0.0) || argmax[row][f] != f {
                    continue;
                }
                let beaten = [row.wrapping_sub(1), row + 1].iter().any(|&nb| {
                    traces.get(nb).is_some_and(|t| {
                        let g = argmax[nb][f];
                        let q = t.power[g];
                        // total order: power, then earlier lag, then lower bin
                        q > p || (q == p && (g < f || (g == f && nb < row)))
                    })
                });
                if beaten {
                    continue;
                }
                events.push(self.event(offsets[row], first_frame + f as i64, p, trace.fine_bin[f], floor_median));
            }
        }
        events.sort_by(|a, b| {
            (a.sample_index, a.channel_index)
                .cmp(&(b.sample_index, b.channel_index))
        });
        events
    }

    fn event(&self, offset: i64, frame: i64, power: f64, fine_bin: i64, median: f64) -> DetectionEvent {
        let total_hz = offset as f64 * SYMBOL_RATE_HZ + fine_bin as f64 * self.fine_resolution_hz();
        let channel_index = (total_hz / SYMBOL_RATE_HZ).round() as i64;
        let start = self.chan.frame_time_symbols(frame) - self.sync_offset_symbols;
        DetectionEvent {
            channel_index,
            sample_index: (2.0 * start).round() as i64,
            fine_cfo_hz: total_hz - channel_index as f64 * SYMBOL_RATE_HZ,
            peak_power: power,
            score: if median > 0.0 { power / median } else { f64::INFINITY },
        }
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// For each index, the position of the largest value within `±w`
/// (earliest on ties).
fn window_argmax(values: &[f64], w: usize) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut r = 0;
    for f in 0..n {
        let hi = (f + w).min(n - 1);
        while r <= hi {
            while dq.back().is_some_and(|&b| values[b] < values[r]) {
                dq.pop_back();
            }
            dq.push_back(r);
            r += 1;
        }
        let lo = f.saturating_sub(w);
        while dq.front().is_some_and(|&b| b < lo) {
            dq.pop_front();
        }
        out.push(dq[0]);
    }
    out
}
