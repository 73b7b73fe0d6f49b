//! Packet reception: header search and decode, fragment synchronization and
//! payload decode on top of a [`Frontend`].
//!
//! Header candidates from the detector are tried in order of score. Each is
//! demapped under a few timing hypotheses around the detected start, with a
//! carrier search over frequency and Doppler rate; the best hypothesis goes
//! through the header decoder and the CRC decides. The first header that
//! passes fixes the hopping plan, the packet start and an initial Doppler
//! track, which the [`Synchronizer`] refines fragment by fragment.

use serde::{Deserialize, Serialize};

use super::carrier::{estimate, CarrierSearch, Track};
use super::decode::{decode_header_soft, decode_payload_soft};
use super::demap::{decision_points, demap, CarrierMode};
use super::frontend::{Candidate, Frontend};
use crate::detector::{DetectionEvent, DetectorConfig, HeaderDetector};
use crate::error::{Error, Result};
use crate::modem::ModemConfig;
use crate::params::{fragment_count, DataRateProfile, SYMBOL_RATE_HZ};
use crate::txchain::{
    generate_hopping_plan, header_prefix_bits, Modulation, Phdr, FRAGMENT_BLOCK_BITS, HEADER_BLOCK_BITS, PREAMBLE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxConfig {
    pub profile: DataRateProfile,
    /// Modulation to look for; `None` tries GMSK, then QPSK.
    #[serde(default)]
    pub modulation: Option<Modulation>,
    #[serde(default)]
    pub modem: ModemConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    /// Largest Doppler rate searched on a header, Hz/s. Zero assumes a
    /// constant carrier offset.
    pub max_doppler_rate: f64,
    /// Timing hypotheses cover this many symbols either side of a detection.
    pub timing_span_symbols: f64,
    /// Residual frequency searched around the detector's estimate on a header, Hz.
    pub header_freq_span_hz: f64,
    /// Residual frequency searched on a fragment before and after the
    /// Doppler line has been refitted, Hz.
    pub fragment_freq_span_hz: f64,
    pub tracked_freq_span_hz: f64,
    /// Header candidates tried per capture, strongest first.
    pub max_candidates: usize,
}

impl RxConfig {
    pub fn new(profile: DataRateProfile) -> Self {
        RxConfig {
            profile,
            modulation: None,
            modem: ModemConfig::default(),
            detector: DetectorConfig::default(),
            max_doppler_rate: 600.0,
            timing_span_symbols: 0.75,
            header_freq_span_hz: 40.0,
            fragment_freq_span_hz: 40.0,
            tracked_freq_span_hz: 12.0,
            max_candidates: 8,
        }
    }

    fn modulations(&self) -> Vec<Modulation> {
        match self.modulation {
            Some(m) => vec![m],
            None => vec![Modulation::Gmsk, Modulation::Qpsk],
        }
    }

    /// Header and fragment durations in seconds.
    fn block_durations(&self, modulation: Modulation) -> (f64, f64) {
        (
            self.modem.block_periods(HEADER_BLOCK_BITS, modulation) as f64 / SYMBOL_RATE_HZ,
            self.modem.block_periods(FRAGMENT_BLOCK_BITS, modulation) as f64 / SYMBOL_RATE_HZ,
        )
    }
}

/// Perfect synchronization: where the packet is and what the carrier does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSync {
    /// Start of the first header replica, seconds.
    pub start_s: f64,
    /// Carrier relative to each block's nominal channel centre.
    pub track: Track,
    /// Plan channels of the header replicas.
    pub header_channels: Vec<u32>,
    /// Delay the channel carriers went through along with the baseband.
    /// A full-band capture delayed by `τ` sees each block's carrier at
    /// channel `f` turned by `-2π f τ`; per-channel captures do not.
    #[serde(default)]
    pub carrier_delay_s: f64,
}

impl OracleSync {
    /// The carrier of a block sent in the channel at `channel_freq_hz`.
    pub fn track_for(&self, channel_freq_hz: f64) -> Track {
        Track {
            phase: self.track.phase - 2.0 * std::f64::consts::PI * channel_freq_hz * self.carrier_delay_s,
            ..self.track
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub candidates_tried: usize,
    pub header_start_s: Option<f64>,
    pub header_quality: Option<f64>,
    /// Which replica the accepted header was.
    pub replica: Option<usize>,
    /// Doppler track after the last fragment.
    pub doppler: Option<Track>,
    /// Synchronizer carrier at each fragment's midpoint once that fragment
    /// has been folded in, Hz from its nominal channel.
    pub fragment_freq_hz: Vec<f64>,
    pub fragment_quality: Vec<f64>,
    /// Mean soft magnitude per fragment.
    pub fragment_soft_mean: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PacketResult {
    pub phdr: Option<Phdr>,
    pub payload: Option<Vec<u8>>,
    pub header_crc_ok: bool,
    pub payload_crc_ok: bool,
    pub events_used: Vec<DetectionEvent>,
    pub diagnostics: Diagnostics,
}

/// A decoded header on the absolute axes.
#[derive(Debug, Clone, PartialEq)]
pub struct HeaderFix {
    pub phdr: Phdr,
    pub modulation: Modulation,
    pub start_s: f64,
    /// Centre of the channel the header was seen in, Hz.
    pub channel_freq_hz: f64,
    /// Carrier relative to `channel_freq_hz`.
    pub track: Track,
    pub quality: f64,
}

fn power_of(modulation: Modulation) -> u32 {
    match modulation {
        Modulation::Gmsk => 2,
        Modulation::Qpsk => 4,
    }
}

/// Demodulates and decodes the header behind one detector candidate.
pub fn decode_header(fe: &dyn Frontend, cand: &Candidate, modulation: Modulation, cfg: &RxConfig) -> Result<HeaderFix> {
    let period = cfg.modem.symbol_periods(modulation);
    let n_periods = cfg.modem.block_periods(HEADER_BLOCK_BITS, modulation);
    let step = fe.timing_step_s();
    let span = (cfg.timing_span_symbols / SYMBOL_RATE_HZ / step).round() as i64;
    let coarse = CarrierSearch::rate_grid(cfg.header_freq_span_hz, cfg.max_doppler_rate, 50.0);

    let mut hyps = Vec::new();
    for k in -span..=span {
        let t0 = cand.start_s + k as f64 * step;
        let base = Track {
            freq_hz: cand.cfo_hz,
            rate_hz_per_s: 0.0,
            t_ref_s: t0,
            phase: 0.0,
        };
        let Ok(block) = fe.block_series(cand.channel_freq_hz, &base, t0, n_periods) else {
            continue;
        };
        let (points, t_first, dt) = decision_points(&block, modulation, period, HEADER_BLOCK_BITS)?;
        let est = estimate(&points, t_first, dt, power_of(modulation), &coarse);
        hyps.push((est.quality, t0, base, block, est.track.rate_hz_per_s));
    }
    if hyps.is_empty() {
        return Err(Error::Truncated {
            needed: n_periods,
            available: 0,
        });
    }
    hyps.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));

    let prefix = header_prefix_bits();
    for (_, t0, base, block, rate) in hyps.into_iter().take(3) {
        let fine = CarrierSearch {
            freq_span_hz: cfg.header_freq_span_hz,
            rates: (-50..=50)
                .map(|i| rate + f64::from(i))
                .filter(|r| r.abs() <= cfg.max_doppler_rate)
                .collect(),
        };
        let d = demap(&block, modulation, &cfg.modem, HEADER_BLOCK_BITS, &CarrierMode::Search(fine), &prefix)?;
        if let Ok(phdr) = decode_header_soft(&d.soft) {
            if phdr.modulation != modulation {
                continue;
            }
            let residual = Track {
                t_ref_s: t0,
                ..d.residual
            };
            return Ok(HeaderFix {
                phdr,
                modulation,
                start_s: t0,
                channel_freq_hz: cand.channel_freq_hz,
                track: base.plus(&residual),
                quality: d.quality,
            });
        }
    }
    Err(Error::CrcFail)
}

/// Linear Doppler track refitted from per-block carrier estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Synchronizer {
    track: Track,
    points: Vec<(f64, f64)>,
    fitted: bool,
}

/// Points needed before the rate is refitted, and the time they must span.
const FIT_MIN_POINTS: usize = 3;
const FIT_MIN_SPAN_S: f64 = 0.3;

impl Synchronizer {
    /// Starts from a header track; `t_mid_s` is the header midpoint.
    pub fn new(track: Track, t_mid_s: f64) -> Self {
        Synchronizer {
            track,
            points: vec![(t_mid_s, track.freq_at(t_mid_s))],
            fitted: false,
        }
    }

    pub fn track(&self) -> &Track {
        &self.track
    }

    /// True once the line has been refitted from enough points.
    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    /// Adds a carrier estimate and refits the line when the points allow.
    pub fn update(&mut self, t_s: f64, freq_hz: f64) {
        self.points.push((t_s, freq_hz));
        let n = self.points.len() as f64;
        let (t_min, t_max) = self
            .points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        if self.points.len() < FIT_MIN_POINTS || t_max - t_min < FIT_MIN_SPAN_S {
            return;
        }
        let tm = self.points.iter().map(|p| p.0).sum::<f64>() / n;
        let fm = self.points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = self.points.iter().map(|p| (p.0 - tm).powi(2)).sum();
        let sxy: f64 = self.points.iter().map(|p| (p.0 - tm) * (p.1 - fm)).sum();
        let rate = sxy / sxx;
        // keep phase continuity at the new reference
        self.track = Track {
            freq_hz: fm,
            rate_hz_per_s: rate,
            t_ref_s: tm,
            phase: self.track.phase_at(tm),
        };
        self.fitted = true;
    }
}

/// Fragments of a packet whose header replica `replica` starts at `header_start_s`.
fn fragment_layout(
    phdr: &Phdr,
    cfg: &RxConfig,
    modulation: Modulation,
    replica: usize,
    header_start_s: f64,
) -> Result<(Vec<u32>, Vec<f64>)> {
    let n_h = cfg.profile.n_header_replicas as usize;
    let n_f = fragment_count(usize::from(phdr.payload_length), phdr.coding_rate)?;
    let plan = generate_hopping_plan(phdr.hopping_seq_id, &cfg.profile, n_h + n_f)?;
    let (t_h, t_f) = cfg.block_durations(modulation);
    let t_pkt = header_start_s - replica as f64 * t_h;
    let starts = (0..n_f).map(|j| t_pkt + n_h as f64 * t_h + j as f64 * t_f).collect();
    Ok((plan.channel_indices, starts))
}

/// Demodulates every fragment with the synchronizer running and decodes the payload.
fn decode_payload_tracked(
    fe: &dyn Frontend,
    fix: &HeaderFix,
    replica: usize,
    cfg: &RxConfig,
    diag: &mut Diagnostics,
) -> Result<Vec<u8>> {
    let modulation = fix.modulation;
    let (plan, starts) = fragment_layout(&fix.phdr, cfg, modulation, replica, fix.start_s)?;
    let n_h = cfg.profile.n_header_replicas as usize;
    let nominal = cfg.profile.channel_offset_hz(plan[replica]);
    // carrier relative to the nominal channel rather than the detected one
    let track = Track {
        freq_hz: fix.track.freq_hz + fix.channel_freq_hz - nominal,
        ..fix.track
    };
    let (t_h, t_f) = cfg.block_durations(modulation);
    let mut sync = Synchronizer::new(track, fix.start_s + 0.5 * t_h);
    let n_periods = cfg.modem.block_periods(FRAGMENT_BLOCK_BITS, modulation);

    let mut soft = Vec::with_capacity(starts.len());
    diag.fragment_freq_hz.clear();
    diag.fragment_quality.clear();
    diag.fragment_soft_mean.clear();
    for (j, &t0) in starts.iter().enumerate() {
        let channel = cfg.profile.channel_offset_hz(plan[n_h + j]);
        let span = if sync.is_fitted() {
            cfg.tracked_freq_span_hz
        } else {
            cfg.fragment_freq_span_hz
        };
        let block = match fe.block_series(channel, sync.track(), t0, n_periods) {
            Ok(b) => b,
            Err(_) => return Err(Error::MissingFragments { index: j }),
        };
        let d = demap(
            &block,
            modulation,
            &cfg.modem,
            FRAGMENT_BLOCK_BITS,
            &CarrierMode::Search(CarrierSearch::fixed_rate(span, 0.0)),
            &PREAMBLE,
        )?;
        let t_mid = t0 + 0.5 * t_f;
        let freq = sync.track().freq_at(t_mid) + d.residual.freq_at(0.5 * t_f);
        sync.update(t_mid, freq);
        diag.fragment_freq_hz.push(sync.track().freq_at(t_mid));
        diag.fragment_quality.push(d.quality);
        diag.fragment_soft_mean.push(d.soft.iter().map(|s| s.abs()).sum::<f64>() / d.soft.len().max(1) as f64);
        soft.push(d.soft);
    }
    diag.doppler = Some(*sync.track());
    decode_payload_soft(&soft, &fix.phdr)
}

/// Replicas whose plan channel could hold the header seen at `freq_hz`,
/// nearest first.
fn replica_order(phdr: &Phdr, cfg: &RxConfig, freq_hz: f64) -> Result<Vec<usize>> {
    let n_h = cfg.profile.n_header_replicas as usize;
    let n_f = fragment_count(usize::from(phdr.payload_length), phdr.coding_rate)?;
    let plan = generate_hopping_plan(phdr.hopping_seq_id, &cfg.profile, n_h + n_f)?;
    let mut order: Vec<(usize, f64)> = (0..n_h)
        .map(|i| (i, (cfg.profile.channel_offset_hz(plan.channel_indices[i]) - freq_hz).abs()))
        .filter(|(_, d)| *d <= cfg.profile.grid_hz / 2.0 + SYMBOL_RATE_HZ)
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(order.into_iter().map(|(i, _)| i).collect())
}

/// Full reception: detect, decode the header, then synchronize and decode
/// the payload. Never fails on signal content; problems land in the result.
pub fn receive_packet(fe: &dyn Frontend, cfg: &RxConfig) -> Result<PacketResult> {
    let mut result = PacketResult::default();
    for modulation in cfg.modulations() {
        let detector = HeaderDetector::new(modulation, fe.channelizer(), &cfg.detector, &cfg.modem)?;
        let mut fix: Option<(HeaderFix, DetectionEvent)> = None;
        let mut tried = 0;
        // noise is white, so raw peak power ranks candidates across bins;
        // the per-bin score would favour quiet bins
        let mut try_capture = |found: &[Candidate]| {
            let mut order: Vec<&Candidate> = found.iter().collect();
            order.sort_by(|a, b| {
                b.event
                    .peak_power
                    .total_cmp(&a.event.peak_power)
                    .then(a.event.sample_index.cmp(&b.event.sample_index))
            });
            for cand in order.into_iter().take(cfg.max_candidates) {
                tried += 1;
                if let Ok(f) = decode_header(fe, cand, modulation, cfg) {
                    fix = Some((f, cand.event.clone()));
                    return true;
                }
            }
            false
        };
        fe.candidates(&detector, &mut try_capture)?;
        result.diagnostics.candidates_tried += tried;
        let Some((fix, event)) = fix else {
            continue;
        };

        result.phdr = Some(fix.phdr);
        result.header_crc_ok = true;
        result.events_used.push(event);
        result.diagnostics.header_start_s = Some(fix.start_s);
        result.diagnostics.header_quality = Some(fix.quality);
        let seen_at = fix.channel_freq_hz + fix.track.freq_at(fix.start_s);
        for replica in replica_order(&fix.phdr, cfg, seen_at)? {
            match decode_payload_tracked(fe, &fix, replica, cfg, &mut result.diagnostics) {
                Ok(payload) => {
                    result.diagnostics.replica = Some(replica);
                    result.diagnostics.error = None;
                    result.payload = Some(payload);
                    result.payload_crc_ok = true;
                    return Ok(result);
                }
                Err(e) => result.diagnostics.error = Some(e.to_string()),
            }
        }
        return Ok(result);
    }
    Ok(result)
}

/// Reception with timing, channels and carrier handed over by an oracle.
/// The header replicas are tried in order; the first CRC pass wins and its
/// hopping plan locates the fragments.
pub fn receive_with_oracle(fe: &dyn Frontend, oracle: &OracleSync, cfg: &RxConfig) -> Result<PacketResult> {
    let mut result = PacketResult::default();
    let known = CarrierMode::Known(Track::default());
    for modulation in cfg.modulations() {
        let (t_h, t_f) = cfg.block_durations(modulation);
        let header_periods = cfg.modem.block_periods(HEADER_BLOCK_BITS, modulation);
        let mut phdr = None;
        for (i, &ch) in oracle.header_channels.iter().enumerate() {
            let t0 = oracle.start_s + i as f64 * t_h;
            let freq = cfg.profile.channel_offset_hz(ch);
            let Ok(block) = fe.block_series(freq, &oracle.track_for(freq), t0, header_periods) else {
                continue;
            };
            let d = demap(&block, modulation, &cfg.modem, HEADER_BLOCK_BITS, &known, &[])?;
            if let Ok(p) = decode_header_soft(&d.soft) {
                if p.modulation == modulation {
                    phdr = Some(p);
                    result.diagnostics.replica = Some(i);
                    break;
                }
            }
        }
        let Some(phdr) = phdr else {
            continue;
        };
        result.phdr = Some(phdr);
        result.header_crc_ok = true;
        result.diagnostics.header_start_s = Some(oracle.start_s);

        let (plan, _) = fragment_layout(&phdr, cfg, modulation, 0, oracle.start_s)?;
        let n_h = cfg.profile.n_header_replicas as usize;
        let n_periods = cfg.modem.block_periods(FRAGMENT_BLOCK_BITS, modulation);
        let mut soft = Vec::new();
        for (j, &ch) in plan[n_h..].iter().enumerate() {
            let t0 = oracle.start_s + n_h as f64 * t_h + j as f64 * t_f;
            let freq = cfg.profile.channel_offset_hz(ch);
            let block = match fe.block_series(freq, &oracle.track_for(freq), t0, n_periods) {
                Ok(b) => b,
                Err(_) => break,
            };
            soft.push(demap(&block, modulation, &cfg.modem, FRAGMENT_BLOCK_BITS, &known, &[])?.soft);
        }
        match decode_payload_soft(&soft, &phdr) {
            Ok(p) => {
                result.payload = Some(p);
                result.payload_crc_ok = true;
            }
            Err(e) => result.diagnostics.error = Some(e.to_string()),
        }
        return Ok(result);
    }
    Ok(result)
}
