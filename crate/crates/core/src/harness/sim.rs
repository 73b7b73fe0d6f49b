//! Miss-detection and packet-error-rate sweeps.
//!
//! Every trial draws its randomness from [`derive_seed`] over
//! `(snr, doppler, timing, trial)` indices, so a report depends only on the
//! configuration and master seed. Cells that differ only in modulation or
//! search interval reuse the same noise streams.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::link::{narrowband_link, oracle_for};
use super::report::{wilson, CurvePoint, Experiment, SimReport};
use super::seed::derive_seed;
use crate::channel::{add_awgn, apply_doppler, apply_timing_offset, ChannelConfig, DopplerMode};
use crate::detector::{ChannelizerConfig, DetectorConfig, HeaderDetector};
use crate::error::{Error, Result};
use crate::modem::{IqSignal, ModemConfig, Origin, C64, TX_OSF};
use crate::params::{DataRateProfile, SYMBOL_RATE_HZ};
use crate::rxchain::decode::decode_header_soft;
use crate::rxchain::demap::{demap, CarrierMode};
use crate::rxchain::frontend::{Frontend, NarrowbandFrontend};
use crate::rxchain::receiver::{receive_with_oracle, RxConfig};
use crate::txchain::{assemble_packet, build_header_block, Modulation, Phdr, HEADER_BLOCK_BITS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub profile: DataRateProfile,
    pub modulations: Vec<Modulation>,
    pub snr_grid_db: Vec<f64>,
    pub doppler_rates: Vec<f64>,
    pub doppler_mode: DopplerMode,
    pub timing_offsets: Vec<u8>,
    pub search_interval_bits: Vec<usize>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub payload_len: usize,
    pub modem: ModemConfig,
    /// Detector settings; the search interval is swept separately.
    pub detector: DetectorConfig,
    /// Silence around a header in the miss-detection capture, symbols.
    pub guard_symbols: usize,
    /// PER sweeps stop after the header decoder.
    pub header_only: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            profile: DataRateProfile::simulation(),
            modulations: vec![Modulation::Gmsk, Modulation::Qpsk],
            snr_grid_db: (-10..=12).map(f64::from).collect(),
            doppler_rates: vec![0.0, 200.0, 400.0],
            doppler_mode: DopplerMode::Rate,
            timing_offsets: vec![0],
            search_interval_bits: vec![12, 24, 48],
            n_trials: 1000,
            master_seed: 1,
            payload_len: 32,
            modem: ModemConfig::default(),
            detector: DetectorConfig::default(),
            guard_symbols: 16,
            header_only: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1");
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("SNR grid must be non-empty and strictly increasing");
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) || self.doppler_rates.iter().any(|d| !d.is_finite()) {
            return bad("SNR and Doppler values must be finite");
        }
        if self.modulations.is_empty() || self.doppler_rates.is_empty() || self.timing_offsets.is_empty() {
            return bad("modulation, Doppler and timing lists must be non-empty");
        }
        if self.timing_offsets.iter().any(|&k| k >= 8) {
            return bad("timing offsets are eighths of a symbol, 0..8");
        }
        if self.search_interval_bits.is_empty() {
            return bad("search interval list must be non-empty");
        }
        self.profile.validate()?;
        self.profile.check_payload_len(self.payload_len)
    }

    fn channel(&self, snr_db: f64, doppler: f64, timing: u8, seed: u64) -> ChannelConfig {
        let (rate, cfo) = match self.doppler_mode {
            DopplerMode::Rate => (doppler, 0.0),
            DopplerMode::Offset => (0.0, doppler),
        };
        ChannelConfig {
            snr_db: Some(snr_db),
            doppler_rate: rate,
            initial_cfo_hz: cfo,
            timing_offset_eighths: timing,
            rng_seed: seed,
        }
    }
}

/// One channel condition; trials are seeded from its grid indices.
#[derive(Debug, Clone, Copy)]
struct Condition {
    snr_db: f64,
    doppler: f64,
    timing: u8,
    path: [u64; 3],
}

fn conditions(cfg: &SimConfig) -> Vec<Condition> {
    let mut out = Vec::new();
    for (di, &doppler) in cfg.doppler_rates.iter().enumerate() {
        for (ti, &timing) in cfg.timing_offsets.iter().enumerate() {
            for (si, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
                out.push(Condition {
                    snr_db,
                    doppler,
                    timing,
                    path: [si as u64, di as u64, ti as u64],
                });
            }
        }
    }
    out
}

fn trial_seed(cfg: &SimConfig, c: &Condition, trial: usize) -> u64 {
    derive_seed(cfg.master_seed, &[c.path[0], c.path[1], c.path[2], trial as u64])
}

fn cell_seed(cfg: &SimConfig, c: &Condition) -> u64 {
    derive_seed(cfg.master_seed, &c.path)
}

/// A random valid PHDR for the configured profile.
fn random_phdr(cfg: &SimConfig, modulation: Modulation, rng: &mut ChaCha8Rng) -> Phdr {
    Phdr {
        payload_length: rng.random_range(1..=cfg.profile.max_payload_bytes.min(255)) as u8,
        coding_rate: cfg.profile.coding_rate,
        grid: crate::txchain::Grid::for_profile(&cfg.profile),
        hopping_seq_id: rng.random_range(0..512),
        modulation,
    }
}

/// Runs `f` over every `(cell, trial)` pair and returns per-cell results in
/// order. The flat index keeps the work balanced across threads.
fn run_cells<R: Send, F>(n_cells: usize, n_trials: usize, f: F) -> Vec<Vec<R>>
where
    F: Fn(usize, usize) -> R + Sync + Send,
{
    let flat = crate::par::map_indexed(n_cells * n_trials, |i| f(i / n_trials, i % n_trials));
    let mut out: Vec<Vec<R>> = (0..n_cells).map(|_| Vec::with_capacity(n_trials)).collect();
    for (i, r) in flat.into_iter().enumerate() {
        out[i / n_trials].push(r);
    }
    out
}

/// Single-header capture through the channel at 8 samples per symbol, with
/// the header starting `guard` symbols in.
fn header_capture(bits: &[u8], modulation: Modulation, cfg: &SimConfig, ch: &ChannelConfig) -> Result<IqSignal> {
    let tx = cfg.modem.modulate_block(bits, modulation, TX_OSF)?;
    let power = tx.iter().map(|s| s.norm_sqr()).sum::<f64>() / tx.len() as f64;
    let g = cfg.guard_symbols * TX_OSF;
    let mut samples = vec![C64::new(0.0, 0.0); g];
    samples.extend(tx);
    samples.extend(std::iter::repeat_n(C64::new(0.0, 0.0), g));
    let sig = IqSignal::new(samples, TX_OSF as f64 * SYMBOL_RATE_HZ, Origin::Tx);
    // Doppler time zero at the header start
    let t0 = -(cfg.guard_symbols as f64) / SYMBOL_RATE_HZ;
    let mut sig = apply_doppler(&sig, ch.doppler_rate, ch.initial_cfo_hz, t0);
    if ch.timing_offset_eighths > 0 {
        sig = apply_timing_offset(&sig, usize::from(ch.timing_offset_eighths))?;
    }
    Ok(add_awgn(&sig, ch.snr_db, ch.rng_seed, Some(power)))
}

/// Miss-detection sweep: is a header found at the right time and channel?
///
/// A miss is a trial with no detection event in channel 0 within one output
/// sample of the true header start.
pub fn run_miss_detection_sweep(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let clock = Instant::now();
    let chan = ChannelizerConfig::narrowband();
    let conds = conditions(cfg);
    let mut detectors = Vec::new();
    for &m in &cfg.modulations {
        for &bits in &cfg.search_interval_bits {
            let det_cfg = DetectorConfig {
                search_interval_bits: bits,
                ..cfg.detector.clone()
            };
            detectors.push((m, bits, HeaderDetector::new(m, &chan, &det_cfg, &cfg.modem)?));
        }
    }
    let n_cells = detectors.len() * conds.len();
    let outcomes = run_cells(n_cells, cfg.n_trials, |cell, trial| -> Result<bool> {
        let (m, _, det) = &detectors[cell / conds.len()];
        let c = &conds[cell % conds.len()];
        let seed = trial_seed(cfg, c, trial);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phdr = random_phdr(cfg, *m, &mut rng);
        let header = build_header_block(&phdr)?;
        let ch = cfg.channel(c.snr_db, c.doppler, c.timing, rng.random());
        let sig = header_capture(&header.bits, *m, cfg, &ch)?;
        let truth = 2.0 * (cfg.guard_symbols as f64 + f64::from(c.timing) / 8.0);
        let events = det.detect_signal(&sig)?;
        let hit = events
            .iter()
            .any(|e| e.channel_index == 0 && (e.sample_index as f64 - truth).abs() <= 1.0);
        Ok(!hit)
    });

    let mut points = Vec::with_capacity(n_cells);
    for (cell, trials) in outcomes.into_iter().enumerate() {
        let (m, bits, _) = &detectors[cell / conds.len()];
        let c = &conds[cell % conds.len()];
        let mut misses = 0u64;
        for t in trials {
            misses += u64::from(t?);
        }
        let n = cfg.n_trials as u64;
        let (lo, hi) = wilson(misses, n);
        points.push(CurvePoint {
            modulation: *m,
            search_interval_bits: Some(*bits),
            doppler: c.doppler,
            timing_offset: c.timing,
            snr_db: c.snr_db,
            trials: n,
            misses: Some(misses),
            p_miss: Some(misses as f64 / n as f64),
            p_miss_lo: Some(lo),
            p_miss_hi: Some(hi),
            seed: cell_seed(cfg, c),
            ..CurvePoint::default()
        });
    }
    Ok(SimReport {
        experiment: Experiment::MissDetection,
        master_seed: cfg.master_seed,
        n_trials: cfg.n_trials as u64,
        wall_time_s: clock.elapsed().as_secs_f64(),
        points,
    })
}

/// Header error and payload error of one packet under perfect synchronization.
fn per_trial(
    cfg: &SimConfig,
    rx: &RxConfig,
    modulation: Modulation,
    c: &Condition,
    seed: u64,
) -> Result<(bool, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payload: Vec<u8> = (0..cfg.payload_len).map(|_| rng.random()).collect();
    let seq = rng.random_range(0..512);
    let pkt = assemble_packet(&cfg.profile, &payload, seq, modulation)?;
    let ch = cfg.channel(c.snr_db, c.doppler, c.timing, rng.random());
    let n_h = cfg.profile.n_header_replicas as usize;
    let oracle = oracle_for(&pkt, n_h, &ch, 0.0);
    if cfg.header_only {
        // only the header hops need to go through the channel
        let mut hops = crate::modem::synthesize_narrowband(&pkt, &cfg.profile, &cfg.modem)?;
        hops.truncate(n_h);
        let hops = super::link::impair_hops(&hops, &ch)?;
        let fe = NarrowbandFrontend::new(&hops, cfg.profile.n_cf)?;
        let n_periods = cfg.modem.block_periods(HEADER_BLOCK_BITS, modulation);
        let t_h = n_periods as f64 / SYMBOL_RATE_HZ;
        let known = CarrierMode::Known(crate::rxchain::carrier::Track::default());
        let ok = oracle.header_channels.iter().enumerate().any(|(i, &chn)| {
            let t0 = oracle.start_s + i as f64 * t_h;
            fe.block_series(cfg.profile.channel_offset_hz(chn), &oracle.track, t0, n_periods)
                .and_then(|b| demap(&b, modulation, &cfg.modem, HEADER_BLOCK_BITS, &known, &[]))
                .and_then(|d| decode_header_soft(&d.soft))
                .is_ok_and(|p| p == pkt.phdr)
        });
        return Ok((!ok, !ok));
    }
    let hops = narrowband_link(&pkt, &cfg.profile, &cfg.modem, &ch)?;
    let fe = NarrowbandFrontend::new(&hops, cfg.profile.n_cf)?;
    let res = receive_with_oracle(&fe, &oracle, rx)?;
    let header_ok = res.phdr == Some(pkt.phdr);
    let payload_ok = header_ok && res.payload.as_deref() == Some(&payload[..]);
    Ok((!header_ok, !payload_ok))
}

/// Header and payload PER with oracle synchronization.
pub fn run_per_sweep(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let clock = Instant::now();
    let conds = conditions(cfg);
    let n_cells = cfg.modulations.len() * conds.len();
    let rxs: Vec<RxConfig> = cfg
        .modulations
        .iter()
        .map(|&m| RxConfig {
            modulation: Some(m),
            modem: cfg.modem,
            ..RxConfig::new(cfg.profile.clone())
        })
        .collect();
    let outcomes = run_cells(n_cells, cfg.n_trials, |cell, trial| {
        let mi = cell / conds.len();
        let c = &conds[cell % conds.len()];
        per_trial(cfg, &rxs[mi], cfg.modulations[mi], c, trial_seed(cfg, c, trial))
    });

    let mut points = Vec::with_capacity(n_cells);
    for (cell, trials) in outcomes.into_iter().enumerate() {
        let c = &conds[cell % conds.len()];
        let (mut h, mut p) = (0u64, 0u64);
        for t in trials {
            let (he, pe) = t?;
            h += u64::from(he);
            p += u64::from(pe);
        }
        let n = cfg.n_trials as u64;
        let (hl, hh) = wilson(h, n);
        let (pl, ph) = wilson(p, n);
        points.push(CurvePoint {
            modulation: cfg.modulations[cell / conds.len()],
            search_interval_bits: None,
            doppler: c.doppler,
            timing_offset: c.timing,
            snr_db: c.snr_db,
            trials: n,
            header_errors: Some(h),
            header_per: Some(h as f64 / n as f64),
            header_per_lo: Some(hl),
            header_per_hi: Some(hh),
            payload_errors: Some(p),
            payload_per: Some(p as f64 / n as f64),
            payload_per_lo: Some(pl),
            payload_per_hi: Some(ph),
            seed: cell_seed(cfg, c),
            ..CurvePoint::default()
        });
    }
    Ok(SimReport {
        experiment: Experiment::PacketError,
        master_seed: cfg.master_seed,
        n_trials: cfg.n_trials as u64,
        wall_time_s: clock.elapsed().as_secs_f64(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            snr_grid_db: vec![0.0, 20.0],
            doppler_rates: vec![0.0, 400.0],
            search_interval_bits: vec![48],
            n_trials: 12,
            payload_len: 8,
            ..SimConfig::default()
        }
    }

    #[test]
    fn clean_headers_are_always_found() {
        let mut cfg = small();
        cfg.snr_grid_db = vec![40.0];
        cfg.timing_offsets = (0..8).collect();
        let r = run_miss_detection_sweep(&cfg).unwrap();
        assert_eq!(r.points.len(), 2 * 2 * 8);
        assert!(r.points.iter().all(|p| p.misses == Some(0)), "{:?}", r.points);
    }

    #[test]
    fn per_is_zero_at_high_snr_and_payload_never_beats_header() {
        let r = run_per_sweep(&small()).unwrap();
        for p in &r.points {
            assert!(p.payload_errors >= p.header_errors);
            if p.snr_db > 10.0 {
                assert_eq!(p.payload_errors, Some(0), "{p:?}");
            }
        }
    }

    #[test]
    fn header_only_mode_matches_full_decode_on_headers() {
        let mut cfg = small();
        cfg.snr_grid_db = vec![-2.0, 1.0];
        cfg.doppler_rates = vec![0.0];
        let full = run_per_sweep(&cfg).unwrap();
        cfg.header_only = true;
        let fast = run_per_sweep(&cfg).unwrap();
        for (a, b) in full.points.iter().zip(&fast.points) {
            assert_eq!(a.header_errors, b.header_errors);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let mut cfg = small();
        cfg.snr_grid_db = vec![1.0, 1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.n_trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.timing_offsets = vec![8];
        assert!(cfg.validate().is_err());
    }
}
