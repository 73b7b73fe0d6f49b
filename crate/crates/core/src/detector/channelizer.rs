//! Windowed-FFT channelizer.
//!
//! Frame `f` transforms the input segment starting at sample `f · MK / 2`:
//!
//! `X_m(f) = Σ_{k<N} w_k r_{f·MK/2 + k} e^{-j2πkm/MK}`
//!
//! A window longer than `MK` is folded modulo `MK` before the FFT and a
//! shorter one is zero-extended, which evaluates the same sum. The input runs
//! at `MK · Rs`, so bins are one OBW channel (`Rs`) apart and the half
//! transform hop delivers every bin at two samples per symbol. Bin `m` sits at
//! `m · Rs` Hz in FFT order. The `M` channelizer channels group `K` adjacent
//! bins each; channel `c` (signed) starts at bin `c · K mod MK`.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::{IqSignal, C64};
use crate::params::SYMBOL_RATE_HZ;

/// Symmetric Hann window, `w_k = w_{N-1-k}`.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelizerConfig {
    pub n_channels: usize,
    pub bins_per_channel: usize,
    pub window: Vec<f64>,
}

impl ChannelizerConfig {
    /// Hann-windowed channelizer; `window_len` defaults to two symbols (`2 MK`).
    pub fn new(n_channels: usize, bins_per_channel: usize, window_len: Option<usize>) -> Result<Self> {
        if n_channels == 0 || bins_per_channel == 0 {
            return Err(Error::Config("channelizer needs at least one channel and bin".into()));
        }
        let mk = n_channels * bins_per_channel;
        if !mk.is_multiple_of(2) {
            return Err(Error::Config(format!("FFT length {mk} must be even for a half-length hop")));
        }
        let n = window_len.unwrap_or(2 * mk);
        if n == 0 {
            return Err(Error::Config("window length must be positive".into()));
        }
        Ok(ChannelizerConfig {
            n_channels,
            bins_per_channel,
            window: hann(n),
        })
    }

    /// Four channels, two bins: the single-hop front end at 8 samples per symbol.
    pub fn narrowband() -> Self {
        Self::new(4, 2, None).expect("valid narrowband channelizer")
    }

    pub fn fft_len(&self) -> usize {
        self.n_channels * self.bins_per_channel
    }

    pub fn hop(&self) -> usize {
        self.fft_len() / 2
    }

    pub fn input_rate_hz(&self) -> f64 {
        self.fft_len() as f64 * SYMBOL_RATE_HZ
    }

    pub fn output_rate_hz(&self) -> f64 {
        2.0 * SYMBOL_RATE_HZ
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// First bin of signed channelizer channel `c`.
    pub fn channel_bin(&self, channel: i64) -> usize {
        self.obw_bin(channel * self.bins_per_channel as i64)
    }

    /// Bin holding signed OBW-channel offset `p` (frequency `p · Rs`).
    pub fn obw_bin(&self, offset: i64) -> usize {
        offset.rem_euclid(self.fft_len() as i64) as usize
    }

    /// Signed OBW-channel offset of bin `m`.
    pub fn bin_offset(&self, bin: usize) -> i64 {
        let mk = self.fft_len() as i64;
        if (bin as i64) >= mk / 2 {
            bin as i64 - mk
        } else {
            bin as i64
        }
    }

    /// Signed frequency of bin `m` in Hz.
    pub fn bin_freq_hz(&self, bin: usize) -> f64 {
        self.bin_offset(bin) as f64 * SYMBOL_RATE_HZ
    }

    /// Centre time of frame `f`, in symbols from input sample 0.
    pub fn frame_time_symbols(&self, frame: i64) -> f64 {
        (frame as f64 * self.hop() as f64 + (self.window_len() as f64 - 1.0) / 2.0)
            / self.fft_len() as f64
    }

    /// Fractional frame whose centre falls at `t` symbols; inverse of
    /// [`frame_time_symbols`](Self::frame_time_symbols).
    pub fn frame_at(&self, t_symbols: f64) -> f64 {
        (t_symbols * self.fft_len() as f64 - (self.window_len() as f64 - 1.0) / 2.0) / self.hop() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.window.len();
        for k in 0..n / 2 {
            if (self.window[k] - self.window[n - 1 - k]).abs() > 1e-12 {
                return Err(Error::Config("channelizer window must be symmetric".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    /// Frame index: output sample count at two samples per symbol.
    pub time_index: i64,
    pub bins: Vec<C64>,
}

/// Streaming channelizer with a planned FFT.
pub struct Channelizer {
    cfg: ChannelizerConfig,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl Channelizer {
    pub fn new(cfg: ChannelizerConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_len());
        let scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Ok(Channelizer { cfg, fft, scratch })
    }

    pub fn config(&self) -> &ChannelizerConfig {
        &self.cfg
    }

    /// One frame from the segment starting at `start` (samples outside are zero).
    pub fn frame(&mut self, samples: &[C64], start: i64, out: &mut [C64]) {
        let mk = self.cfg.fft_len();
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (k, &w) in self.cfg.window.iter().enumerate() {
            let idx = start + k as i64;
            if idx >= 0 && (idx as usize) < samples.len() {
                out[k % mk] += samples[idx as usize] * w;
            }
        }
        self.fft.process_with_scratch(out, &mut self.scratch);
    }

    /// Frames `first..first + n` of a raw sample buffer.
    pub fn frames(&mut self, samples: &[C64], first: i64, n: usize) -> Vec<SpectralFrame> {
        let mk = self.cfg.fft_len();
        let hop = self.cfg.hop() as i64;
        (0..n as i64)
            .map(|i| {
                let f = first + i;
                let mut bins = vec![C64::new(0.0, 0.0); mk];
                self.frame(samples, f * hop, &mut bins);
                SpectralFrame { time_index: f, bins }
            })
            .collect()
    }
}

/// Number of frames whose window starts inside a signal of `len` samples.
pub fn frame_count(len: usize, cfg: &ChannelizerConfig) -> usize {
    len.div_ceil(cfg.hop())
}

/// Channelizes a whole signal sampled at the configured input rate.
pub fn channelize(sig: &IqSignal, cfg: &ChannelizerConfig) -> Result<Vec<SpectralFrame>> {
    let expected = cfg.input_rate_hz();
    if (sig.sample_rate_hz - expected).abs() > 1e-6 * expected {
        return Err(Error::RateMismatch {
            expected,
            actual: sig.sample_rate_hz,
        });
    }
    let mut ch = Channelizer::new(cfg.clone())?;
    Ok(ch.frames(&sig.samples, 0, frame_count(sig.len(), cfg)))
}

/// Phase factor that re-references bin `m` of frame `f` to input sample 0.
pub fn frame_phase(cfg: &ChannelizerConfig, bin: usize, frame: i64) -> C64 {
    let mk = cfg.fft_len() as i64;
    let turns = (bin as i64 * frame * cfg.hop() as i64).rem_euclid(mk);
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * turns as f64 / mk as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct_sum(cfg: &ChannelizerConfig, x: &[C64], frame: i64) -> Vec<C64> {
        let mk = cfg.fft_len();
        let start = frame * cfg.hop() as i64;
        (0..mk)
            .map(|m| {
                let mut acc = C64::new(0.0, 0.0);
                for (k, &w) in cfg.window.iter().enumerate() {
                    let idx = start + k as i64;
                    if idx >= 0 && (idx as usize) < x.len() {
                        let ang = -2.0 * std::f64::consts::PI * (k * m) as f64 / mk as f64;
                        acc += x[idx as usize] * w * C64::from_polar(1.0, ang);
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum_for_short_long_and_exact_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for win in [5, 16, 32, 40] {
            let cfg = ChannelizerConfig::new(8, 2, Some(win)).unwrap();
            let x: Vec<C64> = (0..100).map(|_| C64::new(rng.random(), rng.random())).collect();
            let mut ch = Channelizer::new(cfg.clone()).unwrap();
            for f in ch.frames(&x, -2, 10) {
                let reference = direct_sum(&cfg, &x, f.time_index);
                for (a, b) in f.bins.iter().zip(&reference) {
                    assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn on_grid_tone_peaks_at_channel_bin() {
        let cfg = ChannelizerConfig::new(16, 2, None).unwrap();
        let fs = cfg.input_rate_hz();
        for c in [-8i64, -3, 0, 5, 7] {
            let f0 = (c * 2) as f64 * SYMBOL_RATE_HZ;
            let x: Vec<C64> = (0..2000)
                .map(|n| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * f0 * n as f64 / fs))
                .collect();
            let sig = IqSignal::new(x, fs, crate::modem::Origin::Channel);
            let frames = channelize(&sig, &cfg).unwrap();
            for fr in &frames[..frames.len() - 4] {
                let arg = (0..cfg.fft_len())
                    .max_by(|&a, &b| fr.bins[a].norm().total_cmp(&fr.bins[b].norm()))
                    .unwrap();
                assert_eq!(arg, cfg.channel_bin(c));
                assert_eq!(cfg.bin_freq_hz(arg), f0);
            }
        }
    }

    #[test]
    fn zero_input_and_rate_mismatch() {
        let cfg = ChannelizerConfig::new(4, 2, Some(16)).unwrap();
        let sig = IqSignal::new(vec![C64::new(0.0, 0.0); 64], cfg.input_rate_hz(), crate::modem::Origin::Tx);
        assert!(channelize(&sig, &cfg).unwrap().iter().all(|f| f.bins.iter().all(|b| b.norm() == 0.0)));
        let bad = IqSignal::new(vec![], 1000.0, crate::modem::Origin::Tx);
        assert!(matches!(channelize(&bad, &cfg), Err(Error::RateMismatch { .. })));
    }

    #[test]
    fn window_symmetric() {
        for n in [1, 2, 16, 17, 512] {
            let w = hann(n);
            for k in 0..n {
                assert!((w[k] - w[n - 1 - k]).abs() < 1e-12);
            }
        }
    }
}
