//! Ring-buffer block store holding channelizer output in two layouts.
//!
//! The frequency region keeps whole frames in time order (all bins of one
//! instant together); the time region keeps each bin's samples contiguously.
//! Both are written together and hold the same frames. Time-series reads are
//! re-referenced to input sample 0 (see [`frame_phase`]) so that a steady tone
//! reads as a steady series.

use super::channelizer::{frame_phase, ChannelizerConfig, SpectralFrame};
use crate::error::{Error, Result};
use crate::modem::C64;

#[derive(Debug, Clone)]
pub struct BlockStore {
    cfg: ChannelizerConfig,
    capacity: usize,
    /// Frame-major ring: `capacity × MK`.
    frequency_region: Vec<C64>,
    /// Bin-major ring: `MK × capacity`.
    time_region: Vec<C64>,
    /// Absolute index of the oldest held frame.
    first: i64,
    /// Number of frames held.
    len: usize,
}

impl BlockStore {
    pub fn new(cfg: ChannelizerConfig, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("block store capacity must be positive".into()));
        }
        let mk = cfg.fft_len();
        Ok(BlockStore {
            cfg,
            capacity,
            frequency_region: vec![C64::new(0.0, 0.0); capacity * mk],
            time_region: vec![C64::new(0.0, 0.0); capacity * mk],
            first: 0,
            len: 0,
        })
    }

    pub fn config(&self) -> &ChannelizerConfig {
        &self.cfg
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Absolute frame range currently held.
    pub fn held(&self) -> std::ops::Range<i64> {
        self.first..self.first + self.len as i64
    }

    fn slot(&self, frame: i64) -> usize {
        frame.rem_euclid(self.capacity as i64) as usize
    }

    /// Appends one frame; frames must arrive with consecutive time indices.
    pub fn push(&mut self, frame: &SpectralFrame) -> Result<()> {
        let mk = self.cfg.fft_len();
        if frame.bins.len() != mk {
            return Err(Error::InvalidLength {
                expected: format!("{mk} bins"),
                actual: frame.bins.len(),
            });
        }
        if self.len == 0 {
            self.first = frame.time_index;
        } else if frame.time_index != self.first + self.len as i64 {
            return Err(Error::Config(format!(
                "frame {} does not follow frame {}",
                frame.time_index,
                self.first + self.len as i64 - 1
            )));
        }
        let slot = self.slot(frame.time_index);
        self.frequency_region[slot * mk..(slot + 1) * mk].copy_from_slice(&frame.bins);
        for (bin, v) in frame.bins.iter().enumerate() {
            self.time_region[bin * self.capacity + slot] = *v;
        }
        if self.len == self.capacity {
            self.first += 1;
        } else {
            self.len += 1;
        }
        Ok(())
    }

    pub fn store_frames(&mut self, frames: &[SpectralFrame]) -> Result<()> {
        frames.iter().try_for_each(|f| self.push(f))
    }

    fn check_range(&self, start: i64, n: usize) -> Result<()> {
        let held = self.held();
        let end = start + n as i64;
        if start < held.start || end > held.end {
            return Err(Error::Evicted {
                start: start.max(0) as u64,
                end: end.max(0) as u64,
                held_start: held.start.max(0) as u64,
                held_end: held.end.max(0) as u64,
            });
        }
        Ok(())
    }

    /// One frame exactly as produced by the channelizer.
    pub fn fetch_frame(&self, frame: i64) -> Result<&[C64]> {
        self.check_range(frame, 1)?;
        let mk = self.cfg.fft_len();
        let slot = self.slot(frame);
        Ok(&self.frequency_region[slot * mk..(slot + 1) * mk])
    }

    /// `n` consecutive samples of one bin starting at absolute frame `start`.
    pub fn fetch_time_series(&self, bin: usize, start: i64, n: usize) -> Result<Vec<C64>> {
        if bin >= self.cfg.fft_len() {
            return Err(Error::Config(format!("bin {bin} outside the {}-bin transform", self.cfg.fft_len())));
        }
        self.check_range(start, n)?;
        let row = &self.time_region[bin * self.capacity..(bin + 1) * self.capacity];
        Ok((0..n as i64)
            .map(|i| {
                let f = start + i;
                row[self.slot(f)] * frame_phase(&self.cfg, bin, f)
            })
            .collect())
    }

    /// Like [`fetch_time_series`](Self::fetch_time_series) but clipped to the
    /// held range, with zeros where frames are not available.
    pub fn fetch_padded(&self, bin: usize, start: i64, n: usize) -> Vec<C64> {
        let held = self.held();
        let lo = start.max(held.start);
        let hi = (start + n as i64).min(held.end);
        let mut out = vec![C64::new(0.0, 0.0); n];
        if lo < hi {
            if let Ok(part) = self.fetch_time_series(bin, lo, (hi - lo) as usize) {
                out[(lo - start) as usize..(hi - start) as usize].copy_from_slice(&part);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frames(cfg: &ChannelizerConfig, first: i64, n: usize, seed: u64) -> Vec<SpectralFrame> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n as i64)
            .map(|i| SpectralFrame {
                time_index: first + i,
                bins: (0..cfg.fft_len()).map(|_| C64::new(rng.random(), rng.random())).collect(),
            })
            .collect()
    }

    #[test]
    fn roundtrip_and_layouts_agree() {
        let cfg = ChannelizerConfig::new(4, 2, Some(16)).unwrap();
        let frames = random_frames(&cfg, 10, 30, 1);
        let mut store = BlockStore::new(cfg.clone(), 64).unwrap();
        store.store_frames(&frames).unwrap();
        for bin in 0..8 {
            let series = store.fetch_time_series(bin, 10, 30).unwrap();
            for (i, f) in frames.iter().enumerate() {
                let expect = f.bins[bin] * frame_phase(&cfg, bin, f.time_index);
                assert_eq!(series[i], expect);
                assert_eq!(store.fetch_frame(f.time_index).unwrap()[bin], f.bins[bin]);
            }
        }
    }

    #[test]
    fn ring_wraparound_keeps_order_and_evicts() {
        let cfg = ChannelizerConfig::new(2, 2, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let cap = rng.random_range(1..20);
            let total = rng.random_range(1..60);
            let frames = random_frames(&cfg, -5, total, trial);
            let mut store = BlockStore::new(cfg.clone(), cap).unwrap();
            store.store_frames(&frames).unwrap();
            let held = store.held();
            assert_eq!((held.end - held.start) as usize, cap.min(total));
            let start = held.start;
            let n = (held.end - held.start) as usize;
            let series = store.fetch_time_series(1, start, n).unwrap();
            for (i, v) in series.iter().enumerate() {
                let f = &frames[(start + i as i64 + 5) as usize];
                assert_eq!(*v, f.bins[1] * frame_phase(&cfg, 1, f.time_index));
            }
            if held.start > -5 {
                assert!(matches!(
                    store.fetch_time_series(1, held.start - 1, 2),
                    Err(Error::Evicted { .. })
                ));
            }
            assert!(store.fetch_time_series(0, held.end - 1, 2).is_err());
        }
    }

    #[test]
    fn non_consecutive_frames_rejected() {
        let cfg = ChannelizerConfig::new(2, 2, None).unwrap();
        let mut frames = random_frames(&cfg, 0, 3, 4);
        frames[2].time_index = 5;
        let mut store = BlockStore::new(cfg, 8).unwrap();
        assert!(store.store_frames(&frames).is_err());
    }
}
