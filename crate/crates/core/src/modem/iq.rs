//! IQ files: little-endian `f32` pairs `I, Q` plus a JSON sidecar at `<path>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{IqSignal, NarrowbandHop, Origin, C64};
use crate::error::{Error, Result};

/// Where one hop lives inside a file of concatenated narrowband hops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopRecord {
    pub block: usize,
    pub channel: u32,
    pub start_sample: i64,
    pub n_bits: usize,
    /// First sample of the hop within the file.
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqSidecar {
    pub sample_rate_hz: f64,
    pub center_freq_offset_hz: f64,
    pub origin: Origin,
    pub n_samples: usize,
    /// Present when the file holds narrowband hops back to back.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hops: Vec<HopRecord>,
    /// Free-form packet metadata (PHDR, modulation, profile, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet: Option<serde_json::Value>,
}

impl IqSidecar {
    pub fn for_signal(sig: &IqSignal) -> Self {
        IqSidecar {
            sample_rate_hz: sig.sample_rate_hz,
            center_freq_offset_hz: sig.center_freq_offset_hz,
            origin: sig.origin,
            n_samples: sig.len(),
            hops: Vec::new(),
            packet: None,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_iq(path: &Path, sig: &IqSignal, sidecar: &IqSidecar) -> Result<()> {
    let mut bytes = Vec::with_capacity(sig.len() * 8);
    for s in &sig.samples {
        bytes.extend_from_slice(&(s.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| Error::json(&side, e))?;
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

pub fn read_iq(path: &Path) -> Result<(IqSignal, IqSidecar)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: IqSidecar = serde_json::from_str(&text).map_err(|e| Error::json(&side, e))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidLength {
            expected: "a whole number of 8-byte IQ pairs".into(),
            actual: bytes.len(),
        });
    }
    let samples: Vec<C64> = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            C64::new(f64::from(re), f64::from(im))
        })
        .collect();
    if samples.len() != sidecar.n_samples {
        return Err(Error::InvalidLength {
            expected: format!("{} samples per sidecar", sidecar.n_samples),
            actual: samples.len(),
        });
    }
    let sig = IqSignal {
        samples,
        sample_rate_hz: sidecar.sample_rate_hz,
        center_freq_offset_hz: sidecar.center_freq_offset_hz,
        origin: sidecar.origin,
    };
    Ok((sig, sidecar))
}

/// Concatenates narrowband hops into one signal plus the records that undo it.
pub fn pack_hops(hops: &[NarrowbandHop]) -> Result<(IqSignal, Vec<HopRecord>)> {
    let Some(first) = hops.first() else {
        return Err(Error::Config("no hops to pack".into()));
    };
    let mut samples = Vec::new();
    let mut records = Vec::with_capacity(hops.len());
    for h in hops {
        if h.signal.sample_rate_hz != first.signal.sample_rate_hz {
            return Err(Error::RateMismatch {
                expected: first.signal.sample_rate_hz,
                actual: h.signal.sample_rate_hz,
            });
        }
        records.push(HopRecord {
            block: h.block,
            channel: h.channel,
            start_sample: h.start_sample,
            n_bits: h.n_bits,
            offset: samples.len(),
            len: h.signal.len(),
        });
        samples.extend_from_slice(&h.signal.samples);
    }
    Ok((IqSignal::new(samples, first.signal.sample_rate_hz, first.signal.origin), records))
}

/// Splits a signal written by [`pack_hops`] back into hops.
pub fn unpack_hops(sig: &IqSignal, records: &[HopRecord]) -> Result<Vec<NarrowbandHop>> {
    records
        .iter()
        .map(|r| {
            let end = r.offset + r.len;
            if end > sig.len() {
                return Err(Error::Truncated {
                    needed: end,
                    available: sig.len(),
                });
            }
            Ok(NarrowbandHop {
                block: r.block,
                channel: r.channel,
                start_sample: r.start_sample,
                n_bits: r.n_bits,
                signal: IqSignal {
                    samples: sig.samples[r.offset..end].to_vec(),
                    sample_rate_hz: sig.sample_rate_hz,
                    center_freq_offset_hz: sig.center_freq_offset_hz,
                    origin: sig.origin,
                },
            })
        })
        .collect()
}
