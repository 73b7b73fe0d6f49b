//! Slow reference implementations shared by the oracle and acceptance targets.
#![allow(dead_code)]

use lrfhss::detector::{channelize, ChannelizerConfig};
use lrfhss::modem::{IqSignal, Origin, C64};
use lrfhss::rxchain::viterbi::{path_metric, viterbi_decode};
use lrfhss::txchain::conv::{conv_encode, CodeMode};
use lrfhss::txchain::crc::{crc16, crc8};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MODES: [CodeMode; 3] = [
    CodeMode::HalfTailBiting,
    CodeMode::ThirdZeroTail,
    CodeMode::TwoThirdsZeroTail,
];

/// MSB-first polynomial long division, one bit at a time.
pub fn bit_serial_crc(bytes: &[u8], width: u32, poly: u32, init: u32) -> u32 {
    let top = 1u32 << (width - 1);
    let mask = ((1u64 << width) - 1) as u32;
    let mut reg = init;
    for b in bytes {
        for i in (0..8).rev() {
            let fb = ((reg & top) != 0) ^ ((b >> i) & 1 == 1);
            reg = (reg << 1) & mask;
            if fb {
                reg ^= poly;
            }
        }
    }
    reg
}

pub fn check_crcs(n_inputs: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n_inputs {
        let len = rng.random_range(0..64);
        let msg: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let (a8, b8) = (u32::from(crc8(&msg)), bit_serial_crc(&msg, 8, 0x07, 0x00));
        let (a16, b16) = (u32::from(crc16(&msg)), bit_serial_crc(&msg, 16, 0x1021, 0xFFFF));
        if a8 != b8 || a16 != b16 {
            return Err(format!("input {i}: crc8 {a8:02x}/{b8:02x} crc16 {a16:04x}/{b16:04x}"));
        }
    }
    Ok(())
}

pub fn message(value: u32, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((value >> (n - 1 - i)) & 1) as u8).collect()
}

fn antipodal(coded: &[u8], level: i32) -> Vec<i32> {
    coded.iter().map(|&c| if c == 1 { level } else { -level }).collect()
}

/// Every message of 1..=`max_bits` bits decodes exactly from its clean codeword.
pub fn check_viterbi_clean(max_bits: usize) -> Result<(), String> {
    for mode in MODES {
        for n in 1..=max_bits {
            for v in 0..1u32 << n {
                let msg = message(v, n);
                let coded = conv_encode(&msg, mode).map_err(|e| e.to_string())?;
                let dec = viterbi_decode(&antipodal(&coded, 7), mode, n).map_err(|e| e.to_string())?;
                if dec.bits != msg {
                    return Err(format!("{mode:?} n={n} message {v:#x} decoded as {:?}", dec.bits));
                }
            }
        }
    }
    Ok(())
}

/// On noisy metrics the decoder's metric equals the best over every codeword.
pub fn check_viterbi_ml(max_bits: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for mode in MODES {
        for n in 1..=max_bits {
            let book: Vec<Vec<u8>> = (0..1u32 << n)
                .map(|v| conv_encode(&message(v, n), mode).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
            let trials = if n <= 10 { 40 } else { 6 };
            for _ in 0..trials {
                // heavy noise so that many inputs are far from any codeword
                let sent = &book[rng.random_range(0..book.len())];
                let metrics: Vec<i32> = antipodal(sent, 3)
                    .into_iter()
                    .map(|m| (m + rng.random_range(-6..=6)).clamp(-7, 7))
                    .collect();
                let best = book.iter().map(|c| path_metric(c, &metrics)).max().unwrap_or(i64::MIN);
                let dec = viterbi_decode(&metrics, mode, n).map_err(|e| e.to_string())?;
                let re = conv_encode(&dec.bits, mode).map_err(|e| e.to_string())?;
                if dec.metric != best || path_metric(&re, &metrics) != best {
                    return Err(format!("{mode:?} n={n}: decoder {} exhaustive {best}", dec.metric));
                }
            }
        }
    }
    Ok(())
}

/// Windowed DFT written straight from the definition.
pub fn direct_frame(cfg: &ChannelizerConfig, x: &[C64], frame: usize) -> Vec<C64> {
    let mk = cfg.fft_len();
    let start = frame * cfg.hop();
    (0..mk)
        .map(|m| {
            cfg.window
                .iter()
                .enumerate()
                .filter(|&(k, _)| start + k < x.len())
                .map(|(k, &w)| {
                    let ang = -2.0 * std::f64::consts::PI * ((m * k) % mk) as f64 / mk as f64;
                    x[start + k] * w * C64::from_polar(1.0, ang)
                })
                .sum()
        })
        .collect()
}

/// Largest relative error of the channelizer against [`direct_frame`].
pub fn check_channelizer(n_inputs: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = [(4, 2, None), (8, 2, Some(24)), (16, 2, None), (6, 3, Some(9)), (4, 4, Some(64))];
    let mut worst = 0f64;
    for trial in 0..n_inputs {
        let (m, k, win) = shapes[trial % shapes.len()];
        let cfg = ChannelizerConfig::new(m, k, win).map_err(|e| e.to_string())?;
        let len = rng.random_range(cfg.window_len()..4 * cfg.window_len());
        let x: Vec<C64> = (0..len)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let sig = IqSignal::new(x.clone(), cfg.input_rate_hz(), Origin::Channel);
        let frames = channelize(&sig, &cfg).map_err(|e| e.to_string())?;
        for (f, fr) in frames.iter().enumerate() {
            let want = direct_frame(&cfg, &x, f);
            let err = fr.bins.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let norm = want.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                worst = worst.max(err / norm);
            }
        }
    }
    if worst < 1e-9 {
        Ok(worst)
    } else {
        Err(format!("relative error {worst:.3e}"))
    }
}
