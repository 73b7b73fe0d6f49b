//! Block demapping: decision points, carrier removal and soft bits.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::carrier::{estimate, CarrierSearch, Track};
use crate::error::{Error, Result};
use crate::modem::gmsk::{pseudo_symbols, soft_from_projections};
use crate::modem::qpsk::map_symbols;
use crate::modem::{GmskPrecoding, ModemConfig, C64};
use crate::params::SYMBOL_RATE_HZ;
use crate::txchain::Modulation;

/// A block on the two-sample-per-symbol grid: `series[first + 2 i]` lies on
/// the boundary opening base symbol period `i` of the block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSeries {
    pub series: Vec<C64>,
    pub first: usize,
}

/// Where the carrier phase comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum CarrierMode {
    /// Residual carrier known exactly (oracle synchronization).
    Known(Track),
    /// Residual carrier searched for, ambiguity resolved from known leading bits.
    Search(CarrierSearch),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demapped {
    pub soft: Vec<f64>,
    /// Residual carrier with time zero at the block start.
    pub residual: Track,
    /// Normalised power-law peak; 1 on a clean block.
    pub quality: f64,
}

/// Decision points and their times (seconds from the block start).
pub fn decision_points(
    block: &BlockSeries,
    modulation: Modulation,
    period: usize,
    n_bits: usize,
) -> Result<(Vec<C64>, f64, f64)> {
    let t_sym = 1.0 / SYMBOL_RATE_HZ;
    match modulation {
        Modulation::Gmsk => Ok((pseudo_symbols(&block.series, block.first, n_bits)?, t_sym, t_sym)),
        Modulation::Qpsk => {
            let n_sym = n_bits / 2;
            let step = 2 * period;
            let needed = block.first + step * n_sym.saturating_sub(1) + period + 1;
            if block.series.len() < needed {
                return Err(Error::Truncated {
                    needed,
                    available: block.series.len(),
                });
            }
            let points = (0..n_sym).map(|i| block.series[block.first + step * i + period]).collect();
            let dt = period as f64 * t_sym;
            Ok((points, dt / 2.0, dt))
        }
    }
}

/// Soft bits of one block (positive means 1).
///
/// In search mode `known` holds the block's leading bits (preamble and, for
/// headers, the syncword); they fix the phase ambiguity left by the
/// power-law estimate.
pub fn demap(
    block: &BlockSeries,
    modulation: Modulation,
    modem: &ModemConfig,
    n_bits: usize,
    carrier: &CarrierMode,
    known: &[u8],
) -> Result<Demapped> {
    let period = modem.symbol_periods(modulation);
    let precoded = modem.gmsk_precoding == GmskPrecoding::Differential;
    let (points, t_first, dt) = decision_points(block, modulation, period, n_bits)?;
    let power = match modulation {
        Modulation::Gmsk => 2,
        Modulation::Qpsk => 4,
    };
    let (mut residual, quality) = match carrier {
        CarrierMode::Known(track) => (*track, 1.0),
        CarrierMode::Search(search) => {
            let est = estimate(&points, t_first, dt, power, search);
            (est.track, est.quality)
        }
    };
    let mut rotated: Vec<C64> = points
        .iter()
        .enumerate()
        .map(|(k, p)| p * C64::from_polar(1.0, -residual.phase_at(t_first + k as f64 * dt)))
        .collect();

    if matches!(carrier, CarrierMode::Search(_)) && !known.is_empty() {
        let turn = match modulation {
            Modulation::Gmsk => resolve_sign(&rotated, known, precoded),
            Modulation::Qpsk => resolve_quadrant(&rotated, known)?,
        };
        if turn != 0.0 {
            let r = C64::from_polar(1.0, -turn);
            rotated.iter_mut().for_each(|p| *p *= r);
            residual.phase += turn;
        }
    }

    let soft = match modulation {
        Modulation::Gmsk if precoded => rotated.iter().map(|p| p.re).collect(),
        Modulation::Gmsk => soft_from_projections(&rotated.iter().map(|p| p.re).collect::<Vec<_>>()),
        Modulation::Qpsk => rotated.iter().flat_map(|p| [-p.re, -p.im]).collect(),
    };
    Ok(Demapped {
        soft,
        residual,
        quality,
    })
}

/// Extra rotation (0 or π) that best matches the sign pattern of known bits.
fn resolve_sign(rotated: &[C64], known: &[u8], precoded: bool) -> f64 {
    let mut sign = 1.0;
    let mut corr = 0.0;
    for (p, &b) in rotated.iter().zip(known) {
        if precoded {
            sign = if b & 1 == 1 { 1.0 } else { -1.0 };
        } else if b & 1 == 0 {
            sign = -sign;
        }
        corr += sign * p.re;
    }
    if corr < 0.0 {
        PI
    } else {
        0.0
    }
}

/// Extra rotation (multiple of π/2) that best matches known QPSK symbols.
fn resolve_quadrant(rotated: &[C64], known: &[u8]) -> Result<f64> {
    let symbols = map_symbols(&known[..known.len() / 2 * 2])?;
    let corr: C64 = rotated.iter().zip(&symbols).map(|(p, s)| p * s.conj()).sum();
    let q = (0..4)
        .max_by(|&a, &b| {
            let ra = (corr * C64::from_polar(1.0, -FRAC_PI_2 * f64::from(a))).re;
            let rb = (corr * C64::from_polar(1.0, -FRAC_PI_2 * f64::from(b))).re;
            ra.total_cmp(&rb)
        })
        .unwrap_or(0);
    Ok(FRAC_PI_2 * f64::from(q))
}
