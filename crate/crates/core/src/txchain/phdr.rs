//! 32-bit physical header.
//!
//! Field layout, MSB first:
//!
//! | bits    | field            | encoding                      |
//! |---------|------------------|-------------------------------|
//! | 31..24  | payload_length   | bytes, 1..=255                |
//! | 23..22  | coding_rate      | 0 = 1/3, 1 = 2/3              |
//! | 21      | grid             | 0 = 3.9 kHz, 1 = 25.4 kHz     |
//! | 20      | modulation       | 0 = GMSK, 1 = QPSK            |
//! | 19..11  | hopping_seq_id   | 0..=511                       |
//! | 10..0   | reserved         | zero                          |

use serde::{Deserialize, Serialize};

use crate::bits::{bits_to_u32, u32_to_bits};
use crate::error::{Error, Result};
use crate::params::{CodingRate, DataRateProfile, SYMBOL_RATE_HZ};

pub const PHDR_BITS: usize = 32;
pub const MAX_SEQ_ID: u16 = 511;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "gmsk")]
    Gmsk,
    #[serde(rename = "qpsk")]
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Gmsk => 1,
            Modulation::Qpsk => 2,
        }
    }

    pub fn parse(s: &str) -> Option<Modulation> {
        match s.to_ascii_lowercase().as_str() {
            "gmsk" => Some(Modulation::Gmsk),
            "qpsk" => Some(Modulation::Qpsk),
            _ => None,
        }
    }
}

impl std::fmt::Display for Modulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modulation::Gmsk => "gmsk",
            Modulation::Qpsk => "qpsk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Grid {
    #[serde(rename = "3.9kHz")]
    Narrow,
    #[serde(rename = "25.4kHz")]
    Wide,
}

impl Grid {
    /// The grid code for a profile: 8 OBW channels is narrow, anything wider is wide.
    pub fn for_profile(profile: &DataRateProfile) -> Grid {
        if profile.grid_hz <= 8.0 * SYMBOL_RATE_HZ + 1e-6 {
            Grid::Narrow
        } else {
            Grid::Wide
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Phdr {
    pub payload_length: u8,
    pub coding_rate: CodingRate,
    pub grid: Grid,
    pub hopping_seq_id: u16,
    pub modulation: Modulation,
}

impl Phdr {
    pub fn validate(&self) -> Result<()> {
        if self.payload_length == 0 {
            return Err(Error::InvalidPhdr("payload length must be at least 1".into()));
        }
        if self.hopping_seq_id > MAX_SEQ_ID {
            return Err(Error::InvalidPhdr(format!(
                "hopping sequence id {} exceeds 9 bits",
                self.hopping_seq_id
            )));
        }
        Ok(())
    }

    pub fn to_u32(&self) -> u32 {
        let rate = match self.coding_rate {
            CodingRate::OneThird => 0,
            CodingRate::TwoThirds => 1,
        };
        let grid = match self.grid {
            Grid::Narrow => 0,
            Grid::Wide => 1,
        };
        let modulation = match self.modulation {
            Modulation::Gmsk => 0,
            Modulation::Qpsk => 1,
        };
        (u32::from(self.payload_length) << 24)
            | (rate << 22)
            | (grid << 21)
            | (modulation << 20)
            | (u32::from(self.hopping_seq_id & MAX_SEQ_ID) << 11)
    }

    pub fn from_u32(word: u32) -> Result<Phdr> {
        if word & 0x7FF != 0 {
            return Err(Error::InvalidPhdr("reserved bits set".into()));
        }
        let coding_rate = match (word >> 22) & 0b11 {
            0 => CodingRate::OneThird,
            1 => CodingRate::TwoThirds,
            code => return Err(Error::InvalidPhdr(format!("coding rate code {code}"))),
        };
        let phdr = Phdr {
            payload_length: (word >> 24) as u8,
            coding_rate,
            grid: if (word >> 21) & 1 == 0 { Grid::Narrow } else { Grid::Wide },
            modulation: if (word >> 20) & 1 == 0 {
                Modulation::Gmsk
            } else {
                Modulation::Qpsk
            },
            hopping_seq_id: ((word >> 11) & 0x1FF) as u16,
        };
        phdr.validate()?;
        Ok(phdr)
    }

    pub fn to_bits(&self) -> Vec<u8> {
        u32_to_bits(self.to_u32(), PHDR_BITS)
    }

    pub fn from_bits(bits: &[u8]) -> Result<Phdr> {
        if bits.len() != PHDR_BITS {
            return Err(Error::InvalidLength {
                expected: "32 PHDR bits".into(),
                actual: bits.len(),
            });
        }
        Phdr::from_u32(bits_to_u32(bits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_phdr() -> impl Strategy<Value = Phdr> {
        (1u8..=255, any::<bool>(), any::<bool>(), 0u16..=511, any::<bool>()).prop_map(
            |(len, r, g, seq, m)| Phdr {
                payload_length: len,
                coding_rate: if r { CodingRate::TwoThirds } else { CodingRate::OneThird },
                grid: if g { Grid::Wide } else { Grid::Narrow },
                hopping_seq_id: seq,
                modulation: if m { Modulation::Qpsk } else { Modulation::Gmsk },
            },
        )
    }

    proptest! {
        #[test]
        fn bits_roundtrip(p in arb_phdr()) {
            let bits = p.to_bits();
            prop_assert_eq!(bits.len(), 32);
            prop_assert_eq!(Phdr::from_bits(&bits).unwrap(), p);
        }
    }

    #[test]
    fn reserved_and_rate_codes_rejected() {
        assert!(Phdr::from_u32(0x0100_0001).is_err());
        assert!(Phdr::from_u32(0x0180_0000).is_err());
        assert!(Phdr::from_u32(0x0000_0000).is_err());
        assert!(Phdr::from_u32(0x0100_0000).is_ok());
    }

    #[test]
    fn seq_id_range_checked() {
        let p = Phdr {
            payload_length: 10,
            coding_rate: CodingRate::OneThird,
            grid: Grid::Narrow,
            hopping_seq_id: 512,
            modulation: Modulation::Gmsk,
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn grid_code_from_profile() {
        let reg = crate::params::ProfileRegistry::with_standard();
        for p in reg.iter() {
            let expect = if p.channels_per_grid() == 8 { Grid::Narrow } else { Grid::Wide };
            assert_eq!(Grid::for_profile(p), expect);
        }
    }
}
