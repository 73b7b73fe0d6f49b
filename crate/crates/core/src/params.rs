//! Regional LR-FHSS parameter sets and time-on-air arithmetic.
//!
//! Every hopping block is sent at [`SYMBOL_RATE_HZ`] = 488.28125 baud, which
//! is also the channel spacing of the hopping grid. The 488 Hz OBW figure is
//! kept only for display; all timing and channel arithmetic uses the exact
//! rate so that header and fragment durations land on a microsecond grid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symbol rate of every hopping block, and the spacing of the OBW channel grid.
pub const SYMBOL_RATE_HZ: f64 = 15_625.0 / 32.0;

/// Occupied bandwidth as printed in the regional tables.
pub const OBW_DISPLAY_HZ: f64 = 488.0;

/// Symbols in one header block (2 preamble + 32 syncword + 80 coded PHDR bits).
pub const HEADER_SYMBOLS: u64 = 114;

/// Symbols in one payload fragment (2 preamble + 48 coded bits).
pub const FRAGMENT_SYMBOLS: u64 = 50;

/// Coded bits carried by one payload fragment.
pub const FRAGMENT_CODED_BITS: usize = 48;

/// Header block duration, microseconds.
pub const T_HEADER_US: u64 = 233_472;

/// Payload fragment duration, microseconds.
pub const T_FRAGMENT_US: u64 = 102_400;

/// CRC-16 bits plus the 6 zero-tail bits appended before payload encoding.
const PAYLOAD_OVERHEAD_BITS: usize = 16 + 6;

/// Largest payload the 8-bit PHDR length field can describe.
pub const MAX_PHDR_PAYLOAD: usize = 255;

// 114 symbols at 15625/32 baud is 233472 us; 50 symbols is 102400 us.
const _: () = assert!(HEADER_SYMBOLS * 32 * 1_000_000 / 15_625 == T_HEADER_US);
const _: () = assert!(FRAGMENT_SYMBOLS * 32 * 1_000_000 / 15_625 == T_FRAGMENT_US);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "EU")]
    Eu868,
    #[serde(rename = "US")]
    Us915,
    #[serde(rename = "custom")]
    Custom,
}

impl Region {
    pub fn parse(s: &str) -> Option<Region> {
        match s.to_ascii_lowercase().as_str() {
            "eu" | "eu868" | "eu863-870" => Some(Region::Eu868),
            "us" | "us915" | "us902-928" => Some(Region::Us915),
            "custom" => Some(Region::Custom),
            _ => None,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Eu868 => "EU863-870",
            Region::Us915 => "US902-928",
            Region::Custom => "custom",
        })
    }
}

/// Payload convolutional coding rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodingRate {
    #[serde(rename = "1/3")]
    OneThird,
    #[serde(rename = "2/3")]
    TwoThirds,
}

impl CodingRate {
    /// Information bytes per fragment used by the `(L + 3) / N_inf` estimate.
    pub fn info_bytes_per_fragment(self) -> usize {
        match self {
            CodingRate::OneThird => 2,
            CodingRate::TwoThirds => 4,
        }
    }

    pub fn parse(s: &str) -> Option<CodingRate> {
        match s {
            "1/3" => Some(CodingRate::OneThird),
            "2/3" => Some(CodingRate::TwoThirds),
            _ => None,
        }
    }
}

impl fmt::Display for CodingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodingRate::OneThird => "1/3",
            CodingRate::TwoThirds => "2/3",
        })
    }
}

/// One column of the regional parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRateProfile {
    pub region: Region,
    pub dr_id: u8,
    /// Number of LR-FHSS channels `N_C` in the region.
    pub n_channels: u32,
    /// Operating channel width, exact (`n_cf` OBW channels).
    pub ocw_hz: f64,
    pub obw_hz: f64,
    /// Minimum spacing between the hopping channels of one end device.
    pub grid_hz: f64,
    pub n_cf: u32,
    pub n_cf_per_ed: u32,
    pub coding_rate: CodingRate,
    pub bit_rate_bps: u32,
    pub n_header_replicas: u32,
    pub max_payload_bytes: usize,
}

impl DataRateProfile {
    fn standard(
        region: Region,
        dr_id: u8,
        n_channels: u32,
        n_cf: u32,
        channels_per_grid: u32,
        coding_rate: CodingRate,
        max_payload_bytes: usize,
    ) -> Self {
        let (bit_rate_bps, n_header_replicas) = match coding_rate {
            CodingRate::OneThird => (162, 3),
            CodingRate::TwoThirds => (325, 2),
        };
        DataRateProfile {
            region,
            dr_id,
            n_channels,
            ocw_hz: f64::from(n_cf) * SYMBOL_RATE_HZ,
            obw_hz: OBW_DISPLAY_HZ,
            grid_hz: f64::from(channels_per_grid) * SYMBOL_RATE_HZ,
            n_cf,
            n_cf_per_ed: n_cf / channels_per_grid,
            coding_rate,
            bit_rate_bps,
            n_header_replicas,
            max_payload_bytes,
        }
    }

    /// The single-ED simulation setup: 900 MHz carrier, 39.06 kHz OCW,
    /// 3.9 kHz grid, rate 1/3, one header replica, 32-byte payload.
    pub fn simulation() -> Self {
        DataRateProfile {
            region: Region::Custom,
            dr_id: 0,
            n_channels: 1,
            ocw_hz: 80.0 * SYMBOL_RATE_HZ,
            obw_hz: OBW_DISPLAY_HZ,
            grid_hz: 8.0 * SYMBOL_RATE_HZ,
            n_cf: 80,
            n_cf_per_ed: 10,
            coding_rate: CodingRate::OneThird,
            bit_rate_bps: 162,
            n_header_replicas: 1,
            max_payload_bytes: 32,
        }
    }

    /// OBW channels between two hopping channels of the same end device.
    pub fn channels_per_grid(&self) -> u32 {
        self.n_cf / self.n_cf_per_ed.max(1)
    }

    /// Baseband frequency of an OBW channel index relative to the OCW centre.
    pub fn channel_offset_hz(&self, index: u32) -> f64 {
        (f64::from(index) - f64::from(self.n_cf / 2)) * SYMBOL_RATE_HZ
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        if self.n_cf == 0 || self.n_cf_per_ed == 0 || self.n_header_replicas == 0 {
            return bad("channel and replica counts must be positive".into());
        }
        let n_cf = floor_ratio(self.ocw_hz, SYMBOL_RATE_HZ);
        if n_cf != u64::from(self.n_cf) {
            return bad(format!("n_cf {} != floor(OCW / OBW) = {n_cf}", self.n_cf));
        }
        let per_ed = floor_ratio(self.ocw_hz, self.grid_hz);
        if per_ed != u64::from(self.n_cf_per_ed) {
            return bad(format!(
                "n_cf_per_ed {} != floor(OCW / grid) = {per_ed}",
                self.n_cf_per_ed
            ));
        }
        if !self.n_cf.is_multiple_of(self.n_cf_per_ed) {
            return bad("grid must be a whole number of OBW channels".into());
        }
        if self.max_payload_bytes == 0 || self.max_payload_bytes > MAX_PHDR_PAYLOAD {
            return bad(format!("max payload {} outside 1..=255", self.max_payload_bytes));
        }
        if self.region != Region::Custom {
            let (rate, n_h) = match self.coding_rate {
                CodingRate::OneThird => (162, 3),
                CodingRate::TwoThirds => (325, 2),
            };
            if self.bit_rate_bps != rate || self.n_header_replicas != n_h {
                return bad(format!(
                    "coding rate {} requires {rate} bps and {n_h} header replicas",
                    self.coding_rate
                ));
            }
        }
        Ok(())
    }

    pub fn check_payload_len(&self, len: usize) -> Result<()> {
        if len == 0 || len > self.max_payload_bytes {
            return Err(Error::InvalidPayloadLength {
                len,
                max: self.max_payload_bytes,
            });
        }
        Ok(())
    }

    /// Time on air of a maximum-length packet for this profile.
    pub fn max_time_on_air(&self) -> ToaBreakdown {
        time_on_air(self.max_payload_bytes, self.coding_rate, self.n_header_replicas)
            .expect("standard profile maxima are valid")
    }
}

fn floor_ratio(num: f64, den: f64) -> u64 {
    (num / den + 1e-9).floor() as u64
}

/// Lookup table of standard and registered custom profiles.
#[derive(Debug, Clone)]
pub struct ProfileRegistry {
    profiles: Vec<DataRateProfile>,
}

impl Default for ProfileRegistry {
    fn default() -> Self {
        Self::with_standard()
    }
}

impl ProfileRegistry {
    /// The six regional columns plus the simulation profile as `(custom, 0)`.
    pub fn with_standard() -> Self {
        use CodingRate::*;
        use Region::*;
        let profiles = vec![
            DataRateProfile::standard(Eu868, 8, 7, 280, 8, OneThird, 58),
            DataRateProfile::standard(Eu868, 9, 4, 280, 8, TwoThirds, 123),
            DataRateProfile::standard(Eu868, 10, 7, 688, 8, OneThird, 58),
            DataRateProfile::standard(Eu868, 11, 4, 688, 8, TwoThirds, 123),
            DataRateProfile::standard(Us915, 5, 8, 3120, 52, OneThird, 58),
            DataRateProfile::standard(Us915, 6, 8, 3120, 52, TwoThirds, 133),
            DataRateProfile::simulation(),
        ];
        ProfileRegistry { profiles }
    }

    pub fn register(&mut self, profile: DataRateProfile) -> Result<()> {
        if profile.region != Region::Custom {
            return Err(Error::InvalidProfile(
                "only custom-region profiles can be registered".into(),
            ));
        }
        profile.validate()?;
        self.profiles
            .retain(|p| !(p.region == Region::Custom && p.dr_id == profile.dr_id));
        self.profiles.push(profile);
        Ok(())
    }

    pub fn lookup(&self, region: Region, dr_id: u8) -> Result<DataRateProfile> {
        self.profiles
            .iter()
            .find(|p| p.region == region && p.dr_id == dr_id)
            .cloned()
            .ok_or_else(|| Error::NotFound {
                region: region.to_string(),
                dr_id,
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataRateProfile> {
        self.profiles.iter()
    }
}

/// Returns the standard profile for `(region, dr_id)`.
pub fn profile_lookup(region: Region, dr_id: u8) -> Result<DataRateProfile> {
    ProfileRegistry::with_standard().lookup(region, dr_id)
}

fn check_len(len: usize) -> Result<()> {
    if len == 0 || len > MAX_PHDR_PAYLOAD {
        return Err(Error::InvalidPayloadLength {
            len,
            max: MAX_PHDR_PAYLOAD,
        });
    }
    Ok(())
}

/// Coded payload bits `(8 (L + 2) + 6) / r`: payload, CRC-16 and the 6 tail
/// bits through the convolutional encoder.
///
/// `8 (L + 2) + 6` is always even, so the rate 2/3 count is an integer.
pub fn coded_payload_bits(len: usize, rate: CodingRate) -> Result<usize> {
    check_len(len)?;
    let info = 8 * len + PAYLOAD_OVERHEAD_BITS;
    Ok(match rate {
        CodingRate::OneThird => 3 * info,
        CodingRate::TwoThirds => (3 * info).div_ceil(2),
    })
}

/// Number of 48-bit payload fragments.
pub fn fragment_count(len: usize, rate: CodingRate) -> Result<usize> {
    Ok(coded_payload_bits(len, rate)?.div_ceil(FRAGMENT_CODED_BITS))
}

/// The byte-level estimate `ceil((L + 3) / N_inf)` of [`fragment_count`].
pub fn fragment_count_estimate(len: usize, rate: CodingRate) -> Result<usize> {
    check_len(len)?;
    Ok((len + 3).div_ceil(rate.info_bytes_per_fragment()))
}

/// Time-on-air decomposition of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToaBreakdown {
    pub n_headers: u32,
    pub n_fragments: usize,
    pub n_coded: usize,
    pub t_header_us: u64,
    pub t_fragment_us: u64,
    pub total_us: u64,
}

impl ToaBreakdown {
    pub fn total_ms(&self) -> f64 {
        self.total_us as f64 / 1000.0
    }

    pub fn t_header_ms(&self) -> f64 {
        self.t_header_us as f64 / 1000.0
    }

    pub fn t_fragment_ms(&self) -> f64 {
        self.t_fragment_us as f64 / 1000.0
    }

    /// Number of hopping blocks, headers included.
    pub fn n_blocks(&self) -> usize {
        self.n_headers as usize + self.n_fragments
    }
}

/// Packet time on air `N_H T_H + N_F T_F`.
pub fn time_on_air(len: usize, rate: CodingRate, n_headers: u32) -> Result<ToaBreakdown> {
    if n_headers == 0 {
        return Err(Error::Config("at least one header replica is required".into()));
    }
    let n_coded = coded_payload_bits(len, rate)?;
    let n_fragments = n_coded.div_ceil(FRAGMENT_CODED_BITS);
    Ok(ToaBreakdown {
        n_headers,
        n_fragments,
        n_coded,
        t_header_us: T_HEADER_US,
        t_fragment_us: T_FRAGMENT_US,
        total_us: u64::from(n_headers) * T_HEADER_US + n_fragments as u64 * T_FRAGMENT_US,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_rate_matches_block_durations() {
        assert_eq!(SYMBOL_RATE_HZ, 488.28125);
        let from_header = HEADER_SYMBOLS as f64 / (T_HEADER_US as f64 * 1e-6);
        let from_fragment = FRAGMENT_SYMBOLS as f64 / (T_FRAGMENT_US as f64 * 1e-6);
        assert!((from_header - SYMBOL_RATE_HZ).abs() < 1e-9);
        assert!((from_fragment - SYMBOL_RATE_HZ).abs() < 1e-9);
    }

    #[test]
    fn eu_dr8_column() {
        let p = profile_lookup(Region::Eu868, 8).unwrap();
        assert_eq!(p.n_channels, 7);
        assert_eq!((p.ocw_hz / 1000.0).round(), 137.0);
        assert_eq!((p.grid_hz / 100.0).round() / 10.0, 3.9);
        assert_eq!((p.n_cf, p.n_cf_per_ed), (280, 35));
        assert_eq!(p.coding_rate, CodingRate::OneThird);
        assert_eq!((p.n_header_replicas, p.max_payload_bytes), (3, 58));
        assert_eq!(p.obw_hz, 488.0);
    }

    #[test]
    fn us_dr6_column() {
        let p = profile_lookup(Region::Us915, 6).unwrap();
        assert_eq!(p.n_channels, 8);
        assert_eq!((p.ocw_hz / 1000.0).round(), 1523.0);
        assert_eq!((p.grid_hz / 100.0).round() / 10.0, 25.4);
        assert_eq!((p.n_cf, p.n_cf_per_ed), (3120, 60));
        assert_eq!(p.coding_rate, CodingRate::TwoThirds);
        assert_eq!((p.n_header_replicas, p.max_payload_bytes), (2, 133));
        assert_eq!(p.channels_per_grid(), 52);
    }

    #[test]
    fn undefined_dr_is_not_found() {
        assert!(matches!(
            profile_lookup(Region::Eu868, 3),
            Err(Error::NotFound { dr_id: 3, .. })
        ));
    }

    #[test]
    fn all_standard_profiles_validate() {
        for p in ProfileRegistry::with_standard().iter() {
            p.validate().unwrap();
        }
    }

    #[test]
    fn custom_profile_validation() {
        let mut reg = ProfileRegistry::with_standard();
        let mut p = DataRateProfile::simulation();
        p.dr_id = 7;
        reg.register(p.clone()).unwrap();
        assert_eq!(reg.lookup(Region::Custom, 7).unwrap(), p);

        let mut bad = p.clone();
        bad.n_cf_per_ed = 11;
        assert!(reg.register(bad).is_err());

        let mut not_custom = p;
        not_custom.region = Region::Eu868;
        assert!(reg.register(not_custom).is_err());
    }

    #[test]
    fn coded_bits_examples() {
        assert_eq!(coded_payload_bits(58, CodingRate::OneThird).unwrap(), 1458);
        assert_eq!(coded_payload_bits(32, CodingRate::OneThird).unwrap(), 834);
        assert_eq!(coded_payload_bits(123, CodingRate::TwoThirds).unwrap(), 1509);
    }

    #[test]
    fn fragment_count_examples() {
        assert_eq!(fragment_count(58, CodingRate::OneThird).unwrap(), 31);
        assert_eq!(fragment_count(32, CodingRate::OneThird).unwrap(), 18);
        assert_eq!(fragment_count(123, CodingRate::TwoThirds).unwrap(), 32);
    }

    #[test]
    fn payload_length_bounds() {
        assert!(matches!(
            coded_payload_bits(0, CodingRate::OneThird),
            Err(Error::InvalidPayloadLength { len: 0, .. })
        ));
        assert!(coded_payload_bits(256, CodingRate::TwoThirds).is_err());
        let p = DataRateProfile::simulation();
        assert!(p.check_payload_len(32).is_ok());
        assert!(p.check_payload_len(33).is_err());
    }

    #[test]
    fn toa_examples() {
        let t = time_on_air(58, CodingRate::OneThird, 3).unwrap();
        assert_eq!(t.total_us, 3_874_816);
        let t = time_on_air(133, CodingRate::TwoThirds, 2).unwrap();
        assert_eq!(t.total_us, 3_948_544);
        let t = time_on_air(32, CodingRate::OneThird, 1).unwrap();
        assert_eq!(t.total_us, 2_076_672);
        assert_eq!(t.n_fragments, 18);
        assert!(time_on_air(32, CodingRate::OneThird, 0).is_err());
    }

    #[test]
    fn fragment_estimate_within_one() {
        for rate in [CodingRate::OneThird, CodingRate::TwoThirds] {
            let mut prev = 0;
            for len in 1..=MAX_PHDR_PAYLOAD {
                let exact = fragment_count(len, rate).unwrap();
                let est = fragment_count_estimate(len, rate).unwrap();
                assert!(exact + 1 >= est && exact <= est + 1, "L={len} r={rate}");
                assert!(exact >= prev);
                prev = exact;
            }
        }
    }
}
