//! Bit-level packet construction: headers, payload fragments and the hopping plan.

pub mod conv;
pub mod crc;
pub mod hopping;
pub mod interleave;
pub mod phdr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::{bits_to_hex, bytes_to_bits, hex_to_bits, u32_to_bits};
use crate::error::Result;
use crate::params::{fragment_count, CodingRate, DataRateProfile, FRAGMENT_CODED_BITS};

pub use conv::{conv_encode, CodeMode};
pub use crc::{crc16, crc8, phdr_crc8};
pub use hopping::{generate_hopping_plan, HoppingPlan};
pub use interleave::{deinterleave, interleave, InterleaveMode};
pub use phdr::{Grid, Modulation, Phdr};

pub const SYNCWORD: u32 = 0x2C0F_7995;
pub const SYNCWORD_BITS: usize = 32;
pub const PREAMBLE: [u8; 2] = [0, 1];
pub const HEADER_BLOCK_BITS: usize = 114;
pub const FRAGMENT_BLOCK_BITS: usize = 50;

/// Bits of PHDR plus PHDR_CRC ahead of the rate 1/2 encoder.
pub const HEADER_INFO_BITS: usize = 40;

pub fn syncword_bits() -> Vec<u8> {
    u32_to_bits(SYNCWORD, SYNCWORD_BITS)
}

/// Preamble followed by the syncword: the known prefix of every header block.
pub fn header_prefix_bits() -> Vec<u8> {
    let mut bits = PREAMBLE.to_vec();
    bits.extend(syncword_bits());
    bits
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderBlock {
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadFragment {
    pub index: usize,
    pub bits: Vec<u8>,
}

impl HeaderBlock {
    /// The 80 interleaved coded PHDR bits.
    pub fn coded(&self) -> &[u8] {
        &self.bits[PREAMBLE.len() + SYNCWORD_BITS..]
    }
}

impl PayloadFragment {
    /// The 48 coded bits after the preamble.
    pub fn body(&self) -> &[u8] {
        &self.bits[PREAMBLE.len()..]
    }
}

pub fn payload_code_mode(rate: CodingRate) -> CodeMode {
    match rate {
        CodingRate::OneThird => CodeMode::ThirdZeroTail,
        CodingRate::TwoThirds => CodeMode::TwoThirdsZeroTail,
    }
}

/// PHDR and PHDR_CRC as the 40 information bits of the header code.
pub fn header_info_bits(phdr: &Phdr) -> Result<Vec<u8>> {
    phdr.validate()?;
    let mut info = phdr.to_bits();
    let crc = phdr_crc8(&info)?;
    info.extend(u32_to_bits(u32::from(crc), 8));
    Ok(info)
}

pub fn build_header_block(phdr: &Phdr) -> Result<HeaderBlock> {
    let info = header_info_bits(phdr)?;
    let coded = conv_encode(&info, CodeMode::HalfTailBiting)?;
    let coded = interleave(&coded, InterleaveMode::Header)?;
    let mut bits = header_prefix_bits();
    bits.extend(coded);
    debug_assert_eq!(bits.len(), HEADER_BLOCK_BITS);
    Ok(HeaderBlock { bits })
}

/// Payload and CRC-16, encoded and interleaved: the `N_coded` bit stream.
pub fn encode_payload(payload: &[u8], rate: CodingRate) -> Result<Vec<u8>> {
    let n_coded = crate::params::coded_payload_bits(payload.len(), rate)?;
    let mut bytes = payload.to_vec();
    bytes.extend_from_slice(&crc16(payload).to_be_bytes());
    let coded = conv_encode(&bytes_to_bits(&bytes), payload_code_mode(rate))?;
    debug_assert_eq!(coded.len(), n_coded);
    interleave(&coded, InterleaveMode::Payload)
}

pub fn fragment_payload(payload: &[u8], rate: CodingRate) -> Result<Vec<PayloadFragment>> {
    let coded = encode_payload(payload, rate)?;
    let n_fragments = fragment_count(payload.len(), rate)?;
    let fragments: Vec<PayloadFragment> = coded
        .chunks(FRAGMENT_CODED_BITS)
        .enumerate()
        .map(|(index, chunk)| {
            let mut bits = PREAMBLE.to_vec();
            bits.extend_from_slice(chunk);
            bits.resize(FRAGMENT_BLOCK_BITS, 0);
            PayloadFragment { index, bits }
        })
        .collect();
    debug_assert_eq!(fragments.len(), n_fragments);
    Ok(fragments)
}

/// Everything the transmitter sends for one packet, in transmission order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketBlocks {
    pub phdr: Phdr,
    #[serde(with = "hex_blocks::headers")]
    pub header_blocks: Vec<HeaderBlock>,
    #[serde(with = "hex_blocks::fragments")]
    pub payload_fragments: Vec<PayloadFragment>,
    pub plan: HoppingPlan,
}

impl PacketBlocks {
    pub fn n_blocks(&self) -> usize {
        self.header_blocks.len() + self.payload_fragments.len()
    }

    pub fn modulation(&self) -> Modulation {
        self.phdr.modulation
    }

    /// Block bits in transmission order paired with their plan channel.
    pub fn blocks(&self) -> impl Iterator<Item = (&[u8], u32)> + '_ {
        self.header_blocks
            .iter()
            .map(|h| h.bits.as_slice())
            .chain(self.payload_fragments.iter().map(|f| f.bits.as_slice()))
            .zip(self.plan.channel_indices.iter().copied())
    }

    /// The coded payload stream with fragment preambles and padding removed.
    pub fn coded_payload(&self) -> Vec<u8> {
        let n_coded = crate::params::coded_payload_bits(
            usize::from(self.phdr.payload_length),
            self.phdr.coding_rate,
        )
        .unwrap_or(0);
        let mut bits: Vec<u8> = self
            .payload_fragments
            .iter()
            .flat_map(|f| f.body().iter().copied())
            .collect();
        bits.truncate(n_coded);
        bits
    }
}

/// Builds the header replicas, payload fragments and hopping plan of one packet.
pub fn assemble_packet(
    profile: &DataRateProfile,
    payload: &[u8],
    seq_id: u16,
    modulation: Modulation,
) -> Result<PacketBlocks> {
    profile.check_payload_len(payload.len())?;
    let phdr = Phdr {
        payload_length: payload.len() as u8,
        coding_rate: profile.coding_rate,
        grid: Grid::for_profile(profile),
        hopping_seq_id: seq_id,
        modulation,
    };
    let header = build_header_block(&phdr)?;
    let payload_fragments = fragment_payload(payload, profile.coding_rate)?;
    let n_headers = profile.n_header_replicas as usize;
    let plan = generate_hopping_plan(seq_id, profile, n_headers + payload_fragments.len())?;
    Ok(PacketBlocks {
        phdr,
        header_blocks: vec![header; n_headers],
        payload_fragments,
        plan,
    })
}

mod hex_blocks {
    use super::*;

    pub mod headers {
        use super::*;

        pub fn serialize<S: Serializer>(blocks: &[HeaderBlock], s: S) -> std::result::Result<S::Ok, S::Error> {
            let hex: Vec<String> = blocks.iter().map(|b| bits_to_hex(&b.bits)).collect();
            hex.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<HeaderBlock>, D::Error> {
            let hex = Vec::<String>::deserialize(d)?;
            hex.iter()
                .map(|h| {
                    hex_to_bits(h, HEADER_BLOCK_BITS)
                        .map(|bits| HeaderBlock { bits })
                        .ok_or_else(|| serde::de::Error::custom(format!("bad header hex {h}")))
                })
                .collect()
        }
    }

    pub mod fragments {
        use super::*;

        pub fn serialize<S: Serializer>(blocks: &[PayloadFragment], s: S) -> std::result::Result<S::Ok, S::Error> {
            let hex: Vec<String> = blocks.iter().map(|b| bits_to_hex(&b.bits)).collect();
            hex.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<PayloadFragment>, D::Error> {
            let hex = Vec::<String>::deserialize(d)?;
            hex.iter()
                .enumerate()
                .map(|(index, h)| {
                    hex_to_bits(h, FRAGMENT_BLOCK_BITS)
                        .map(|bits| PayloadFragment { index, bits })
                        .ok_or_else(|| serde::de::Error::custom(format!("bad fragment hex {h}")))
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phdr() -> Phdr {
        Phdr {
            payload_length: 32,
            coding_rate: CodingRate::OneThird,
            grid: Grid::Narrow,
            hopping_seq_id: 17,
            modulation: Modulation::Gmsk,
        }
    }

    #[test]
    fn header_layout() {
        let h = build_header_block(&phdr()).unwrap();
        assert_eq!(h.bits.len(), 114);
        assert_eq!(&h.bits[..2], &PREAMBLE);
        assert_eq!(crate::bits::bits_to_u32(&h.bits[2..34]), 0x2C0F7995);
    }

    #[test]
    fn fragment_counts_and_padding() {
        let frags = fragment_payload(&[0xA5; 32], CodingRate::OneThird).unwrap();
        assert_eq!(frags.len(), 18);
        assert!(frags.iter().all(|f| f.bits.len() == 50 && f.bits[..2] == PREAMBLE));

        let payload: Vec<u8> = (0..58).collect();
        let frags = fragment_payload(&payload, CodingRate::OneThird).unwrap();
        assert_eq!(frags.len(), 31);
        let coded = encode_payload(&payload, CodingRate::OneThird).unwrap();
        let tail = frags.last().unwrap().body();
        assert_eq!(&tail[..18], &coded[30 * 48..]);
        assert!(tail[18..].iter().all(|&b| b == 0));
    }

    #[test]
    fn fragments_partition_the_coded_stream() {
        let profile = DataRateProfile::simulation();
        let payload: Vec<u8> = (100..132).collect();
        let pkt = assemble_packet(&profile, &payload, 3, Modulation::Qpsk).unwrap();
        assert_eq!(pkt.coded_payload(), encode_payload(&payload, CodingRate::OneThird).unwrap());
        assert_eq!(pkt.n_blocks(), pkt.plan.len());
    }

    #[test]
    fn header_replicas_identical() {
        let profile = crate::params::profile_lookup(crate::params::Region::Eu868, 8).unwrap();
        let pkt = assemble_packet(&profile, &[1; 58], 400, Modulation::Gmsk).unwrap();
        assert_eq!(pkt.header_blocks.len(), 3);
        assert!(pkt.header_blocks.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(pkt.payload_fragments.len(), 31);
        assert_eq!(pkt.plan.len(), 34);
    }

    #[test]
    fn packet_json_roundtrip() {
        let profile = DataRateProfile::simulation();
        let pkt = assemble_packet(&profile, b"hello", 9, Modulation::Gmsk).unwrap();
        let json = serde_json::to_string(&pkt).unwrap();
        let back: PacketBlocks = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pkt);
    }
}
