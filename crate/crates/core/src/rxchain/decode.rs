//! Header and payload decoders working on soft bits.

use crate::bits::{bits_to_bytes, bits_to_u32};
use crate::error::{Error, Result};
use crate::params::{coded_payload_bits, fragment_count};
use crate::txchain::phdr::PHDR_BITS;
use crate::txchain::{
    crc16, deinterleave, payload_code_mode, phdr_crc8, CodeMode, InterleaveMode, Phdr, HEADER_BLOCK_BITS,
    HEADER_INFO_BITS, PREAMBLE, SYNCWORD_BITS,
};

use super::viterbi::decode_soft;

/// Deinterleave, tail-biting Viterbi and CRC-8 over the soft bits of a whole
/// header block (preamble and syncword included).
pub fn decode_header_soft(soft: &[f64]) -> Result<Phdr> {
    if soft.len() != HEADER_BLOCK_BITS {
        return Err(Error::InvalidLength {
            expected: format!("{HEADER_BLOCK_BITS} header soft bits"),
            actual: soft.len(),
        });
    }
    let coded = deinterleave(&soft[PREAMBLE.len() + SYNCWORD_BITS..], InterleaveMode::Header)?;
    let info = decode_soft(&coded, CodeMode::HalfTailBiting, HEADER_INFO_BITS)?;
    let (phdr_bits, crc_bits) = info.split_at(PHDR_BITS);
    if phdr_crc8(phdr_bits)? != bits_to_u32(crc_bits) as u8 {
        return Err(Error::CrcFail);
    }
    // a word that passes the CRC but breaks the field rules is still a header error
    Phdr::from_bits(phdr_bits).map_err(|_| Error::CrcFail)
}

/// Soft bits of every fragment (each 50 long, preamble first) to payload bytes.
pub fn decode_payload_soft(fragments: &[Vec<f64>], phdr: &Phdr) -> Result<Vec<u8>> {
    let len = usize::from(phdr.payload_length);
    let n_frag = fragment_count(len, phdr.coding_rate)?;
    if fragments.len() < n_frag {
        return Err(Error::MissingFragments {
            index: fragments.len(),
        });
    }
    let mut coded: Vec<f64> = fragments[..n_frag]
        .iter()
        .flat_map(|f| f.iter().skip(PREAMBLE.len()).copied())
        .collect();
    coded.truncate(coded_payload_bits(len, phdr.coding_rate)?);
    let coded = deinterleave(&coded, InterleaveMode::Payload)?;
    let info = decode_soft(&coded, payload_code_mode(phdr.coding_rate), 8 * (len + 2))?;
    let bytes = bits_to_bytes(&info);
    let (payload, crc) = bytes.split_at(len);
    if crc16(payload).to_be_bytes() != crc {
        return Err(Error::CrcFail);
    }
    Ok(payload.to_vec())
}
