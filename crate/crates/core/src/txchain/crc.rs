//! PHDR and payload checksums.
//!
//! * CRC-8: polynomial 0x07, init 0x00, no reflection, no final xor.
//! * CRC-16: polynomial 0x1021, init 0xFFFF, no reflection, no final xor.
//!
//! Both are MSB-first, so appending the checksum to the message leaves a
//! zero remainder.

use crate::bits::bits_to_bytes;
use crate::error::{Error, Result};

pub const CRC8_POLY: u8 = 0x07;
pub const CRC8_INIT: u8 = 0x00;
pub const CRC16_POLY: u16 = 0x1021;
pub const CRC16_INIT: u16 = 0xFFFF;

const CRC8_TABLE: [u8; 256] = {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u8;
        let mut k = 0;
        while k < 8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ CRC8_POLY } else { crc << 1 };
            k += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
};

const CRC16_TABLE: [u16; 256] = {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut k = 0;
        while k < 8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ CRC16_POLY } else { crc << 1 };
            k += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
};

pub fn crc8(bytes: &[u8]) -> u8 {
    bytes
        .iter()
        .fold(CRC8_INIT, |crc, &b| CRC8_TABLE[usize::from(crc ^ b)])
}

pub fn crc16(bytes: &[u8]) -> u16 {
    bytes.iter().fold(CRC16_INIT, |crc, &b| {
        (crc << 8) ^ CRC16_TABLE[usize::from((crc >> 8) as u8 ^ b)]
    })
}

/// CRC-8 of the 32-bit PHDR given as bits.
pub fn phdr_crc8(bits: &[u8]) -> Result<u8> {
    if bits.len() != 32 {
        return Err(Error::InvalidLength {
            expected: "32 PHDR bits".into(),
            actual: bits.len(),
        });
    }
    Ok(crc8(&bits_to_bytes(bits)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_phdr_has_zero_crc() {
        assert_eq!(phdr_crc8(&[0; 32]).unwrap(), 0);
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(matches!(
            phdr_crc8(&[0; 31]),
            Err(Error::InvalidLength { actual: 31, .. })
        ));
    }

    #[test]
    fn check_values() {
        // Standard catalogue check values for "123456789".
        assert_eq!(crc8(b"123456789"), 0xF4);
        assert_eq!(crc16(b"123456789"), 0x29B1);
    }

    #[test]
    fn appended_crc16_leaves_zero_remainder() {
        let mut msg = b"lr-fhss payload".to_vec();
        let c = crc16(&msg);
        msg.extend_from_slice(&c.to_be_bytes());
        assert_eq!(crc16(&msg), 0);
    }

    #[test]
    fn single_bit_flips_change_crc8() {
        let base = [0x2C, 0x0F, 0x79, 0x95];
        let c = crc8(&base);
        for bit in 0..32 {
            let mut m = base;
            m[bit / 8] ^= 0x80 >> (bit % 8);
            assert_ne!(crc8(&m), c);
        }
    }
}
