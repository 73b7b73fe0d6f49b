//! Bit vectors are `Vec<u8>` holding 0/1, most significant bit first.

/// Expands bytes into bits, MSB first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Packs bits MSB first; a trailing partial byte is zero-padded on the right.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)))
        })
        .collect()
}

pub fn u32_to_bits(value: u32, width: usize) -> Vec<u8> {
    (0..width).rev().map(|i| ((value >> i) & 1) as u8).collect()
}

pub fn bits_to_u32(bits: &[u8]) -> u32 {
    bits.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b & 1))
}

/// Hex rendering of a bit string, zero-padded on the right to a whole nibble.
pub fn bits_to_hex(bits: &[u8]) -> String {
    let mut padded = bits.to_vec();
    padded.resize(bits.len().div_ceil(4) * 4, 0);
    padded
        .chunks(4)
        .map(|n| char::from_digit(bits_to_u32(n), 16).unwrap())
        .collect()
}

/// Inverse of [`bits_to_hex`] for a known bit length.
pub fn hex_to_bits(hex: &str, n_bits: usize) -> Option<Vec<u8>> {
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for c in hex.chars() {
        bits.extend(u32_to_bits(c.to_digit(16)?, 4));
    }
    if bits.len() < n_bits || bits.len() - n_bits >= 4 {
        return None;
    }
    bits.truncate(n_bits);
    Some(bits)
}
