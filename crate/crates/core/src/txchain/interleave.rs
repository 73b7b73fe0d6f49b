//! Row-in/column-out block interleavers.
//!
//! Bits are written row by row into a table of `cols` columns and read out
//! column by column. When the length is not a multiple of `cols` the last
//! row is partial and the empty cells are skipped on readout.
//!
//! * header: 10 rows x 8 columns, exactly 80 bits
//! * payload: 16 columns, as many rows as needed

use crate::error::{Error, Result};

pub const HEADER_CODED_BITS: usize = 80;
const HEADER_COLS: usize = 8;
const PAYLOAD_COLS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterleaveMode {
    Header,
    Payload,
}

/// `perm[i]` is the output position of input bit `i`.
pub fn permutation(len: usize, mode: InterleaveMode) -> Result<Vec<usize>> {
    let cols = match mode {
        InterleaveMode::Header => {
            if len != HEADER_CODED_BITS {
                return Err(Error::InvalidLength {
                    expected: format!("{HEADER_CODED_BITS} header bits"),
                    actual: len,
                });
            }
            HEADER_COLS
        }
        InterleaveMode::Payload => PAYLOAD_COLS,
    };
    let full_rows = len / cols;
    let partial = len % cols;
    // Columns left of `partial` carry one extra bit.
    let col_start = |c: usize| c * full_rows + c.min(partial);
    Ok((0..len)
        .map(|i| col_start(i % cols) + i / cols)
        .collect())
}

pub fn interleave(bits: &[u8], mode: InterleaveMode) -> Result<Vec<u8>> {
    let perm = permutation(bits.len(), mode)?;
    let mut out = vec![0u8; bits.len()];
    for (i, &p) in perm.iter().enumerate() {
        out[p] = bits[i];
    }
    Ok(out)
}

pub fn deinterleave<T: Copy + Default>(values: &[T], mode: InterleaveMode) -> Result<Vec<T>> {
    let perm = permutation(values.len(), mode)?;
    Ok(perm.iter().map(|&p| values[p]).collect())
}
