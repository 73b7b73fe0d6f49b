//! Constraint-length 7 convolutional codes.
//!
//! The mother code is rate 1/3 with generators 133, 171, 165 (octal). The
//! header uses the first two generators as a rate 1/2 tail-biting code so
//! that 40 information bits map to exactly 80 coded bits. Payloads are
//! zero-tailed (6 flush bits) at rate 1/3, or at rate 2/3 by keeping
//! `(g0, g1)` on even steps and `g0` on odd steps.
//!
//! Register convention: the 6-bit state holds past inputs with the most
//! recent one in bit 5; the current input enters as bit 6 of the 7-bit
//! window that the generators are masked against.

use crate::error::{Error, Result};

pub const CONSTRAINT_LENGTH: usize = 7;
pub const MEMORY: usize = CONSTRAINT_LENGTH - 1;
pub const N_STATES: usize = 1 << MEMORY;
pub const GENERATORS: [u8; 3] = [0o133, 0o171, 0o165];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeMode {
    /// Rate 1/2, tail-biting (header).
    HalfTailBiting,
    /// Rate 1/3, zero-tail (payload).
    ThirdZeroTail,
    /// Rate 2/3 punctured from the mother code, zero-tail (payload).
    TwoThirdsZeroTail,
}

impl CodeMode {
    pub fn is_tail_biting(self) -> bool {
        matches!(self, CodeMode::HalfTailBiting)
    }

    /// Trellis steps for `n` information bits.
    pub fn steps(self, n: usize) -> usize {
        if self.is_tail_biting() {
            n
        } else {
            n + MEMORY
        }
    }

    /// Generator indices transmitted at trellis step `step`.
    pub fn kept_outputs(self, step: usize) -> &'static [usize] {
        match self {
            CodeMode::HalfTailBiting => &[0, 1],
            CodeMode::ThirdZeroTail => &[0, 1, 2],
            CodeMode::TwoThirdsZeroTail => {
                if step.is_multiple_of(2) {
                    &[0, 1]
                } else {
                    &[0]
                }
            }
        }
    }

    /// Coded length for `n` information bits.
    pub fn coded_len(self, n: usize) -> usize {
        match self {
            CodeMode::HalfTailBiting => 2 * n,
            CodeMode::ThirdZeroTail => 3 * (n + MEMORY),
            CodeMode::TwoThirdsZeroTail => (3 * (n + MEMORY)).div_ceil(2),
        }
    }

    /// Initial encoder state: zero, or the last six inputs for tail-biting.
    pub fn initial_state(self, info: &[u8]) -> usize {
        if !self.is_tail_biting() {
            return 0;
        }
        let n = info.len();
        (0..MEMORY).fold(0, |state, k| {
            // bit (5 - k) holds x[n - 1 - k], wrapping for short blocks
            let idx = (n - 1 - (k % n)) % n;
            state | (usize::from(info[idx] & 1) << (MEMORY - 1 - k))
        })
    }
}

/// Output bit of generator `g` when `input` enters register `state`.
#[inline]
pub fn generator_output(state: usize, input: u8, g: usize) -> u8 {
    let window = (usize::from(input) << MEMORY) | state;
    ((window & usize::from(GENERATORS[g])).count_ones() & 1) as u8
}

#[inline]
pub fn next_state(state: usize, input: u8) -> usize {
    ((usize::from(input) << MEMORY) | state) >> 1
}

/// Packed mother-code output `c0 | c1 << 1 | c2 << 2` for every (state, input).
pub(crate) const OUTPUT_TABLE: [[u8; 2]; N_STATES] = {
    let mut table = [[0u8; 2]; N_STATES];
    let mut s = 0;
    while s < N_STATES {
        let mut u = 0;
        while u < 2 {
            let window = (u << MEMORY) | s;
            let mut packed = 0u8;
            let mut g = 0;
            while g < 3 {
                let parity = ((window & GENERATORS[g] as usize).count_ones() & 1) as u8;
                packed |= parity << g;
                g += 1;
            }
            table[s][u] = packed;
            u += 1;
        }
        s += 1;
    }
    table
};

pub fn conv_encode(info: &[u8], mode: CodeMode) -> Result<Vec<u8>> {
    if info.is_empty() {
        return Err(Error::InvalidLength {
            expected: "at least one information bit".into(),
            actual: 0,
        });
    }
    let mut input = info.to_vec();
    if !mode.is_tail_biting() {
        input.extend(std::iter::repeat_n(0, MEMORY));
    }
    let mut state = mode.initial_state(info);
    let mut out = Vec::with_capacity(mode.coded_len(info.len()));
    for (step, &u) in input.iter().enumerate() {
        let packed = OUTPUT_TABLE[state][usize::from(u & 1)];
        for &g in mode.kept_outputs(step) {
            out.push((packed >> g) & 1);
        }
        state = next_state(state, u & 1);
    }
    debug_assert!(!mode.is_tail_biting() || state == mode.initial_state(info));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_header_encodes_to_zeros() {
        let out = conv_encode(&[0; 40], CodeMode::HalfTailBiting).unwrap();
        assert_eq!(out, vec![0; 80]);
    }

    #[test]
    fn coded_lengths() {
        for n in [1, 7, 40, 470] {
            for mode in [
                CodeMode::HalfTailBiting,
                CodeMode::ThirdZeroTail,
                CodeMode::TwoThirdsZeroTail,
            ] {
                let out = conv_encode(&vec![1; n], mode).unwrap();
                assert_eq!(out.len(), mode.coded_len(n), "{mode:?} n={n}");
            }
        }
        // payload + CRC of a 58-byte packet
        assert_eq!(CodeMode::ThirdZeroTail.coded_len(8 * 60), 1458);
        assert_eq!(CodeMode::TwoThirdsZeroTail.coded_len(8 * 125), 1509);
    }

    #[test]
    fn impulse_response_is_generator_taps() {
        let mut info = vec![0u8; 10];
        info[0] = 1;
        let out = conv_encode(&info, CodeMode::ThirdZeroTail).unwrap();
        for t in 0..CONSTRAINT_LENGTH {
            for g in 0..3 {
                let tap = (GENERATORS[g] >> (MEMORY - t)) & 1;
                assert_eq!(out[3 * t + g], tap, "step {t} generator {g}");
            }
        }
        assert!(out[3 * CONSTRAINT_LENGTH..].iter().all(|&b| b == 0));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(conv_encode(&[], CodeMode::ThirdZeroTail).is_err());
    }

    #[test]
    fn tail_biting_state_wraps_short_blocks() {
        // For n = 3 the register is the cyclic extension x2 x1 x0 x2 x1 x0.
        let info = [1, 0, 1];
        assert_eq!(CodeMode::HalfTailBiting.initial_state(&info), 0b101_101);
        let out = conv_encode(&info, CodeMode::HalfTailBiting).unwrap();
        assert_eq!(out.len(), 6);
    }
}
