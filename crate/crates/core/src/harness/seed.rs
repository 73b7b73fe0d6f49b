//! Per-trial seed derivation.
//!
//! A seed for any point of a sweep is a pure function of the master seed and
//! a path of indices (cell, trial, stream). Each index is folded in with one
//! SplitMix64 finalizer round, so streams for different paths are unrelated
//! and nothing depends on which thread ran which trial.

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the node reached from `master` along `path`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &i| mix(acc ^ mix(i.wrapping_add(0x5EED))))
}
