//! Receiver chain: Viterbi decoding, header and payload decoders, synchronizer.

pub mod carrier;
pub mod decode;
pub mod demap;
pub mod frontend;
pub mod receiver;
pub mod viterbi;
