//! LR-FHSS direct-to-satellite transceiver.

pub mod bits;
pub mod channel;
pub mod detector;
pub mod error;
pub mod harness;
pub mod modem;
pub mod par;
pub mod params;
pub mod rxchain;
pub mod txchain;

pub use error::{Error, Result};
