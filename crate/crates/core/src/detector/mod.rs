//! Signal detector: channelizer, block store and header detector.

pub mod channelizer;
pub mod header;
pub mod store;

pub use channelizer::{channelize, hann, Channelizer, ChannelizerConfig, SpectralFrame};
pub use header::{DetectionEvent, DetectorConfig, HeaderDetector};
pub use store::BlockStore;
