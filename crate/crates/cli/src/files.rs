//! On-disk records shared between subcommands.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use lrfhss::channel::ChannelConfig;
use lrfhss::modem::ModemConfig;
use lrfhss::params::DataRateProfile;
use lrfhss::txchain::PacketBlocks;

use crate::CliError;

/// Output of `tx`: the packet plus the profile it was built for.
///
/// Block bits are hex strings (MSB first, zero-padded to a nibble) and the
/// hopping plan is an array of channel indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketFile {
    pub profile: DataRateProfile,
    #[serde(flatten)]
    pub blocks: PacketBlocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Hops back to back, each in its own channel's baseband at 8 samples per symbol.
    Narrowband,
    /// One composite across the operating band.
    Fullband,
}

/// What the IQ sidecar's `packet` field holds for files written here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureMeta {
    pub packet: PacketFile,
    pub modem: ModemConfig,
    pub layout: Layout,
    /// Silence ahead of the first header, symbols.
    pub lead_symbols: usize,
    /// Impairments applied by `chan`, if any.
    #[serde(default)]
    pub channel: Option<ChannelConfig>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| lrfhss::Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| lrfhss::Error::json(path, e).into())
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| lrfhss::Error::json(path.unwrap_or("-".as_ref()), e))?;
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| lrfhss::Error::io(p, e).into()),
        None => {
            // a closed pipe (`| head`) is not an error worth reporting
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            Ok(())
        }
    }
}
