use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpdeError};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Record of one run; replaying `resolved_config` with `subcommand`
/// regenerates every listed output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub resolved_config: String,
    pub seeds: Vec<u64>,
    pub stream: u64,
    pub version: String,
    /// seconds since the Unix epoch at start
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub exit_code: i32,
    /// output files, relative to the output directory
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| SpdeError::config(format!("{} is not a run manifest: {e}", path.display())))
    }
}
