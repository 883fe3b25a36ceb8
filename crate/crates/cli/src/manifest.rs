use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Written to `manifest.json` before any other output of a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub seed: u64,
    pub out_dir: String,
    /// SHA-256 of the effective configuration as written to `config.toml`.
    pub config_sha256: String,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, seed: u64, out_dir: &Path, config_text: &str) -> Self {
        RunManifest {
            command: command.into(),
            config_path: config_path.map(|p| p.display().to_string()),
            seed,
            out_dir: out_dir.display().to_string(),
            config_sha256: format!("{:x}", Sha256::digest(config_text.as_bytes())),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}
