//! TOML run configuration.
//!
//! Every table mirrors a config struct in [`crate::harness`] field for
//! field; missing keys take the struct default and unknown keys are
//! rejected. Errors carry the 1-based line of the offending key.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::harness::{BanditRunConfig, FleetRunConfig};

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses `text` into `T`, prefixing errors with `origin` and a line number.
pub fn parse_toml<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let msg = e.message().trim_end().to_string();
        match e.span() {
            Some(span) => Error::Config(format!("{origin}:{}: {msg}", line_of(text, span.start))),
            None => Error::Config(format!("{origin}: {msg}")),
        }
    })
}

pub fn parse_bandit_config(text: &str, origin: &str) -> Result<BanditRunConfig> {
    let c: BanditRunConfig = parse_toml(text, origin)?;
    c.validate().map_err(|e| located(origin, e))?;
    Ok(c)
}

pub fn parse_fleet_config(text: &str, origin: &str) -> Result<FleetRunConfig> {
    let c: FleetRunConfig = parse_toml(text, origin)?;
    c.validate().map_err(|e| located(origin, e))?;
    Ok(c)
}

fn located(origin: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{origin}: {m}")),
        e => Error::Config(format!("{origin}: {e}")),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_bandit_config(path: &Path) -> Result<BanditRunConfig> {
    parse_bandit_config(&read(path)?, &path.display().to_string())
}

pub fn load_fleet_config(path: &Path) -> Result<FleetRunConfig> {
    parse_fleet_config(&read(path)?, &path.display().to_string())
}

/// Serializes a config back to TOML; the output parses to an equal value.
pub fn to_toml<T: serde::Serialize>(config: &T) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(e.to_string()))
}
