//! Versioned TOML configuration files.
//!
//! Every file carries `schema_version = 1` at the top level; the remaining
//! keys deserialize into a strict type that rejects anything it does not
//! know. Precedence is built-in defaults, then the file, then command-line
//! flags (`--seed`, `--set path=value`, ...), with later sources winning.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use streamctr_core::data::FormatDescriptor;
use streamctr_core::engine::RunConfig;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: i64 = 1;

/// Reads `path`, checks `schema_version` and returns the other keys as JSON.
pub fn load_versioned(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_versioned(&text, path)
}

pub fn parse_versioned(text: &str, path: &Path) -> Result<Value> {
    let mut table: toml::Table = toml::from_str(text).map_err(|source| CliError::Toml {
        path: path.to_path_buf(),
        source,
    })?;
    match table.remove("schema_version") {
        Some(toml::Value::Integer(SCHEMA_VERSION)) => {}
        Some(other) => {
            return Err(CliError::Config(format!(
                "{}: unsupported schema_version {other} (expected {SCHEMA_VERSION})",
                path.display()
            )))
        }
        None => {
            return Err(CliError::Config(format!(
                "{}: missing schema_version (expected {SCHEMA_VERSION})",
                path.display()
            )))
        }
    }
    serde_json::to_value(table).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn typed<T: DeserializeOwned>(value: Value, what: &str) -> Result<T> {
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    typed(load_versioned(path)?, &path.display().to_string())
}

/// Parses a `--set` value: JSON when it parses, a bare string otherwise.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Splits `path=value`.
pub fn parse_assignment(raw: &str) -> Result<(String, Value)> {
    let (path, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected path=value, got {raw:?}")))?;
    if path.trim().is_empty() {
        return Err(CliError::Config(format!("empty path in {raw:?}")));
    }
    Ok((path.trim().to_string(), parse_value(value.trim())))
}

/// Settings for `prepare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepareConfig {
    pub data: Option<PathBuf>,
    pub pretrain_fraction: f64,
    pub holdout_fraction: f64,
    pub min_count: u32,
    pub seed: u64,
    pub format: FormatDescriptor,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            data: None,
            pretrain_fraction: 0.7,
            holdout_fraction: 0.5,
            min_count: 2,
            seed: 0,
            format: FormatDescriptor::avazu(),
        }
    }
}

/// One swept parameter. `path` is a dotted [`RunConfig`] path, or `preset`
/// to apply named engine presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: RunConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub axis: Vec<Axis>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
