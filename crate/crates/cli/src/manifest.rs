use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use streamctr_core::data::ScheduleMeta;

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record for one `prepare` or `run` invocation. The id depends
/// only on the kind, the config snapshot and the input fingerprint, so
/// repeating an invocation reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub id: String,
    pub kind: String,
    pub engine_version: String,
    pub config: Value,
    /// SHA-256 of the input this invocation consumed.
    pub dataset_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_names: Option<Vec<String>>,
    pub started_at: String,
    pub finished_at: String,
    /// Output file (relative to the manifest) → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

impl ExperimentManifest {
    pub fn new(kind: &str, config: Value, dataset_fingerprint: String) -> Self {
        let mut h = Sha256::new();
        h.update(kind.as_bytes());
        h.update([0]);
        h.update(config.to_string().as_bytes());
        h.update([0]);
        h.update(dataset_fingerprint.as_bytes());
        let id = hex(&h.finalize())[..16].to_string();
        ExperimentManifest {
            id,
            kind: kind.to_string(),
            engine_version: streamctr_core::VERSION.to_string(),
            config,
            dataset_fingerprint,
            parent: None,
            schedule: None,
            field_names: None,
            started_at: now(),
            finished_at: String::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Hashes `dir/name` into the output table.
    pub fn record_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(CliError::io(&path))?;
        self.outputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    /// Stamps the end time and writes `manifest.json`. Refuses to replace an
    /// existing manifest.
    pub fn finish(mut self, dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            return Err(CliError::Config(format!(
                "{} already exists; manifests are never overwritten, pick a fresh output directory",
                path.display()
            )));
        }
        self.finished_at = now();
        write_json(&path, &self)?;
        Ok(self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(CliError::io(&path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

/// Fails early when `dir` already holds a manifest, then creates it.
pub fn claim_output_dir(dir: &Path) -> Result<()> {
    if dir.join(MANIFEST_FILE).exists() {
        return Err(CliError::Config(format!(
            "{} already holds a manifest; pick a fresh output directory",
            dir.display()
        )));
    }
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(streamctr_core::Error::from)?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// One compact JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(&row).map_err(streamctr_core::Error::from)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(CliError::io(path))
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_is_a_function_of_inputs() {
        let a = ExperimentManifest::new("run", serde_json::json!({"seed": 1}), "abc".into());
        let b = ExperimentManifest::new("run", serde_json::json!({"seed": 1}), "abc".into());
        let c = ExperimentManifest::new("run", serde_json::json!({"seed": 2}), "abc".into());
        assert_eq!(a.id, b.id);
        assert_ne!(a.id, c.id);
        assert_eq!(a.id.len(), 16);
    }

    #[test]
    fn manifests_are_not_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let m = ExperimentManifest::new("run", Value::Null, "x".into());
        m.clone().finish(dir.path()).unwrap();
        assert!(matches!(m.finish(dir.path()), Err(CliError::Config(_))));
        assert!(claim_output_dir(dir.path()).is_err());
        assert_eq!(ExperimentManifest::read(dir.path()).unwrap().kind, "run");
    }
}
