use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::RunConfig;
use crate::error::Result;

/// A named set of config overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub overrides: Vec<(String, Value)>,
}

impl Preset {
    fn new(name: &str, overrides: &[(&str, Value)]) -> Self {
        Preset {
            name: name.into(),
            overrides: overrides.iter().map(|(k, v)| ((*k).into(), v.clone())).collect(),
        }
    }

    /// Returns `base` with every override applied.
    pub fn apply(&self, base: &RunConfig) -> Result<RunConfig> {
        let mut cfg = base.clone();
        for (path, value) in &self.overrides {
            cfg.apply_override(path, value.clone())?;
        }
        Ok(cfg)
    }
}

/// Key-factor tuning for streaming performance. The last entry combines all
/// others.
pub fn free_lunch_presets() -> Vec<Preset> {
    let parts = [
        ("mlp_norm_none", vec![("model.norm_mlp", json!("none"))]),
        ("batch_size", vec![("batch_size", json!(5000))]),
        ("mlp_shape", vec![("model.mlp_widths", json!([400, 400, 400]))]),
        ("no_dropout", vec![("model.dropout", json!(0.0))]),
        ("no_embed_l2", vec![("model.l2_embed", json!(0.0))]),
    ];
    let mut out: Vec<Preset> = parts.iter().map(|(n, o)| Preset::new(n, o)).collect();
    let all: Vec<(&str, Value)> = parts.iter().flat_map(|(_, o)| o.iter().cloned()).collect();
    out.push(Preset::new("free_lunch", &all));
    out
}

pub fn preset(name: &str) -> Option<Preset> {
    free_lunch_presets().into_iter().find(|p| p.name == name)
}
