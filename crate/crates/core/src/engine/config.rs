use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metrics::Weighting;
use crate::models::ModelSpec;
use crate::optim::OptimSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayPolicy {
    #[default]
    Reservoir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplayConfig {
    pub enabled: bool,
    pub capacity: usize,
    pub mix_ratio: f64,
    pub policy: ReplayPolicy,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            enabled: false,
            capacity: 50_000,
            mix_ratio: 0.25,
            policy: ReplayPolicy::Reservoir,
        }
    }
}

/// What M₁ is compared against for bAUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardAtFirst {
    /// bAUC₁ = auc(M₁, D₀ᵗᵉˢᵗ).
    #[default]
    PretrainTest,
    /// bAUC starts at t = 2.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalPlan {
    pub online: bool,
    pub current: bool,
    pub backward: bool,
    pub initial: bool,
    pub backward_at_first: BackwardAtFirst,
    pub weighting: Weighting,
    /// Rows scored per prediction call.
    pub eval_batch_size: usize,
}

impl Default for EvalPlan {
    fn default() -> Self {
        EvalPlan {
            online: true,
            current: true,
            backward: true,
            initial: true,
            backward_at_first: BackwardAtFirst::PretrainTest,
            weighting: Weighting::Uniform,
            eval_batch_size: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub optim: OptimSpec,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub stream_epochs_per_hour: usize,
    /// Learning rate during streaming; the pretraining rate when absent.
    pub stream_learning_rate: Option<f64>,
    /// Clear optimizer moments and step count at the start of every hour.
    pub reset_optimizer: bool,
    pub seed: u64,
    pub replay: ReplayConfig,
    pub eval: EvalPlan,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSpec::default(),
            optim: OptimSpec::default(),
            batch_size: 1024,
            pretrain_epochs: 1,
            stream_epochs_per_hour: 1,
            stream_learning_rate: None,
            reset_optimizer: false,
            seed: 0,
            replay: ReplayConfig::default(),
            eval: EvalPlan::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.optim.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.stream_epochs_per_hour == 0 {
            return Err(Error::config("stream_epochs_per_hour must be at least 1"));
        }
        if let Some(lr) = self.stream_learning_rate {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::config("stream_learning_rate must be non-negative"));
            }
        }
        if !(self.replay.mix_ratio >= 0.0 && self.replay.mix_ratio.is_finite()) {
            return Err(Error::config("replay.mix_ratio must be non-negative"));
        }
        if self.eval.eval_batch_size == 0 {
            return Err(Error::config("eval.eval_batch_size must be at least 1"));
        }
        Ok(())
    }

    /// Sets the value at a dotted path such as `model.norm_mlp` or
    /// `replay.mix_ratio`. The path must already exist.
    pub fn apply_override(&mut self, path: &str, value: Value) -> Result<()> {
        let mut root = serde_json::to_value(&*self)?;
        let mut slot = &mut root;
        for key in path.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|m| m.get_mut(key))
                .ok_or_else(|| Error::config(format!("unknown config key {path:?}")))?;
        }
        *slot = value;
        let updated: RunConfig =
            serde_json::from_value(root).map_err(|e| Error::config(format!("{path}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}
