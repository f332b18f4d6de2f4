use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::NormConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr,
    Fm,
    Dnn,
    DeepFm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lr, ModelKind::Fm, ModelKind::Dnn, ModelKind::DeepFm];

    /// First-order weights and global bias.
    pub fn has_linear(self) -> bool {
        matches!(self, ModelKind::Lr | ModelKind::Fm | ModelKind::DeepFm)
    }

    pub fn has_embedding(self) -> bool {
        self != ModelKind::Lr
    }

    pub fn has_pairwise(self) -> bool {
        matches!(self, ModelKind::Fm | ModelKind::DeepFm)
    }

    pub fn has_mlp(self) -> bool {
        matches!(self, ModelKind::Dnn | ModelKind::DeepFm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSpec {
    /// Embeddings are drawn from U(−r, r).
    pub embed_range: f64,
    /// Affine weights are drawn from U(−g/√fan_in, g/√fan_in).
    pub affine_gain: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            embed_range: 0.01,
            affine_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub embed_dim: usize,
    pub mlp_widths: Vec<usize>,
    pub dropout: f64,
    /// Applied to the concatenated embedding vector feeding the MLP.
    pub norm_embed: NormConfig,
    /// Applied after every hidden affine layer.
    pub norm_mlp: NormConfig,
    /// Hidden layer order affine→activation→norm instead of affine→norm→activation.
    pub norm_after_activation: bool,
    pub l2_embed: f64,
    pub l2_mlp: f64,
    pub init: InitSpec,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::Dnn,
            embed_dim: 16,
            mlp_widths: vec![400, 400, 400],
            dropout: 0.0,
            norm_embed: NormConfig::none(),
            norm_mlp: NormConfig::none(),
            norm_after_activation: false,
            l2_embed: 0.0,
            l2_mlp: 0.0,
            init: InitSpec::default(),
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kind.has_embedding() && self.embed_dim == 0 {
            return Err(Error::config("embed_dim must be at least 1"));
        }
        if self.kind.has_mlp() && (self.mlp_widths.is_empty() || self.mlp_widths.contains(&0)) {
            return Err(Error::config("mlp_widths must be a non-empty list of positive widths"));
        }
        if !(self.l2_embed >= 0.0 && self.l2_mlp >= 0.0) {
            return Err(Error::config("L2 strengths must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must lie in [0, 1)"));
        }
        if !(self.init.embed_range >= 0.0 && self.init.affine_gain >= 0.0) {
            return Err(Error::config("initialization scales must be non-negative"));
        }
        self.norm_embed.validate()?;
        self.norm_mlp.validate()
    }
}
