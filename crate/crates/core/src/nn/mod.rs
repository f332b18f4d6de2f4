//! Dense primitives with explicit forward/backward passes.
//!
//! Every forward function that participates in training returns a cache that
//! the matching backward function takes by value, so a cache can only be
//! consumed once.

mod activation;
mod affine;
mod checkpoint;
mod dropout;
mod embed;
mod matrix;
mod norm;
mod sparse;

pub use activation::{bce_with_logits, relu_backward, relu_forward, sigmoid, ReluCache};
pub use affine::{affine_backward, affine_forward, AffineCache, AffineGrads};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_VERSION};
pub use dropout::{dropout_backward, dropout_forward, DropoutMask};
pub use embed::{embed_backward, embed_forward};
pub use matrix::DenseMatrix;
pub use norm::{
    norm_backward, norm_forward, norm_infer, NormCache, NormConfig, NormGrads, NormKind, NormState,
};
pub use sparse::SparseRows;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}
