//! LR, FM, the embedding+MLP DNN, and DeepFM over one shared embedding table.

mod backward;
mod forward;
mod gradcheck;
mod spec;
mod state;

pub use backward::{backward, regularization, Gradients};
pub use forward::{dnn_logits, fm_logits, forward, predict, predict_logits, Batch, ForwardCache};
pub use gradcheck::{gradient_check, GradCheck, REL_ERROR_FLOOR};
pub use spec::{InitSpec, ModelKind, ModelSpec};
pub use state::{parameter_count, HiddenLayer, LinearPart, Mlp, ModelState};
