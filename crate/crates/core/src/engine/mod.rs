//! Pretraining, the streaming inference→updating loop, epoch sweeps,
//! exemplar replay and the synthetic drift generator.

mod config;
mod learner;
mod presets;
mod replay;
mod run;
mod synth;

pub use config::{BackwardAtFirst, EvalPlan, ReplayConfig, ReplayPolicy, RunConfig};
pub use learner::{evaluate_model, Learner, PassStats};
pub use presets::{free_lunch_presets, preset, Preset};
pub use replay::{replay_mix, ExemplarBuffer};
pub use run::{
    epoch_sweep, pretrain, stream_run, CurveSummary, EpochSweepRecord, Pretrained, StreamObserver, StreamOutcome,
};
pub use synth::{generate_drift_stream, DriftSpec, SynthStream};
