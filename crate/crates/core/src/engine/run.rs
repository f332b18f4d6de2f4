use serde::{Deserialize, Serialize};

use super::config::{BackwardAtFirst, RunConfig};
use super::learner::{evaluate_model, Learner, PassStats};
use super::replay::{replay_mix, ExemplarBuffer};
use crate::data::{EncodedSample, StreamSchedule};
use crate::error::{Error, Result};
use crate::metrics::{assemble_series, optimal_step, perf_drop, EvalResult, MetricSeries, SeriesInput};
use crate::models::ModelState;
use crate::rng::stream;

/// Hooks into the streaming loop. All methods default to no-ops.
pub trait StreamObserver {
    /// Called at hour `t` before M_{t−1} is evaluated on D_tᵗᵉˢᵗ.
    fn before_inference(&mut self, _t: usize, _model: &ModelState) -> Result<()> {
        Ok(())
    }

    /// The exact multiset trained on during hour `t`.
    fn training_set(&mut self, _t: usize, _samples: &[EncodedSample]) -> Result<()> {
        Ok(())
    }

    /// Called once M_t exists, before it is evaluated.
    fn after_update(&mut self, _t: usize, _learner: &Learner) -> Result<()> {
        Ok(())
    }
}

impl StreamObserver for () {}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub learner: Learner,
    /// M₀ on D₀ᵗᵉˢᵗ.
    pub pretrain_eval: EvalResult,
    pub passes: Vec<PassStats>,
}

/// Trains `pretrain_epochs` passes over D₀ᵗʳᵃⁱⁿ and evaluates on D₀ᵗᵉˢᵗ.
pub fn pretrain(schedule: &StreamSchedule, cfg: &RunConfig, vocab_sizes: &[usize]) -> Result<Pretrained> {
    cfg.validate()?;
    if schedule.pretrain_train.is_empty() {
        return Err(Error::Degenerate("pretraining block has no training samples".into()));
    }
    let mut learner = Learner::new(cfg.model.clone(), cfg.optim.clone(), vocab_sizes, cfg.seed)?;
    let mut passes = Vec::with_capacity(cfg.pretrain_epochs);
    for epoch in 0..cfg.pretrain_epochs {
        passes.push(learner.train_pass(
            &schedule.pretrain_train,
            cfg.batch_size,
            cfg.seed,
            &[stream::PRETRAIN_BATCHES, epoch as u64],
            "pretrain",
        )?);
    }
    let pretrain_eval = evaluate_model(
        &learner.state,
        &learner.spec,
        &schedule.pretrain_test,
        cfg.eval.eval_batch_size,
    )?;
    Ok(Pretrained {
        learner,
        pretrain_eval,
        passes,
    })
}

#[derive(Debug, Clone)]
pub struct StreamOutcome {
    pub series: MetricSeries,
    /// M_T.
    pub learner: Learner,
    /// Per hour, per epoch.
    pub passes: Vec<Vec<PassStats>>,
}

fn switch_to_stream_rate(learner: &mut Learner, cfg: &RunConfig) {
    if let Some(lr) = cfg.stream_learning_rate {
        learner.optim_spec.learning_rate = lr;
    }
}

fn maybe<F: FnOnce() -> Result<EvalResult>>(on: bool, f: F) -> Result<Option<EvalResult>> {
    on.then(f).transpose()
}

/// The inference→updating loop over D₁..D_T starting from M₀.
pub fn stream_run(
    pre: &Pretrained,
    schedule: &StreamSchedule,
    cfg: &RunConfig,
    observer: &mut dyn StreamObserver,
) -> Result<StreamOutcome> {
    cfg.validate()?;
    let horizon = schedule.horizon();
    if horizon < 2 {
        return Err(Error::Degenerate(format!("horizon {horizon} is below 2")));
    }
    let m0 = &pre.learner;
    let mut learner = m0.clone();
    // A zero streaming rate means frozen weights; the optimizer rejects η=0,
    // so such runs skip the update step entirely.
    let frozen = cfg.stream_learning_rate == Some(0.0);
    switch_to_stream_rate(&mut learner, cfg);
    let chunk = cfg.eval.eval_batch_size;
    let plan = &cfg.eval;
    let mut buffer = cfg
        .replay
        .enabled
        .then(|| ExemplarBuffer::new(cfg.replay.capacity, cfg.seed));
    if let Some(b) = &mut buffer {
        b.absorb(&schedule.pretrain_train);
    }

    let mut input = SeriesInput {
        pretrain: Some(pre.pretrain_eval),
        ..SeriesInput::default()
    };
    let mut passes = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        observer.before_inference(t, &learner.state)?;
        if t >= 2 {
            input.online.push(maybe(plan.online, || {
                evaluate_model(&learner.state, &learner.spec, schedule.test_set(t), chunk)
            })?);
        }
        if cfg.reset_optimizer {
            learner.reset_optimizer();
        }
        let hour = schedule.train_set(t);
        let mixed;
        let train: &[EncodedSample] = match &mut buffer {
            Some(b) => {
                mixed = replay_mix(hour, b, cfg.replay.mix_ratio);
                &mixed
            }
            None => hour,
        };
        observer.training_set(t, train)?;
        let mut hour_passes = Vec::with_capacity(cfg.stream_epochs_per_hour);
        if !frozen {
            for epoch in 0..cfg.stream_epochs_per_hour {
                hour_passes.push(learner.train_pass(
                    train,
                    cfg.batch_size,
                    cfg.seed,
                    &[stream::STREAM_BATCHES, t as u64, epoch as u64],
                    &format!("hour {t}"),
                )?);
            }
        }
        passes.push(hour_passes);
        observer.after_update(t, &learner)?;
        input.current.push(maybe(plan.current, || {
            evaluate_model(&learner.state, &learner.spec, schedule.test_set(t), chunk)
        })?);
        let backward_on = plan.backward && !(t == 1 && plan.backward_at_first == BackwardAtFirst::Skip);
        input.backward.push(maybe(backward_on, || {
            evaluate_model(&learner.state, &learner.spec, schedule.test_set(t - 1), chunk)
        })?);
    }
    for t in 2..=horizon {
        input.initial.push(maybe(plan.initial, || {
            evaluate_model(&m0.state, &m0.spec, schedule.test_set(t), chunk)
        })?);
    }
    let series = assemble_series(horizon, input, plan.weighting)?;
    Ok(StreamOutcome {
        series,
        learner,
        passes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub curve: Vec<f64>,
    pub perf_drop: f64,
    pub optimal_step: usize,
}

impl CurveSummary {
    fn from_curve(curve: Vec<Option<f64>>) -> Result<Option<Self>> {
        let Some(curve) = curve.into_iter().collect::<Option<Vec<f64>>>() else {
            return Ok(None);
        };
        Ok(Some(CurveSummary {
            perf_drop: perf_drop(&curve)?,
            optimal_step: optimal_step(&curve)?,
            curve,
        }))
    }
}

/// Per-epoch snapshots at one timestamp. A curve is absent when its test
/// set is missing or cannot support an AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSweepRecord {
    pub t: usize,
    /// Snapshots on D_tᵗᵉˢᵗ.
    pub current: Option<CurveSummary>,
    /// Snapshots on D_{t+1}ᵗᵉˢᵗ.
    pub online: Option<CurveSummary>,
}

/// Trains `epochs` passes per hour and scores the model after every pass.
/// The last pass's model is carried forward. Only timestamps with
/// `(t − 1) % stride == 0` are scored; training happens at every hour.
pub fn epoch_sweep(
    pre: &Pretrained,
    schedule: &StreamSchedule,
    cfg: &RunConfig,
    epochs: usize,
    stride: usize,
) -> Result<Vec<EpochSweepRecord>> {
    cfg.validate()?;
    if epochs == 0 || stride == 0 {
        return Err(Error::config("epoch sweep needs epochs ≥ 1 and stride ≥ 1"));
    }
    let horizon = schedule.horizon();
    let chunk = cfg.eval.eval_batch_size;
    let mut learner = pre.learner.clone();
    switch_to_stream_rate(&mut learner, cfg);
    let mut buffer = cfg
        .replay
        .enabled
        .then(|| ExemplarBuffer::new(cfg.replay.capacity, cfg.seed));
    if let Some(b) = &mut buffer {
        b.absorb(&schedule.pretrain_train);
    }
    let mut records = Vec::new();
    for t in 1..=horizon {
        if cfg.reset_optimizer {
            learner.reset_optimizer();
        }
        let hour = schedule.train_set(t);
        let mixed;
        let train: &[EncodedSample] = match &mut buffer {
            Some(b) => {
                mixed = replay_mix(hour, b, cfg.replay.mix_ratio);
                &mixed
            }
            None => hour,
        };
        let scored = (t - 1) % stride == 0;
        let (mut cur, mut onl) = (Vec::new(), Vec::new());
        for epoch in 0..epochs {
            learner.train_pass(
                train,
                cfg.batch_size,
                cfg.seed,
                &[stream::STREAM_BATCHES, t as u64, epoch as u64],
                &format!("hour {t}"),
            )?;
            if scored {
                cur.push(evaluate_model(&learner.state, &learner.spec, schedule.test_set(t), chunk)?.auc);
                if t < horizon {
                    onl.push(evaluate_model(&learner.state, &learner.spec, schedule.test_set(t + 1), chunk)?.auc);
                }
            }
        }
        if scored {
            records.push(EpochSweepRecord {
                t,
                current: CurveSummary::from_curve(cur)?,
                online: if t < horizon { CurveSummary::from_curve(onl)? } else { None },
            });
        }
    }
    Ok(records)
}
