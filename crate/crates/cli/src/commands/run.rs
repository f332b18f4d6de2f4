use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use streamctr_core::engine::{epoch_sweep, pretrain, stream_run, Learner, PassStats, RunConfig, StreamObserver};
use streamctr_core::metrics::{Aggregate, EvalResult, TimestampMetrics, Weighting};

use crate::cli::{RunArgs, RunExtras};
use crate::config::{load, parse_assignment};
use crate::error::{CliError, Result};
use crate::manifest::{claim_output_dir, write_json, write_jsonl, ExperimentManifest};
use crate::prepared::{self, Prepared};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SERIES_FILE: &str = "series.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const EPOCH_SWEEP_FILE: &str = "epoch_sweep.jsonl";

/// One line of `metrics.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampRecord {
    pub manifest_id: String,
    #[serde(flatten)]
    pub metrics: TimestampMetrics,
}

/// `summary.json`: the aggregates plus training statistics. Every aggregate
/// is recomputable from `metrics.jsonl` and `pretrain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub manifest_id: String,
    pub horizon: usize,
    pub weighting: Weighting,
    pub pretrain: Option<EvalResult>,
    pub pauc: Option<f64>,
    pub oauc: Aggregate,
    pub cauc: Aggregate,
    pub bauc: Aggregate,
    pub iauc: Aggregate,
    pub pretrain_passes: Vec<PassStats>,
    pub stream_samples: usize,
    pub stream_dropped: usize,
}

/// One line of `epoch_sweep.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLine {
    pub manifest_id: String,
    #[serde(flatten)]
    pub record: streamctr_core::engine::EpochSweepRecord,
}

pub fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg: RunConfig = match &args.config {
        Some(path) => load(path)?,
        None => RunConfig::default(),
    };
    for raw in &args.overrides {
        let (path, value) = parse_assignment(raw)?;
        cfg.apply_override(&path, value)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(args: &RunArgs) -> Result<RunSummary> {
    let cfg = resolve(args)?;
    let prepared = prepared::load(&args.prepared)?;
    let summary = run_one(&prepared, &cfg, &args.out, &args.extras)?;
    println!(
        "run {}: pAUC {} oAUC {} cAUC {} bAUC {} iAUC {}",
        summary.manifest_id,
        fmt(summary.pauc),
        fmt(summary.oauc.auc),
        fmt(summary.cauc.auc),
        fmt(summary.bauc.auc),
        fmt(summary.iauc.auc)
    );
    Ok(summary)
}

pub fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

struct Checkpointer {
    dir: PathBuf,
    every: usize,
    horizon: usize,
    written: Vec<String>,
}

impl Checkpointer {
    fn save(&mut self, t: usize, learner: &Learner) -> streamctr_core::Result<()> {
        let name = format!("checkpoints/m_{t:04}.ckpt");
        let file = std::fs::File::create(self.dir.join(&name))?;
        learner.checkpoint().write_to(std::io::BufWriter::new(file))?;
        self.written.push(name);
        Ok(())
    }
}

impl StreamObserver for Checkpointer {
    fn after_update(&mut self, t: usize, learner: &Learner) -> streamctr_core::Result<()> {
        if t % self.every == 0 || t == self.horizon {
            self.save(t, learner)?;
        }
        Ok(())
    }
}

/// Pretrains, streams and writes every artifact of one run into `out`.
pub fn run_one(prepared: &Prepared, cfg: &RunConfig, out: &Path, extras: &RunExtras) -> Result<RunSummary> {
    claim_output_dir(out)?;
    let snapshot = serde_json::to_value(cfg).map_err(streamctr_core::Error::from)?;
    let mut manifest = ExperimentManifest::new("run", snapshot, prepared.manifest.dataset_fingerprint.clone());
    manifest.parent = Some(prepared.manifest.id.clone());
    let id = manifest.id.clone();
    let schedule = &prepared.schedule;

    let pre = pretrain(schedule, cfg, &prepared.vocab_sizes)?;
    let outcome = match extras.checkpoint_every {
        Some(every) => {
            if every == 0 {
                return Err(CliError::Config("--checkpoint-every must be at least 1".into()));
            }
            std::fs::create_dir_all(out.join("checkpoints")).map_err(CliError::io(out))?;
            let mut ck = Checkpointer {
                dir: out.to_path_buf(),
                every,
                horizon: schedule.horizon(),
                written: Vec::new(),
            };
            ck.save(0, &pre.learner)?;
            let outcome = stream_run(&pre, schedule, cfg, &mut ck)?;
            for name in &ck.written {
                manifest.record_output(out, name)?;
            }
            outcome
        }
        None => stream_run(&pre, schedule, cfg, &mut ())?,
    };
    let series = outcome.series;

    write_jsonl(
        &out.join(METRICS_FILE),
        series.timestamps.iter().map(|m| TimestampRecord {
            manifest_id: id.clone(),
            metrics: m.clone(),
        }),
    )?;
    write_json(&out.join(SERIES_FILE), &series)?;
    let stream_passes = outcome.passes.iter().flatten();
    let summary = RunSummary {
        manifest_id: id.clone(),
        horizon: series.horizon,
        weighting: series.weighting,
        pretrain: series.pretrain.clone(),
        pauc: series.pauc,
        oauc: series.oauc.clone(),
        cauc: series.cauc.clone(),
        bauc: series.bauc.clone(),
        iauc: series.iauc.clone(),
        pretrain_passes: pre.passes.clone(),
        stream_samples: stream_passes.clone().map(|p| p.samples).sum(),
        stream_dropped: stream_passes.map(|p| p.dropped).sum(),
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    for name in [METRICS_FILE, SERIES_FILE, SUMMARY_FILE] {
        manifest.record_output(out, name)?;
    }

    if let Some(epochs) = extras.epoch_sweep {
        if epochs == 0 || extras.sweep_stride == 0 {
            return Err(CliError::Config("--epoch-sweep and --sweep-stride must be at least 1".into()));
        }
        let records = epoch_sweep(&pre, schedule, cfg, epochs, extras.sweep_stride)?;
        write_jsonl(
            &out.join(EPOCH_SWEEP_FILE),
            records.into_iter().map(|record| SweepLine {
                manifest_id: id.clone(),
                record,
            }),
        )?;
        manifest.record_output(out, EPOCH_SWEEP_FILE)?;
    }
    manifest.finish(out)?;
    Ok(summary)
}
