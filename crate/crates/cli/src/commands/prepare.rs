use streamctr_core::data::{build_vocab, encode, ingest, make_schedule};

use crate::cli::PrepareArgs;
use crate::config::{load, PrepareConfig};
use crate::error::{CliError, Result};
use crate::manifest::{claim_output_dir, sha256_hex, write_json, ExperimentManifest};
use crate::prepared::{write_samples, SAMPLES_FILE, VOCAB_FILE};

pub fn resolve(args: &PrepareArgs) -> Result<PrepareConfig> {
    let mut cfg: PrepareConfig = match &args.config {
        Some(path) => load(path)?,
        None => PrepareConfig::default(),
    };
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(v) = args.pretrain_fraction {
        cfg.pretrain_fraction = v;
    }
    if let Some(v) = args.holdout_fraction {
        cfg.holdout_fraction = v;
    }
    if let Some(v) = args.min_count {
        cfg.min_count = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

pub fn execute(args: &PrepareArgs) -> Result<ExperimentManifest> {
    let cfg = resolve(args)?;
    let data = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Config("no input: pass --data or set `data` in the config".into()))?;
    let bytes = std::fs::read(&data).map_err(CliError::io(&data))?;
    claim_output_dir(&args.out)?;

    let log = ingest(bytes.as_slice(), &cfg.format)?;
    let origin = log
        .records
        .iter()
        .map(|r| r.hour_stamp.as_str())
        .min()
        .ok_or_else(|| CliError::Data(format!("{}: no records", data.display())))?
        .to_string();
    let vocab = build_vocab(&log.records, log.num_fields(), cfg.min_count)?;
    let samples = encode(&log.records, &vocab, &origin)?;
    write_samples(&args.out.join(SAMPLES_FILE), &log.field_names, &samples)?;
    let schedule = make_schedule(samples, cfg.pretrain_fraction, cfg.holdout_fraction, cfg.seed)?;
    write_json(&args.out.join(VOCAB_FILE), &vocab)?;

    let snapshot = serde_json::to_value(&cfg).map_err(streamctr_core::Error::from)?;
    let mut manifest = ExperimentManifest::new("prepare", snapshot, sha256_hex(&bytes));
    manifest.schedule = Some(schedule.meta.clone());
    manifest.field_names = Some(log.field_names.clone());
    manifest.record_output(&args.out, SAMPLES_FILE)?;
    manifest.record_output(&args.out, VOCAB_FILE)?;
    let manifest = manifest.finish(&args.out)?;

    let meta = &schedule.meta;
    println!(
        "prepared {} records over {} hours: {} pretrain ({} train / {} test) + {} streaming hours; {} fields; manifest {}",
        log.records.len(),
        meta.total_hours,
        meta.pretrain_hours,
        meta.pretrain_train,
        meta.pretrain_test,
        meta.horizon,
        log.num_fields(),
        manifest.id
    );
    if !meta.skipped_hours.is_empty() {
        println!("hours whose test half cannot support an AUC: {:?}", meta.skipped_hours);
    }
    Ok(manifest)
}
