//! On-disk layout of a prepared dataset directory.
//!
//! `manifest.json` (kind `prepare`) holds the prepare settings and the
//! schedule summary, `vocab.json` the per-field token tables and
//! `samples.csv` the encoded stream as `hour_index,label,<field...>`.
//! Loading re-derives the schedule from the samples and checks it against
//! the manifest.

use std::path::Path;

use streamctr_core::data::{make_schedule, EncodedSample, StreamSchedule, VocabMap};

use crate::config::{typed, PrepareConfig};
use crate::error::{CliError, Result};
use crate::manifest::{read_json, sha256_hex, ExperimentManifest};

pub const VOCAB_FILE: &str = "vocab.json";
pub const SAMPLES_FILE: &str = "samples.csv";

pub struct Prepared {
    pub manifest: ExperimentManifest,
    pub vocab_sizes: Vec<usize>,
    pub schedule: StreamSchedule,
}

pub fn write_samples(path: &Path, field_names: &[String], samples: &[EncodedSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut header = vec!["hour_index".to_string(), "label".to_string()];
    header.extend(field_names.iter().cloned());
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for s in samples {
        row.clear();
        row.push(s.hour_index.to_string());
        row.push(s.label.to_string());
        row.extend(s.field_indices.iter().map(u32::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn read_samples(path: &Path, num_fields: usize) -> Result<Vec<EncodedSample>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let bad = |what: &str| CliError::Data(format!("{}: row {}: {what}", path.display(), i + 2));
        let rec = rec.map_err(|e| bad(&e.to_string()))?;
        if rec.len() != num_fields + 2 {
            return Err(bad(&format!("expected {} columns, found {}", num_fields + 2, rec.len())));
        }
        let num = |j: usize| rec[j].parse::<u32>().map_err(|_| bad(&format!("column {} is not an index", j + 1)));
        let label = num(1)?;
        if label > 1 {
            return Err(bad("label must be 0 or 1"));
        }
        out.push(EncodedSample {
            hour_index: num(0)?,
            label: label as u8,
            field_indices: (2..num_fields + 2).map(num).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

pub fn load(dir: &Path) -> Result<Prepared> {
    let manifest = ExperimentManifest::read(dir)?;
    if manifest.kind != "prepare" {
        return Err(CliError::Data(format!(
            "{} holds a {:?} manifest, expected a prepared dataset",
            dir.display(),
            manifest.kind
        )));
    }
    let cfg: PrepareConfig = typed(manifest.config.clone(), "prepare manifest")?;
    let vocab: VocabMap = read_json(&dir.join(VOCAB_FILE))?;
    let samples_path = dir.join(SAMPLES_FILE);
    let bytes = std::fs::read(&samples_path).map_err(CliError::io(&samples_path))?;
    if manifest.outputs.get(SAMPLES_FILE) != Some(&sha256_hex(&bytes)) {
        return Err(CliError::Data(format!(
            "{} does not match the digest recorded in its manifest",
            samples_path.display()
        )));
    }
    let samples = read_samples(&samples_path, vocab.num_fields())?;
    let schedule = make_schedule(samples, cfg.pretrain_fraction, cfg.holdout_fraction, cfg.seed)?;
    if manifest.schedule.as_ref() != Some(&schedule.meta) {
        return Err(CliError::Data(format!(
            "{}: schedule rebuilt from samples differs from the manifest",
            dir.display()
        )));
    }
    Ok(Prepared {
        vocab_sizes: vocab.sizes(),
        manifest,
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let samples = vec![
            EncodedSample { field_indices: vec![1, 0, 7], label: 1, hour_index: 0 },
            EncodedSample { field_indices: vec![2, 3, 0], label: 0, hour_index: 5 },
        ];
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        write_samples(&path, &names, &samples).unwrap();
        assert_eq!(read_samples(&path, 3).unwrap(), samples);
        assert!(matches!(read_samples(&path, 2), Err(CliError::Data(_))));
    }
}
