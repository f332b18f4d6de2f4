use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use streamctr_core::engine::{preset, RunConfig};
use streamctr_core::metrics::relative_improvement;

use super::run::{fmt, run_one, RunSummary};
use crate::cli::{RunExtras, SweepArgs};
use crate::config::{load, SweepSpec};
use crate::error::{CliError, Result};
use crate::manifest::write_json;
use crate::prepared;

/// One point of the grid, before seeds are applied.
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub index: usize,
    pub assignments: Vec<(String, Value)>,
    pub config: RunConfig,
}

impl Cell {
    pub fn label(&self) -> String {
        if self.assignments.is_empty() {
            return "base".into();
        }
        self.assignments
            .iter()
            .map(|(p, v)| match v {
                Value::String(s) => format!("{p}={s}"),
                other => format!("{p}={other}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn apply(cfg: &RunConfig, path: &str, value: &Value) -> Result<RunConfig> {
    if path == "preset" {
        let name = value
            .as_str()
            .ok_or_else(|| CliError::Config(format!("preset values must be names, got {value}")))?;
        let p = preset(name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
        return Ok(p.apply(cfg)?);
    }
    let mut out = cfg.clone();
    out.apply_override(path, value.clone())?;
    Ok(out)
}

/// Cartesian product of the axes in declaration order, last axis fastest.
pub fn expand(spec: &SweepSpec) -> Result<Vec<Cell>> {
    let mut cells = vec![(Vec::new(), spec.base.clone())];
    for axis in &spec.axis {
        if axis.values.is_empty() {
            return Err(CliError::Config(format!("axis {:?} has no values", axis.path)));
        }
        let mut next = Vec::with_capacity(cells.len() * axis.values.len());
        for (assigned, cfg) in &cells {
            for v in &axis.values {
                let mut a: Vec<(String, Value)> = assigned.clone();
                a.push((axis.path.clone(), v.clone()));
                next.push((a, apply(cfg, &axis.path, v)?));
            }
        }
        cells = next;
    }
    cells
        .into_iter()
        .enumerate()
        .map(|(index, (assignments, config))| {
            config.validate()?;
            Ok(Cell {
                index,
                assignments,
                config,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub cell: usize,
    pub label: String,
    pub seeds: usize,
    pub pauc: Option<f64>,
    pub oauc: Option<f64>,
    pub cauc: Option<f64>,
    pub bauc: Option<f64>,
    pub iauc: Option<f64>,
    /// Relative improvement (%) of each metric over cell 0.
    pub pauc_rel: Option<f64>,
    pub oauc_rel: Option<f64>,
    pub cauc_rel: Option<f64>,
    pub bauc_rel: Option<f64>,
    pub iauc_rel: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<Vec<f64>>>()?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn compare(cells: &[Cell], results: &[Vec<RunSummary>]) -> Vec<ComparisonRow> {
    let metrics = |runs: &[RunSummary]| {
        [
            mean(runs.iter().map(|r| r.pauc)),
            mean(runs.iter().map(|r| r.oauc.auc)),
            mean(runs.iter().map(|r| r.cauc.auc)),
            mean(runs.iter().map(|r| r.bauc.auc)),
            mean(runs.iter().map(|r| r.iauc.auc)),
        ]
    };
    let base = results.first().map(|r| metrics(r)).unwrap_or([None; 5]);
    cells
        .iter()
        .zip(results)
        .map(|(cell, runs)| {
            let m = metrics(runs);
            let rel = |i: usize| match (base[i], m[i]) {
                (Some(b), Some(v)) => relative_improvement(b, v),
                _ => None,
            };
            ComparisonRow {
                cell: cell.index,
                label: cell.label(),
                seeds: runs.len(),
                pauc: m[0],
                oauc: m[1],
                cauc: m[2],
                bauc: m[3],
                iauc: m[4],
                pauc_rel: rel(0),
                oauc_rel: rel(1),
                cauc_rel: rel(2),
                bauc_rel: rel(3),
                iauc_rel: rel(4),
            }
        })
        .collect()
}

fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io(path))
}

fn cell_dir(out: &Path, cell: usize, seed: u64) -> PathBuf {
    out.join(format!("cell-{cell:03}")).join(format!("seed-{seed}"))
}

pub fn execute(args: &SweepArgs) -> Result<Vec<ComparisonRow>> {
    let spec: SweepSpec = load(&args.spec)?;
    if spec.seeds.is_empty() {
        return Err(CliError::Config("sweep needs at least one seed".into()));
    }
    if args.parallelism == 0 {
        return Err(CliError::Config("--parallelism must be at least 1".into()));
    }
    let cells = expand(&spec)?;
    eprintln!(
        "sweep: {} cells x {} seeds = {} runs",
        cells.len(),
        spec.seeds.len(),
        cells.len() * spec.seeds.len()
    );
    if args.dry_run {
        for c in &cells {
            println!("cell {:03}: {}", c.index, c.label());
        }
        return Ok(Vec::new());
    }
    let prepared = prepared::load(&args.prepared)?;
    std::fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    write_json(&args.out.join("sweep.json"), &serde_json::json!({ "seeds": spec.seeds, "cells": cells }))?;

    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c.index, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.parallelism)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let extras = RunExtras::default();
    let outcomes: Vec<Result<RunSummary>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(cell, seed)| {
                let mut cfg = cells[cell].config.clone();
                cfg.seed = seed;
                run_one(&prepared, &cfg, &cell_dir(&args.out, cell, seed), &extras)
            })
            .collect()
    });
    let mut results: Vec<Vec<RunSummary>> = vec![Vec::new(); cells.len()];
    for ((cell, _), outcome) in jobs.iter().zip(outcomes) {
        results[*cell].push(outcome?);
    }

    let rows = compare(&cells, &results);
    write_comparison_csv(&args.out.join("comparison.csv"), &rows)?;
    write_json(&args.out.join("comparison.json"), &rows)?;
    println!("{:>4}  {:>8} {:>8} {:>8} {:>8} {:>8}  {:>9}  label", "cell", "pAUC", "oAUC", "cAUC", "bAUC", "iAUC", "oAUC rel%");
    for r in &rows {
        println!(
            "{:>4}  {:>8} {:>8} {:>8} {:>8} {:>8}  {:>9}  {}",
            r.cell,
            fmt(r.pauc),
            fmt(r.oauc),
            fmt(r.cauc),
            fmt(r.bauc),
            fmt(r.iauc),
            r.oauc_rel.map_or_else(|| "n/a".into(), |x| format!("{x:+.4}")),
            r.label
        );
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Axis;
    use serde_json::json;

    fn spec(axes: Vec<(&str, Vec<Value>)>) -> SweepSpec {
        SweepSpec {
            base: RunConfig::default(),
            seeds: vec![0],
            axis: axes
                .into_iter()
                .map(|(p, v)| Axis {
                    path: p.into(),
                    values: v,
                })
                .collect(),
        }
    }

    #[test]
    fn grid_is_cartesian_with_last_axis_fastest() {
        let s = spec(vec![
            ("model.embed_dim", vec![json!(4), json!(32), json!(60)]),
            ("model.dropout", vec![json!(0.0), json!(0.5)]),
        ]);
        let cells = expand(&s).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1].config.model.embed_dim, 4);
        assert_eq!(cells[1].config.model.dropout, 0.5);
        assert_eq!(cells[5].config.model.embed_dim, 60);
        assert_eq!(cells[5].label(), "model.embed_dim=60 model.dropout=0.5");
    }

    #[test]
    fn presets_and_bad_paths() {
        let cells = expand(&spec(vec![("preset", vec![json!("no_dropout")])])).unwrap();
        assert_eq!(cells[0].config.model.dropout, 0.0);
        assert!(expand(&spec(vec![("preset", vec![json!("nope")])])).is_err());
        assert!(expand(&spec(vec![("model.embed_dims", vec![json!(4)])])).is_err());
        assert!(expand(&spec(vec![("model.dropout", vec![json!(1.5)])])).is_err());
    }

    #[test]
    fn relative_improvement_is_against_the_first_cell() {
        let cells = expand(&spec(vec![("model.embed_dim", vec![json!(4), json!(8)])])).unwrap();
        let summary = |o: f64| RunSummary {
            manifest_id: String::new(),
            horizon: 2,
            weighting: Default::default(),
            pretrain: None,
            pauc: Some(0.7),
            oauc: streamctr_core::metrics::Aggregate {
                auc: Some(o),
                logloss: None,
                terms: 1,
                skipped: vec![],
            },
            cauc: streamctr_core::metrics::Aggregate {
                auc: None,
                logloss: None,
                terms: 0,
                skipped: vec![],
            },
            bauc: streamctr_core::metrics::Aggregate {
                auc: Some(0.6),
                logloss: None,
                terms: 1,
                skipped: vec![],
            },
            iauc: streamctr_core::metrics::Aggregate {
                auc: Some(0.6),
                logloss: None,
                terms: 1,
                skipped: vec![],
            },
            pretrain_passes: vec![],
            stream_samples: 0,
            stream_dropped: 0,
        };
        let rows = compare(&cells, &[vec![summary(0.5), summary(0.7)], vec![summary(0.66)]]);
        assert_eq!(rows[0].oauc, Some(0.6));
        assert_eq!(rows[0].oauc_rel, Some(0.0));
        assert!((rows[1].oauc_rel.unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(rows[1].cauc, None);
    }
}
