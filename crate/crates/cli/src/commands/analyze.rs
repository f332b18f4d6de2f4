use std::path::{Path, PathBuf};

use serde::Serialize;
use streamctr_core::metrics::{ols_slope, spearman};

use super::run::{RunSummary, SweepLine, TimestampRecord, EPOCH_SWEEP_FILE, METRICS_FILE, SUMMARY_FILE};
use crate::cli::AnalyzeArgs;
use crate::error::{CliError, Result};
use crate::manifest::{read_json, read_jsonl, write_json};

struct LoadedRun {
    dir: PathBuf,
    summary: RunSummary,
    timestamps: Vec<TimestampRecord>,
    sweep: Option<Vec<SweepLine>>,
}

/// Run directories matched by the patterns, deduplicated and sorted.
pub fn collect_runs(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for pattern in patterns {
        let paths = glob::glob(pattern).map_err(|e| CliError::Config(format!("bad glob {pattern:?}: {e}")))?;
        for entry in paths {
            let path = entry.map_err(|e| CliError::Data(e.to_string()))?;
            let dir = if path.is_dir() {
                path
            } else if path.file_name().is_some_and(|n| n == SUMMARY_FILE) {
                path.parent().map(Path::to_path_buf).unwrap_or_default()
            } else {
                continue;
            };
            if dir.join(SUMMARY_FILE).is_file() {
                dirs.push(dir);
            }
        }
    }
    dirs.sort();
    dirs.dedup();
    if dirs.is_empty() {
        return Err(CliError::Config(format!("no run directories match {patterns:?}")));
    }
    Ok(dirs)
}

fn load_run(dir: PathBuf) -> Result<LoadedRun> {
    let summary: RunSummary = read_json(&dir.join(SUMMARY_FILE))?;
    let timestamps: Vec<TimestampRecord> = read_jsonl(&dir.join(METRICS_FILE))?;
    let sweep_path = dir.join(EPOCH_SWEEP_FILE);
    let sweep = if sweep_path.is_file() {
        Some(read_jsonl(&sweep_path)?)
    } else {
        None
    };
    Ok(LoadedRun {
        dir,
        summary,
        timestamps,
        sweep,
    })
}

#[derive(Debug, Serialize)]
struct RunRow<'a> {
    run: String,
    manifest_id: &'a str,
    pauc: Option<f64>,
    oauc: Option<f64>,
    cauc: Option<f64>,
    bauc: Option<f64>,
    iauc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub x: String,
    pub y: String,
    /// Runs where both values are defined.
    pub n: usize,
    /// `None` when the rank correlation is undefined (fewer than two runs or
    /// a constant input).
    pub spearman: Option<f64>,
    pub spearman_defined: bool,
    /// OLS slope k of y on x.
    pub ols_slope: Option<f64>,
}

pub fn correlate(x_name: &str, y_name: &str, pairs: &[(Option<f64>, Option<f64>)]) -> Result<Correlation> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .filter_map(|&(a, b)| Some((a?, b?)))
        .unzip();
    let rho = spearman(&x, &y)?;
    Ok(Correlation {
        x: x_name.into(),
        y: y_name.into(),
        n: x.len(),
        spearman: rho,
        spearman_defined: rho.is_some(),
        ols_slope: ols_slope(&x, &y)?,
    })
}

#[derive(Debug, Serialize)]
struct TrendRow<'a> {
    run: &'a str,
    t: usize,
    online: Option<f64>,
    current: Option<f64>,
    backward: Option<f64>,
    initial: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CurveRow<'a> {
    run: &'a str,
    t: usize,
    target: &'static str,
    epochs: usize,
    perf_drop: f64,
    optimal_step: usize,
}

#[derive(Debug, Serialize)]
struct CurveSummaryRow<'a> {
    run: &'a str,
    target: &'static str,
    timestamps: usize,
    mean_perf_drop: Option<f64>,
    mean_optimal_step: Option<f64>,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn execute(args: &AnalyzeArgs) -> Result<Vec<Correlation>> {
    let runs = collect_runs(&args.patterns)?
        .into_iter()
        .map(load_run)
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    let names: Vec<String> = runs.iter().map(|r| r.dir.display().to_string()).collect();

    write_csv(
        &args.out.join("runs.csv"),
        runs.iter().zip(&names).map(|(r, name)| RunRow {
            run: name.clone(),
            manifest_id: &r.summary.manifest_id,
            pauc: r.summary.pauc,
            oauc: r.summary.oauc.auc,
            cauc: r.summary.cauc.auc,
            bauc: r.summary.bauc.auc,
            iauc: r.summary.iauc.auc,
        }),
    )?;

    let oauc: Vec<Option<f64>> = runs.iter().map(|r| r.summary.oauc.auc).collect();
    let against = |name: &str, xs: Vec<Option<f64>>| {
        let pairs: Vec<_> = xs.into_iter().zip(oauc.iter().copied()).collect();
        correlate(name, "oauc", &pairs)
    };
    let correlations = vec![
        against("bauc", runs.iter().map(|r| r.summary.bauc.auc).collect())?,
        against("pauc", runs.iter().map(|r| r.summary.pauc).collect())?,
        against("cauc", runs.iter().map(|r| r.summary.cauc.auc).collect())?,
        against("iauc", runs.iter().map(|r| r.summary.iauc.auc).collect())?,
    ];
    write_json(
        &args.out.join("correlation.json"),
        &serde_json::json!({ "runs": runs.len(), "pairs": correlations }),
    )?;

    let auc = |e: &Option<streamctr_core::metrics::EvalResult>| e.as_ref().and_then(|e| e.auc);
    write_csv(
        &args.out.join("trends.csv"),
        runs.iter().zip(&names).flat_map(|(r, name)| {
            r.timestamps.iter().map(move |ts| TrendRow {
                run: name,
                t: ts.metrics.t,
                online: auc(&ts.metrics.online),
                current: auc(&ts.metrics.current),
                backward: auc(&ts.metrics.backward),
                initial: auc(&ts.metrics.initial),
            })
        }),
    )?;

    let swept: Vec<(&String, &Vec<SweepLine>)> = runs
        .iter()
        .zip(&names)
        .filter_map(|(r, n)| r.sweep.as_ref().map(|s| (n, s)))
        .collect();
    if !swept.is_empty() {
        let mut curves = Vec::new();
        let mut summaries = Vec::new();
        for (name, lines) in &swept {
            for target in ["current", "online"] {
                let picked: Vec<_> = lines
                    .iter()
                    .filter_map(|l| {
                        let c = if target == "current" { &l.record.current } else { &l.record.online };
                        c.as_ref().map(|c| (l.record.t, c))
                    })
                    .collect();
                for (t, c) in &picked {
                    curves.push(CurveRow {
                        run: name,
                        t: *t,
                        target,
                        epochs: c.curve.len(),
                        perf_drop: c.perf_drop,
                        optimal_step: c.optimal_step,
                    });
                }
                let n = picked.len();
                let avg = |f: fn(&streamctr_core::engine::CurveSummary) -> f64| {
                    (n > 0).then(|| picked.iter().map(|(_, c)| f(c)).sum::<f64>() / n as f64)
                };
                summaries.push(CurveSummaryRow {
                    run: name,
                    target,
                    timestamps: n,
                    mean_perf_drop: avg(|c| c.perf_drop),
                    mean_optimal_step: avg(|c| c.optimal_step as f64),
                });
            }
        }
        write_csv(&args.out.join("epoch_curves.csv"), curves)?;
        write_csv(&args.out.join("epoch_summary.csv"), summaries)?;
    }

    println!("analyzed {} runs into {}", runs.len(), args.out.display());
    for c in &correlations {
        println!(
            "  {} vs {}: n={} spearman={} slope={}",
            c.y,
            c.x,
            c.n,
            c.spearman.map_or_else(|| "undefined".into(), |v| format!("{v:.4}")),
            c.ols_slope.map_or_else(|| "undefined".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(correlations)
}
