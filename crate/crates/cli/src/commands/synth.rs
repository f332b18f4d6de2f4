use streamctr_core::engine::{generate_drift_stream, DriftSpec};

use crate::cli::SynthArgs;
use crate::config::load;
use crate::error::{CliError, Result};

pub fn execute(args: &SynthArgs) -> Result<()> {
    let mut spec: DriftSpec = match &args.spec {
        Some(path) => load(path)?,
        None => DriftSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(h) = args.hours {
        spec.hours = h;
    }
    if let Some(n) = args.samples_per_hour {
        spec.samples_per_hour = n;
    }
    let stream = generate_drift_stream(&spec)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", args.out.display()));
    let mut w = csv::Writer::from_path(&args.out).map_err(csv_err)?;
    let mut header = vec!["id".to_string(), "click".to_string(), "hour".to_string()];
    header.extend(stream.field_names().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    let records = stream.raw_records();
    for (i, r) in records.iter().enumerate() {
        let mut row = vec![i.to_string(), r.label.to_string(), r.hour_stamp.clone()];
        row.extend(r.fields.iter().cloned());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io(&args.out))?;

    let oracle: Vec<f64> = stream.oracle_auc.iter().flatten().copied().collect();
    let mean_oracle = oracle.iter().sum::<f64>() / oracle.len().max(1) as f64;
    let ctr = stream.positive_ratio.iter().sum::<f64>() / stream.positive_ratio.len().max(1) as f64;
    println!(
        "wrote {} records over {} hours to {} (mean click rate {ctr:.4}, mean oracle AUC {mean_oracle:.4})",
        records.len(),
        spec.hours,
        args.out.display()
    );
    Ok(())
}
