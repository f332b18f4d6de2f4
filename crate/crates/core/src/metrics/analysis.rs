use super::auc::average_ranks;
use crate::error::{Error, Result};

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn same_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} x values for {} y values", x.len(), y.len())));
    }
    Ok(())
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    same_len(x, y)?;
    if x.len() < 2 {
        return Ok(None);
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Least-squares slope k = cov(x, y)/var(x).
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    same_len(x, y)?;
    if x.len() < 2 {
        return Ok(None);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    Ok((sxx != 0.0).then(|| sxy / sxx))
}

/// Performance drop in percent: 100·(max − last)/max.
pub fn perf_drop(curve: &[f64]) -> Result<f64> {
    let last = *curve.last().ok_or_else(|| Error::Degenerate("empty curve".into()))?;
    let best = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(best > 0.0) {
        return Err(Error::Degenerate("curve maximum must be positive".into()));
    }
    Ok(100.0 * (best - last) / best)
}

/// 1-based index of the first maximum.
pub fn optimal_step(curve: &[f64]) -> Result<usize> {
    if curve.is_empty() {
        return Err(Error::Degenerate("empty curve".into()));
    }
    let mut best = 0;
    for (i, &v) in curve.iter().enumerate() {
        if v > curve[best] {
            best = i;
        }
    }
    Ok(best + 1)
}

/// 100·(value − baseline)/baseline; `None` for a zero baseline.
pub fn relative_improvement(baseline: f64, value: f64) -> Option<f64> {
    (baseline != 0.0).then(|| 100.0 * (value - baseline) / baseline)
}
