use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backward::{backward, regularization};
use super::forward::{forward, Batch};
use super::spec::ModelSpec;
use super::state::ModelState;
use crate::error::Result;
use crate::nn::{bce_with_logits, Mode};

/// Relative errors below this denominator are measured absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter with the largest error and both estimates.
    pub worst: String,
    pub checked: usize,
    /// Coordinates whose ±h stencil flipped a ReLU, where the central
    /// difference does not estimate a derivative. Excluded from the maximum.
    pub kinks: usize,
}

fn objective(state: &ModelState, spec: &ModelSpec, batch: &Batch, mode: Mode) -> Result<(f64, Vec<bool>)> {
    let mut st = state.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cache = forward(&mut st, spec, batch, mode, &mut rng)?;
    let mut loss = 0.0;
    for (&z, &y) in cache.logits().iter().zip(&batch.labels) {
        loss += bce_with_logits(z, y)?.0;
    }
    let loss = loss / batch.size() as f64 + regularization(state, spec, batch);
    Ok((loss, cache.activation_pattern()))
}

/// Central difference, or `None` when either side changes the ReLU pattern.
fn central(pattern: &[bool], h: f64, eval: impl Fn(f64) -> Result<(f64, Vec<bool>)>) -> Result<Option<f64>> {
    let (plus, p) = eval(h)?;
    let (minus, m) = eval(-h)?;
    Ok((p == pattern && m == pattern).then(|| (plus - minus) / (2.0 * h)))
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR)
}

/// Compares the analytic gradient of the regularized mean loss with central
/// differences of step `h` over every learned scalar, sparse rows included.
/// Dropout must be off for the comparison to be meaningful.
pub fn gradient_check(state: &ModelState, spec: &ModelSpec, batch: &Batch, mode: Mode, h: f64) -> Result<GradCheck> {
    let mut st = state.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cache = forward(&mut st, spec, batch, mode, &mut rng)?;
    let pattern = cache.activation_pattern();
    let grads = backward(&st, spec, cache)?;
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
        kinks: 0,
    };
    let mut record = |name: String, ana: f64, num: Option<f64>| {
        let Some(num) = num else {
            report.kinks += 1;
            return;
        };
        let e = rel_err(ana, num);
        report.checked += 1;
        if e > report.max_rel_error || report.worst.is_empty() {
            report.max_rel_error = e.max(report.max_rel_error);
            report.worst = format!("{name} analytic {ana:.6e} numeric {num:.6e}");
        }
    };

    let mut names = Vec::new();
    state.visit_dense(|n, v| names.push((n.to_string(), v.len())));
    for (name, len) in names {
        let g = grads.dense(&name).expect("every dense tensor has a gradient").to_vec();
        for (i, &gi) in g.iter().enumerate().take(len) {
            let eval = |delta: f64| {
                let mut s = state.clone();
                s.visit_dense_mut(|n, v| {
                    if n == name {
                        v[i] += delta;
                    }
                });
                objective(&s, spec, batch, mode)
            };
            let num = central(&pattern, h, eval)?;
            record(format!("{name}[{i}]"), gi, num);
        }
    }
    if let (Some(l), Some(g)) = (&state.linear, &grads.first_order) {
        for r in 0..l.weights.len() {
            let eval = |delta: f64| {
                let mut s = state.clone();
                s.linear.as_mut().expect("linear part").weights[r] += delta;
                objective(&s, spec, batch, mode)
            };
            let num = central(&pattern, h, eval)?;
            record(format!("linear.weights[{r}]"), g.get(r).map_or(0.0, |v| v[0]), num);
        }
    }
    if let (Some(e), Some(g)) = (&state.embedding, &grads.embedding) {
        for r in 0..e.rows() {
            for k in 0..e.cols() {
                let eval = |delta: f64| {
                    let mut s = state.clone();
                    let t = s.embedding.as_mut().expect("embedding");
                    t.set(r, k, t.get(r, k) + delta);
                    objective(&s, spec, batch, mode)
                };
                let num = central(&pattern, h, eval)?;
                record(format!("embedding[{r},{k}]"), g.get(r).map_or(0.0, |v| v[k]), num);
            }
        }
    }
    Ok(report)
}
