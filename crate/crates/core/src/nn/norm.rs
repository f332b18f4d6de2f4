//! Batch and layer normalization, `y = α·(x − μ)/√(σ² + ε) + β`, with each of
//! μ, σ², α and β switchable. Batch statistics are taken per feature over the
//! batch axis; layer statistics per row over the feature axis. Variances use
//! the biased (1/N) estimator for both the batch moments and the running
//! averages.

use serde::{Deserialize, Serialize};

use super::{DenseMatrix, Mode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    None,
    Batch,
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormConfigRepr")]
pub struct NormConfig {
    pub kind: NormKind,
    /// Subtract μ.
    pub use_mean: bool,
    /// Divide by √(σ² + ε).
    pub use_var: bool,
    /// Multiply by the learned scale α.
    pub use_alpha: bool,
    /// Add the learned shift β.
    pub use_beta: bool,
    pub epsilon: f64,
    /// EMA factor λ for the running statistics (batch kind only).
    pub momentum: f64,
}

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

impl NormConfig {
    fn full(kind: NormKind) -> Self {
        NormConfig {
            kind,
            use_mean: true,
            use_var: true,
            use_alpha: true,
            use_beta: true,
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
        }
    }

    pub fn none() -> Self {
        NormConfig {
            use_mean: false,
            use_var: false,
            use_alpha: false,
            use_beta: false,
            ..Self::full(NormKind::None)
        }
    }

    pub fn batch() -> Self {
        Self::full(NormKind::Batch)
    }

    pub fn layer() -> Self {
        Self::full(NormKind::Layer)
    }

    /// Layer normalization without the affine parameters.
    pub fn simple_ln() -> Self {
        NormConfig {
            use_alpha: false,
            use_beta: false,
            ..Self::layer()
        }
    }

    /// Variance-only layer normalization, `y = x/√(σ² + ε)`.
    pub fn vo_ln() -> Self {
        NormConfig {
            use_mean: false,
            use_alpha: false,
            use_beta: false,
            ..Self::layer()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "none" | "w/o" => Self::none(),
            "bn" | "batch" => Self::batch(),
            "ln" | "layer" => Self::layer(),
            "simple_ln" | "simpleln" => Self::simple_ln(),
            "vo_ln" | "vo-ln" | "voln" => Self::vo_ln(),
            _ => return None,
        })
    }

    /// `none` plus every valid flag combination of the batch and layer kinds.
    pub fn toggle_grid() -> Vec<NormConfig> {
        let mut out = vec![NormConfig::none()];
        for kind in [NormKind::Batch, NormKind::Layer] {
            for (m, v) in [(true, true), (true, false), (false, true)] {
                for (a, b) in [(true, true), (true, false), (false, true), (false, false)] {
                    out.push(NormConfig {
                        kind,
                        use_mean: m,
                        use_var: v,
                        use_alpha: a,
                        use_beta: b,
                        ..NormConfig::batch()
                    });
                }
            }
        }
        out
    }

    pub fn is_none(&self) -> bool {
        self.kind == NormKind::None
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == NormKind::None {
            return Ok(());
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("normalization epsilon must be positive"));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(Error::config("normalization momentum must lie in [0, 1]"));
        }
        if !self.use_mean && !self.use_var {
            return Err(Error::config(
                "normalization needs at least one of use_mean / use_var",
            ));
        }
        Ok(())
    }

    /// Number of learned parameters for a `width`-wide input.
    pub fn parameter_count(&self, width: usize) -> usize {
        if self.is_none() {
            return 0;
        }
        width * (self.use_alpha as usize + self.use_beta as usize)
    }
}

impl Default for NormConfig {
    fn default() -> Self {
        Self::none()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NormConfigRepr {
    Preset(String),
    Full(FullRepr),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FullRepr {
    kind: NormKind,
    #[serde(default = "yes")]
    use_mean: bool,
    #[serde(default = "yes")]
    use_var: bool,
    #[serde(default = "yes")]
    use_alpha: bool,
    #[serde(default = "yes")]
    use_beta: bool,
    #[serde(default = "default_eps")]
    epsilon: f64,
    #[serde(default = "default_momentum")]
    momentum: f64,
}

fn yes() -> bool {
    true
}
fn default_eps() -> f64 {
    DEFAULT_EPSILON
}
fn default_momentum() -> f64 {
    DEFAULT_MOMENTUM
}

impl TryFrom<NormConfigRepr> for NormConfig {
    type Error = String;

    fn try_from(r: NormConfigRepr) -> Result<Self, String> {
        let cfg = match r {
            NormConfigRepr::Preset(name) => {
                NormConfig::preset(&name).ok_or_else(|| format!("unknown normalization preset {name:?}"))?
            }
            NormConfigRepr::Full(f) if f.kind == NormKind::None => NormConfig::none(),
            NormConfigRepr::Full(f) => NormConfig {
                kind: f.kind,
                use_mean: f.use_mean,
                use_var: f.use_var,
                use_alpha: f.use_alpha,
                use_beta: f.use_beta,
                epsilon: f.epsilon,
                momentum: f.momentum,
            },
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

/// Learned affine parameters plus running statistics. Disabled components
/// are absent rather than frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct NormState {
    pub width: usize,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub running_mean: Option<Vec<f64>>,
    pub running_var: Option<Vec<f64>>,
}

impl NormState {
    pub fn new(cfg: &NormConfig, width: usize) -> Self {
        let active = !cfg.is_none();
        let batch = cfg.kind == NormKind::Batch;
        NormState {
            width,
            alpha: (active && cfg.use_alpha).then(|| vec![1.0; width]),
            beta: (active && cfg.use_beta).then(|| vec![0.0; width]),
            running_mean: batch.then(|| vec![0.0; width]),
            running_var: batch.then(|| vec![1.0; width]),
        }
    }
}

#[derive(Debug)]
pub struct NormCache {
    cfg: NormConfig,
    input: DenseMatrix,
    xhat: DenseMatrix,
    /// Group means (the true mean even when it is not subtracted).
    mean: Vec<f64>,
    /// Group divisors √(σ² + ε), or 1 when variance scaling is off.
    divisor: Vec<f64>,
    by_column: bool,
    /// Statistics were constants (batch kind in eval mode).
    fixed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormGrads {
    pub input: DenseMatrix,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
}

fn moments(x: &DenseMatrix, by_column: bool) -> (Vec<f64>, Vec<f64>) {
    let (rows, cols) = x.shape();
    if by_column {
        let n = rows as f64;
        let mut mean = x.column_sums();
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cols];
        for r in 0..rows {
            for ((v, &xv), &m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *v += (xv - m) * (xv - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        (mean, var)
    } else {
        let n = cols as f64;
        (0..rows)
            .map(|r| {
                let row = x.row(r);
                let m = row.iter().sum::<f64>() / n;
                let v = row.iter().map(|&xv| (xv - m) * (xv - m)).sum::<f64>() / n;
                (m, v)
            })
            .unzip()
    }
}

fn check_width(x: &DenseMatrix, state: &NormState) -> Result<()> {
    if x.cols() != state.width {
        return Err(Error::shape(format!(
            "normalization over {} features applied to width {}",
            state.width,
            x.cols()
        )));
    }
    Ok(())
}

/// Normalizes with the given group statistics and applies the affine part.
fn apply(
    x: &DenseMatrix,
    cfg: &NormConfig,
    state: &NormState,
    mean: &[f64],
    divisor: &[f64],
    by_column: bool,
) -> (DenseMatrix, DenseMatrix) {
    let c = if cfg.use_mean { 1.0 } else { 0.0 };
    let mut xhat = x.clone();
    for r in 0..x.rows() {
        for (j, v) in xhat.row_mut(r).iter_mut().enumerate() {
            let g = if by_column { j } else { r };
            *v = (*v - c * mean[g]) / divisor[g];
        }
    }
    let mut y = xhat.clone();
    for r in 0..y.rows() {
        let row = y.row_mut(r);
        if let Some(a) = &state.alpha {
            row.iter_mut().zip(a).for_each(|(v, a)| *v *= a);
        }
        if let Some(b) = &state.beta {
            row.iter_mut().zip(b).for_each(|(v, b)| *v += b);
        }
    }
    (y, xhat)
}

fn divisors(var: &[f64], cfg: &NormConfig) -> Vec<f64> {
    if cfg.use_var {
        var.iter().map(|v| (v + cfg.epsilon).sqrt()).collect()
    } else {
        vec![1.0; var.len()]
    }
}

/// Forward pass. Batch kind in train mode normalizes with batch moments and
/// folds them into the running averages; in eval mode it uses the running
/// averages and leaves `state` untouched.
pub fn norm_forward(
    x: &DenseMatrix,
    cfg: &NormConfig,
    state: &mut NormState,
    mode: Mode,
) -> Result<(DenseMatrix, NormCache)> {
    if cfg.is_none() {
        return Ok((
            x.clone(),
            NormCache {
                cfg: *cfg,
                input: DenseMatrix::zeros(0, 0),
                xhat: DenseMatrix::zeros(0, 0),
                mean: Vec::new(),
                divisor: Vec::new(),
                by_column: false,
                fixed: true,
            },
        ));
    }
    check_width(x, state)?;
    let by_column = cfg.kind == NormKind::Batch;
    let fixed = by_column && mode == Mode::Eval;
    let (mean, var) = if fixed {
        running(state)?
    } else {
        if by_column && x.rows() < 2 {
            return Err(Error::BatchTooSmall(x.rows()));
        }
        moments(x, by_column)
    };
    if by_column && mode == Mode::Train {
        let lambda = cfg.momentum;
        let (rm, rv) = (
            state.running_mean.as_mut().ok_or_else(missing_stats)?,
            state.running_var.as_mut().ok_or_else(missing_stats)?,
        );
        for (r, m) in rm.iter_mut().zip(&mean) {
            *r = lambda * *r + (1.0 - lambda) * m;
        }
        for (r, v) in rv.iter_mut().zip(&var) {
            *r = lambda * *r + (1.0 - lambda) * v;
        }
    }
    let divisor = divisors(&var, cfg);
    let (y, xhat) = apply(x, cfg, state, &mean, &divisor, by_column);
    Ok((
        y,
        NormCache {
            cfg: *cfg,
            input: x.clone(),
            xhat,
            mean,
            divisor,
            by_column,
            fixed,
        },
    ))
}

fn missing_stats() -> Error {
    Error::shape("batch normalization state has no running statistics")
}

fn running(state: &NormState) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((
        state.running_mean.clone().ok_or_else(missing_stats)?,
        state.running_var.clone().ok_or_else(missing_stats)?,
    ))
}

/// Eval-mode forward pass on a shared state.
pub fn norm_infer(x: &DenseMatrix, cfg: &NormConfig, state: &NormState) -> Result<DenseMatrix> {
    if cfg.is_none() {
        return Ok(x.clone());
    }
    check_width(x, state)?;
    let by_column = cfg.kind == NormKind::Batch;
    let (mean, var) = if by_column {
        running(state)?
    } else {
        moments(x, false)
    };
    Ok(apply(x, cfg, state, &mean, &divisors(&var, cfg), by_column).0)
}

/// Exact gradient of [`norm_forward`], treating batch or row statistics as
/// functions of the input.
pub fn norm_backward(
    cfg: &NormConfig,
    cache: NormCache,
    state: &NormState,
    grad_y: &DenseMatrix,
) -> Result<NormGrads> {
    if cache.cfg != *cfg {
        return Err(Error::config("normalization cache was produced under a different config"));
    }
    if cfg.is_none() {
        return Ok(NormGrads {
            input: grad_y.clone(),
            alpha: None,
            beta: None,
        });
    }
    let x = &cache.input;
    if grad_y.shape() != x.shape() {
        return Err(Error::shape("normalization gradient does not match cached input"));
    }
    if state.alpha.is_some() != cfg.use_alpha || state.beta.is_some() != cfg.use_beta {
        return Err(Error::config("normalization state does not match its config"));
    }
    let (rows, cols) = x.shape();

    let grad_alpha = state.alpha.as_ref().map(|_| {
        let mut ga = vec![0.0; cols];
        for r in 0..rows {
            for ((g, gy), xh) in ga.iter_mut().zip(grad_y.row(r)).zip(cache.xhat.row(r)) {
                *g += gy * xh;
            }
        }
        ga
    });
    let grad_beta = state.beta.as_ref().map(|_| grad_y.column_sums());

    // g = ∂L/∂x̂
    let mut g = grad_y.clone();
    if let Some(a) = &state.alpha {
        for r in 0..rows {
            g.row_mut(r).iter_mut().zip(a).for_each(|(v, a)| *v *= a);
        }
    }

    let c = if cfg.use_mean { 1.0 } else { 0.0 };
    let center_term = cfg.use_mean && !cache.fixed;
    let var_term = cfg.use_var && !cache.fixed;
    let groups = if cache.by_column { cols } else { rows };
    let n = if cache.by_column { rows } else { cols } as f64;
    let at = |grp: usize, k: usize| if cache.by_column { (k, grp) } else { (grp, k) };
    let len = if cache.by_column { rows } else { cols };

    let mut dx = DenseMatrix::zeros(rows, cols);
    for grp in 0..groups {
        let (mu, s) = (cache.mean[grp], cache.divisor[grp]);
        let mut sum_g = 0.0;
        let mut sum_gu = 0.0;
        for k in 0..len {
            let (r, j) = at(grp, k);
            let gv = g.get(r, j);
            sum_g += gv;
            sum_gu += gv * (x.get(r, j) - c * mu);
        }
        let d_var = -sum_gu / (2.0 * s * s * s);
        for k in 0..len {
            let (r, j) = at(grp, k);
            let mut v = g.get(r, j) / s;
            if center_term {
                v -= sum_g / (n * s);
            }
            if var_term {
                v += d_var * 2.0 * (x.get(r, j) - mu) / n;
            }
            dx.set(r, j, v);
        }
    }
    Ok(NormGrads {
        input: dx,
        alpha: grad_alpha,
        beta: grad_beta,
    })
}
