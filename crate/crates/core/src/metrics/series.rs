use serde::{Deserialize, Serialize};

use super::auc::EvalResult;
use crate::error::{Error, Result};

/// How per-hour values are averaged into an aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weight each hour by its test-set size.
    TestSize,
}

/// Evaluations at one streaming timestamp t. `None` means not evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampMetrics {
    pub t: usize,
    /// M_t on D_{t+1}ᵗᵉˢᵗ (absent at t = T).
    pub online: Option<EvalResult>,
    /// M_t on D_tᵗᵉˢᵗ.
    pub current: Option<EvalResult>,
    /// M_t on D_{t−1}ᵗᵉˢᵗ.
    pub backward: Option<EvalResult>,
    /// M₀ on D_tᵗᵉˢᵗ (absent at t = 1).
    pub initial: Option<EvalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// `None` when no term is defined.
    pub auc: Option<f64>,
    pub logloss: Option<f64>,
    /// Number of AUC values averaged.
    pub terms: usize,
    /// Evaluated timestamps whose AUC is undefined.
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub horizon: usize,
    pub weighting: Weighting,
    pub timestamps: Vec<TimestampMetrics>,
    pub pretrain: Option<EvalResult>,
    pub oauc: Aggregate,
    pub cauc: Aggregate,
    pub bauc: Aggregate,
    pub iauc: Aggregate,
    pub pauc: Option<f64>,
}

/// Raw evaluations in index order.
#[derive(Debug, Clone, Default)]
pub struct SeriesInput {
    /// Entry i is M_{i+1} on D_{i+2}ᵗᵉˢᵗ; length T − 1.
    pub online: Vec<Option<EvalResult>>,
    /// Entry i is M_{i+1} on D_{i+1}ᵗᵉˢᵗ; length T.
    pub current: Vec<Option<EvalResult>>,
    /// Entry i is M_{i+1} on D_iᵗᵉˢᵗ; length T.
    pub backward: Vec<Option<EvalResult>>,
    /// Entry i is M₀ on D_{i+2}ᵗᵉˢᵗ; length T − 1.
    pub initial: Vec<Option<EvalResult>>,
    pub pretrain: Option<EvalResult>,
}

fn aggregate<'a>(items: impl Iterator<Item = (usize, &'a Option<EvalResult>)>, weighting: Weighting) -> Aggregate {
    let (mut auc_sum, mut auc_w, mut terms) = (0.0, 0.0, 0);
    let (mut ll_sum, mut ll_w) = (0.0, 0.0);
    let mut skipped = Vec::new();
    for (t, r) in items {
        let Some(r) = r else { continue };
        let w = match weighting {
            Weighting::Uniform => 1.0,
            Weighting::TestSize => r.len() as f64,
        };
        match r.auc {
            Some(a) => {
                auc_sum += w * a;
                auc_w += w;
                terms += 1;
            }
            None => skipped.push(t),
        }
        if let Some(l) = r.logloss {
            ll_sum += w * l;
            ll_w += w;
        }
    }
    Aggregate {
        auc: (auc_w > 0.0).then(|| auc_sum / auc_w),
        logloss: (ll_w > 0.0).then(|| ll_sum / ll_w),
        terms,
        skipped,
    }
}

fn expect_len<T>(name: &str, v: &[T], want: usize) -> Result<()> {
    if v.len() != want {
        return Err(Error::shape(format!("{name} has {} entries, expected {want}", v.len())));
    }
    Ok(())
}

/// oAUC averages t ∈ [1, T−1]; cAUC and bAUC t ∈ [1, T]; iAUC t ∈ [2, T].
/// Undefined terms are dropped and the divisor shrinks with them.
pub fn assemble_series(horizon: usize, input: SeriesInput, weighting: Weighting) -> Result<MetricSeries> {
    if horizon < 2 {
        return Err(Error::Degenerate(format!("horizon {horizon} is below 2")));
    }
    expect_len("online", &input.online, horizon - 1)?;
    expect_len("current", &input.current, horizon)?;
    expect_len("backward", &input.backward, horizon)?;
    expect_len("initial", &input.initial, horizon - 1)?;

    let timestamps: Vec<TimestampMetrics> = (1..=horizon)
        .map(|t| TimestampMetrics {
            t,
            online: if t < horizon { input.online[t - 1] } else { None },
            current: input.current[t - 1],
            backward: input.backward[t - 1],
            initial: if t >= 2 { input.initial[t - 2] } else { None },
        })
        .collect();
    Ok(series_from_timestamps(horizon, timestamps, input.pretrain, weighting))
}

pub(crate) fn series_from_timestamps(
    horizon: usize,
    timestamps: Vec<TimestampMetrics>,
    pretrain: Option<EvalResult>,
    weighting: Weighting,
) -> MetricSeries {
    let pick = |f: fn(&TimestampMetrics) -> &Option<EvalResult>| {
        aggregate(timestamps.iter().map(|m| (m.t, f(m))), weighting)
    };
    MetricSeries {
        horizon,
        weighting,
        oauc: pick(|m| &m.online),
        cauc: pick(|m| &m.current),
        bauc: pick(|m| &m.backward),
        iauc: pick(|m| &m.initial),
        pauc: pretrain.and_then(|p| p.auc),
        pretrain,
        timestamps,
    }
}

impl MetricSeries {
    /// Builds a series, aggregates included, from per-timestamp records.
    pub fn from_timestamps(
        horizon: usize,
        timestamps: Vec<TimestampMetrics>,
        pretrain: Option<EvalResult>,
        weighting: Weighting,
    ) -> MetricSeries {
        series_from_timestamps(horizon, timestamps, pretrain, weighting)
    }

    /// Rebuilds every aggregate from the per-timestamp records.
    pub fn recomputed(&self) -> MetricSeries {
        series_from_timestamps(self.horizon, self.timestamps.clone(), self.pretrain, self.weighting)
    }
}
