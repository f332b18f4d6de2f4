use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::{format_hour_stamp, parse_hour_stamp, EncodedSample, RawRecord};
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::nn::sigmoid;
use crate::rng::{self, stream};

/// Synthetic click log whose ground-truth logistic model drifts by hour.
///
/// Each token carries two weights (a, b); in hour h its effective weight is
/// cos θ_h·a + sin θ_h·b. θ_h grows by `rotation_per_hour`, or alternates
/// between 0 and π/2 every `recurring_period` hours when that is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftSpec {
    pub cardinalities: Vec<usize>,
    pub hours: usize,
    pub samples_per_hour: usize,
    /// Standard deviation of each ground-truth token weight.
    pub weight_scale: f64,
    /// Radians per hour.
    pub rotation_per_hour: f64,
    pub recurring_period: Option<usize>,
    /// Target click rate per hour, cycled. Empty keeps `base_bias`.
    pub label_prior: Vec<f64>,
    pub base_bias: f64,
    /// Standard deviation of an extra weight each token gets, drawn afresh
    /// every hour. Models patterns that do not carry over to the next hour.
    pub hour_noise: f64,
    /// Per-hour probability that a token switches between active and inactive.
    pub turnover: f64,
    /// Token k of a field is drawn with weight 1/(k+1)^s among active tokens.
    pub zipf_exponent: f64,
    pub seed: u64,
    /// YYMMDDHH of hour 0 in CSV output.
    pub start_stamp: String,
}

impl Default for DriftSpec {
    fn default() -> Self {
        DriftSpec {
            cardinalities: vec![50; 8],
            hours: 36,
            samples_per_hour: 10_000,
            weight_scale: 0.5,
            rotation_per_hour: 0.0,
            recurring_period: None,
            label_prior: Vec::new(),
            base_bias: 0.0,
            hour_noise: 0.0,
            turnover: 0.0,
            zipf_exponent: 1.0,
            seed: 0,
            start_stamp: "14102100".into(),
        }
    }
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cardinalities.is_empty() || self.cardinalities.contains(&0) {
            return Err(Error::config("every field needs at least one token"));
        }
        if self.hours == 0 || self.samples_per_hour == 0 {
            return Err(Error::config("hours and samples_per_hour must be positive"));
        }
        if !(0.0..=1.0).contains(&self.turnover) {
            return Err(Error::config("turnover must lie in [0, 1]"));
        }
        if self.label_prior.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::config("label_prior entries must lie in (0, 1)"));
        }
        if !(self.weight_scale >= 0.0 && self.zipf_exponent >= 0.0 && self.hour_noise >= 0.0) {
            return Err(Error::config("weight_scale, hour_noise and zipf_exponent must be non-negative"));
        }
        if self.recurring_period == Some(0) {
            return Err(Error::config("recurring_period must be positive"));
        }
        parse_hour_stamp(&self.start_stamp)?;
        Ok(())
    }

    fn angle(&self, h: usize) -> f64 {
        match self.recurring_period {
            Some(p) if (h / p) % 2 == 1 => std::f64::consts::FRAC_PI_2,
            Some(_) => 0.0,
            None => self.rotation_per_hour * h as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthStream {
    /// Hour-ordered; token k of field f has index k + 1 (0 is OOV).
    pub samples: Vec<EncodedSample>,
    pub vocab_sizes: Vec<usize>,
    /// AUC of the true hour-h click probabilities on hour h.
    pub oracle_auc: Vec<Option<f64>>,
    pub positive_ratio: Vec<f64>,
    field_names: Vec<String>,
    start_hours: i64,
}

/// Bias c with mean σ(s + c) = target.
fn calibrate(scores: &[f64], target: f64) -> f64 {
    let rate = |c: f64| scores.iter().map(|s| sigmoid(s + c)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn generate_drift_stream(spec: &DriftSpec) -> Result<SynthStream> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed, &[stream::GENERATOR]);
    let normal = Normal::new(0.0, spec.weight_scale.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config(e.to_string()))?;
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        if spec.weight_scale == 0.0 {
            0.0
        } else {
            normal.sample(rng)
        }
    };
    let weights: Vec<Vec<(f64, f64)>> = spec
        .cardinalities
        .iter()
        .map(|&c| (0..c).map(|_| (draw(&mut rng), draw(&mut rng))).collect())
        .collect();
    let popularity: Vec<Vec<f64>> = spec
        .cardinalities
        .iter()
        .map(|&c| (0..c).map(|k| 1.0 / ((k + 1) as f64).powf(spec.zipf_exponent)).collect())
        .collect();
    let mut active: Vec<Vec<bool>> = spec.cardinalities.iter().map(|&c| vec![true; c]).collect();

    let nf = spec.cardinalities.len();
    let mut samples = Vec::with_capacity(spec.hours * spec.samples_per_hour);
    let mut oracle_auc = Vec::with_capacity(spec.hours);
    let mut positive_ratio = Vec::with_capacity(spec.hours);
    for h in 0..spec.hours {
        if h > 0 && spec.turnover > 0.0 {
            for field in &mut active {
                for a in field.iter_mut() {
                    if rng.random::<f64>() < spec.turnover {
                        *a = !*a;
                    }
                }
                if !field.contains(&true) {
                    field[0] = true;
                }
            }
        }
        let pickers: Vec<WeightedIndex<f64>> = (0..nf)
            .map(|f| {
                let w = popularity[f]
                    .iter()
                    .zip(&active[f])
                    .map(|(&p, &on)| if on { p } else { 0.0 });
                WeightedIndex::new(w).map_err(|e| Error::config(e.to_string()))
            })
            .collect::<Result<_>>()?;
        let noise: Vec<Vec<f64>> = if spec.hour_noise > 0.0 {
            let n = Normal::new(0.0, spec.hour_noise).map_err(|e| Error::config(e.to_string()))?;
            spec.cardinalities
                .iter()
                .map(|&c| (0..c).map(|_| n.sample(&mut rng)).collect())
                .collect()
        } else {
            spec.cardinalities.iter().map(|&c| vec![0.0; c]).collect()
        };
        let (sin, cos) = spec.angle(h).sin_cos();
        let mut tokens = Vec::with_capacity(spec.samples_per_hour);
        let mut scores = Vec::with_capacity(spec.samples_per_hour);
        for _ in 0..spec.samples_per_hour {
            let toks: Vec<usize> = pickers.iter().map(|p| p.sample(&mut rng)).collect();
            let s: f64 = toks
                .iter()
                .enumerate()
                .map(|(f, &k)| cos * weights[f][k].0 + sin * weights[f][k].1 + noise[f][k])
                .sum();
            tokens.push(toks);
            scores.push(s);
        }
        let bias = if spec.label_prior.is_empty() {
            spec.base_bias
        } else {
            calibrate(&scores, spec.label_prior[h % spec.label_prior.len()])
        };
        let probs: Vec<f64> = scores.iter().map(|s| sigmoid(s + bias)).collect();
        let labels: Vec<u8> = probs.iter().map(|&p| u8::from(rng.random::<f64>() < p)).collect();
        oracle_auc.push(auc(&probs, &labels)?);
        positive_ratio.push(labels.iter().map(|&l| f64::from(l)).sum::<f64>() / labels.len() as f64);
        for (toks, label) in tokens.into_iter().zip(labels) {
            samples.push(EncodedSample {
                field_indices: toks.into_iter().map(|k| (k + 1) as u32).collect(),
                label,
                hour_index: h as u32,
            });
        }
    }
    Ok(SynthStream {
        samples,
        vocab_sizes: spec.cardinalities.iter().map(|c| c + 1).collect(),
        oracle_auc,
        positive_ratio,
        field_names: (1..=nf).map(|f| format!("C{f}")).collect(),
        start_hours: parse_hour_stamp(&spec.start_stamp)?,
    })
}

impl SynthStream {
    pub fn field_names(&self) -> &[String] {
        &self.field_names
    }

    /// The stream as raw records with tokens `f{field}_{k}`.
    pub fn raw_records(&self) -> Vec<RawRecord> {
        self.samples
            .iter()
            .map(|s| RawRecord {
                label: s.label,
                hour_stamp: format_hour_stamp(self.start_hours + i64::from(s.hour_index)),
                fields: s
                    .field_indices
                    .iter()
                    .enumerate()
                    .map(|(f, &i)| format!("f{}_{}", f + 1, i - 1))
                    .collect(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DriftSpec {
        DriftSpec {
            cardinalities: vec![10, 5, 7],
            hours: 6,
            samples_per_hour: 500,
            ..DriftSpec::default()
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate_drift_stream(&small()).unwrap();
        assert_eq!(a, generate_drift_stream(&small()).unwrap());
        let b = generate_drift_stream(&DriftSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.samples, b.samples);
        assert_eq!(a.samples.len(), 3000);
        assert_eq!(a.vocab_sizes, vec![11, 6, 8]);
        assert!(a.samples.iter().all(|s| s.field_indices.iter().all(|&i| i >= 1)));
    }

    #[test]
    fn label_prior_is_tracked() {
        let spec = DriftSpec {
            label_prior: vec![0.2, 0.8],
            hours: 4,
            samples_per_hour: 10_000,
            ..small()
        };
        let s = generate_drift_stream(&spec).unwrap();
        for (h, r) in s.positive_ratio.iter().enumerate() {
            let want = [0.2, 0.8][h % 2];
            assert!((r - want).abs() < 0.02, "hour {h}: {r}");
        }
    }

    #[test]
    fn turnover_hides_tokens() {
        let spec = DriftSpec {
            turnover: 0.5,
            hours: 10,
            ..small()
        };
        let s = generate_drift_stream(&spec).unwrap();
        let seen_in = |h: u32| -> std::collections::BTreeSet<u32> {
            s.samples.iter().filter(|x| x.hour_index == h).map(|x| x.field_indices[0]).collect()
        };
        assert!((1..10).any(|h| seen_in(h) != seen_in(0)));
    }

    #[test]
    fn recurring_modes_alternate() {
        let spec = DriftSpec {
            recurring_period: Some(2),
            ..small()
        };
        assert_eq!(spec.angle(0), 0.0);
        assert_eq!(spec.angle(2), std::f64::consts::FRAC_PI_2);
        assert_eq!(spec.angle(4), 0.0);
    }

    #[test]
    fn raw_records_use_hour_stamps() {
        let s = generate_drift_stream(&small()).unwrap();
        let raw = s.raw_records();
        assert_eq!(raw[0].hour_stamp, "14102100");
        assert_eq!(raw.last().unwrap().hour_stamp, "14102105");
        assert!(raw[0].fields[0].starts_with("f1_"));
    }

    #[test]
    fn rejects_degenerate_cardinality() {
        let spec = DriftSpec {
            cardinalities: vec![3, 0],
            ..small()
        };
        assert!(generate_drift_stream(&spec).is_err());
    }
}
