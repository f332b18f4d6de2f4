use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::vocab::EncodedSample;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourBucket {
    pub hour_index: u32,
    pub train: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourCount {
    pub hour_index: u32,
    pub train: usize,
    pub test: usize,
    pub test_positives: usize,
}

/// Everything about a schedule except the samples themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleMeta {
    pub seed: u64,
    pub pretrain_fraction: f64,
    pub holdout_fraction: f64,
    pub total_hours: usize,
    pub pretrain_hours: usize,
    pub horizon: usize,
    pub pretrain_train: usize,
    pub pretrain_test: usize,
    pub hours: Vec<HourCount>,
    /// Streaming hours whose test half cannot support an AUC.
    pub skipped_hours: Vec<u32>,
}

/// D₀ split into train/test plus the T streaming hours D₁..D_T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSchedule {
    pub pretrain_train: Vec<EncodedSample>,
    pub pretrain_test: Vec<EncodedSample>,
    pub buckets: Vec<HourBucket>,
    pub meta: ScheduleMeta,
}

impl StreamSchedule {
    /// Number of streaming hours T.
    pub fn horizon(&self) -> usize {
        self.buckets.len()
    }

    /// D_tᵗʳᵃⁱⁿ for t in 0..=T.
    pub fn train_set(&self, t: usize) -> &[EncodedSample] {
        if t == 0 {
            &self.pretrain_train
        } else {
            &self.buckets[t - 1].train
        }
    }

    /// D_tᵗᵉˢᵗ for t in 0..=T.
    pub fn test_set(&self, t: usize) -> &[EncodedSample] {
        if t == 0 {
            &self.pretrain_test
        } else {
            &self.buckets[t - 1].test
        }
    }

    pub fn is_skipped(&self, t: usize) -> bool {
        t >= 1 && self.meta.skipped_hours.contains(&self.buckets[t - 1].hour_index)
    }

    /// Every sample in the schedule, pretraining block first.
    pub fn all_samples(&self) -> impl Iterator<Item = &EncodedSample> {
        self.pretrain_train
            .iter()
            .chain(&self.pretrain_test)
            .chain(self.buckets.iter().flat_map(|b| b.train.iter().chain(&b.test)))
    }
}

fn split_point(n: usize, holdout_fraction: f64) -> usize {
    let n_test = (holdout_fraction * n as f64).round() as usize;
    n - n_test.min(n)
}

fn degenerate(test: &[EncodedSample]) -> bool {
    let pos = test.iter().filter(|s| s.label == 1).count();
    test.len() < 2 || pos == 0 || pos == test.len()
}

/// Splits hour-indexed samples into the pretraining block (earliest
/// ⌈pretrain_fraction·H⌉ hours, shuffled as one pool) and per-hour streaming
/// buckets, each shuffled independently and halved by `holdout_fraction`.
pub fn make_schedule(
    samples: Vec<EncodedSample>,
    pretrain_fraction: f64,
    holdout_fraction: f64,
    seed: u64,
) -> Result<StreamSchedule> {
    if !(pretrain_fraction > 0.0 && pretrain_fraction < 1.0) {
        return Err(Error::config("pretrain_fraction must lie in (0, 1)"));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::config("holdout_fraction must lie in (0, 1)"));
    }
    let total_hours = samples
        .iter()
        .map(|s| s.hour_index as usize + 1)
        .max()
        .ok_or_else(|| Error::Degenerate("no samples".into()))?;
    // 0.7 * 240 is 167.99999999999997 in binary; tolerate representation error.
    let pretrain_hours = (pretrain_fraction * total_hours as f64 - 1e-9).ceil() as usize;
    if pretrain_hours == 0 || pretrain_hours >= total_hours {
        return Err(Error::config(format!(
            "pretrain_fraction {pretrain_fraction} leaves no streaming hours out of {total_hours}"
        )));
    }

    let mut by_hour: Vec<Vec<EncodedSample>> = vec![Vec::new(); total_hours];
    for s in samples {
        by_hour[s.hour_index as usize].push(s);
    }
    let mut hours = by_hour.into_iter();

    let mut pool: Vec<EncodedSample> = hours.by_ref().take(pretrain_hours).flatten().collect();
    pool.shuffle(&mut rng::seeded(seed, &[stream::SCHEDULE, 0]));
    let cut = split_point(pool.len(), holdout_fraction);
    let pretrain_test = pool.split_off(cut);
    let pretrain_train = pool;

    let mut buckets = Vec::with_capacity(total_hours - pretrain_hours);
    let mut counts = Vec::with_capacity(total_hours - pretrain_hours);
    let mut skipped_hours = Vec::new();
    for (offset, mut hour) in hours.enumerate() {
        let hour_index = (pretrain_hours + offset) as u32;
        hour.shuffle(&mut rng::seeded(seed, &[stream::SCHEDULE, hour_index as u64 + 1]));
        let cut = split_point(hour.len(), holdout_fraction);
        let test = hour.split_off(cut);
        if degenerate(&test) {
            skipped_hours.push(hour_index);
        }
        counts.push(HourCount {
            hour_index,
            train: hour.len(),
            test: test.len(),
            test_positives: test.iter().filter(|s| s.label == 1).count(),
        });
        buckets.push(HourBucket {
            hour_index,
            train: hour,
            test,
        });
    }

    let meta = ScheduleMeta {
        seed,
        pretrain_fraction,
        holdout_fraction,
        total_hours,
        pretrain_hours,
        horizon: buckets.len(),
        pretrain_train: pretrain_train.len(),
        pretrain_test: pretrain_test.len(),
        hours: counts,
        skipped_hours,
    };
    Ok(StreamSchedule {
        pretrain_train,
        pretrain_test,
        buckets,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(hours: u32, per_hour: usize) -> Vec<EncodedSample> {
        (0..hours)
            .flat_map(|h| {
                (0..per_hour).map(move |i| EncodedSample {
                    field_indices: vec![i as u32, h],
                    label: (i % 3 == 0) as u8,
                    hour_index: h,
                })
            })
            .collect()
    }

    #[test]
    fn ten_day_split() {
        let s = make_schedule(synthetic(240, 4), 0.7, 0.5, 1).unwrap();
        assert_eq!(s.meta.pretrain_hours, 168);
        assert_eq!(s.horizon(), 72);
        assert_eq!(s.buckets[0].hour_index, 168);
        assert!(s.pretrain_train.iter().chain(&s.pretrain_test).all(|x| x.hour_index < 168));
        assert!(s.buckets.windows(2).all(|w| w[0].hour_index < w[1].hour_index));
    }

    #[test]
    fn even_halves() {
        let s = make_schedule(synthetic(10, 1000), 0.5, 0.5, 3).unwrap();
        for b in &s.buckets {
            assert_eq!((b.train.len(), b.test.len()), (500, 500));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = make_schedule(synthetic(20, 30), 0.7, 0.5, 9).unwrap();
        let b = make_schedule(synthetic(20, 30), 0.7, 0.5, 9).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = make_schedule(synthetic(20, 30), 0.7, 0.5, 10).unwrap();
        assert_ne!(a.buckets[0].train, c.buckets[0].train);
    }

    #[test]
    fn degenerate_hours_are_flagged_not_dropped() {
        let mut data = synthetic(4, 10);
        // hour 3: all negatives
        for s in data.iter_mut().filter(|s| s.hour_index == 3) {
            s.label = 0;
        }
        let s = make_schedule(data, 0.5, 0.5, 0).unwrap();
        assert_eq!(s.horizon(), 2);
        assert_eq!(s.meta.skipped_hours, vec![3]);
        assert!(s.is_skipped(2));
        assert!(!s.buckets[1].train.is_empty());
    }

    #[test]
    fn empty_hours_in_stream_are_skipped() {
        let data: Vec<_> = synthetic(6, 10).into_iter().filter(|s| s.hour_index != 4).collect();
        let s = make_schedule(data, 0.5, 0.5, 0).unwrap();
        assert_eq!(s.horizon(), 3);
        assert_eq!(s.meta.skipped_hours, vec![4]);
    }

    #[test]
    fn rejects_bad_fractions() {
        assert!(make_schedule(synthetic(4, 2), 0.0, 0.5, 0).is_err());
        assert!(make_schedule(synthetic(4, 2), 0.5, 1.0, 0).is_err());
        assert!(make_schedule(synthetic(1, 2), 0.5, 0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_complete(hours in 2u32..12, per_hour in 0usize..25, frac in 0.05f64..0.95, hold in 0.05f64..0.95, seed in any::<u64>()) {
            let data = synthetic(hours, per_hour.max(1));
            let n = data.len();
            let Ok(s) = make_schedule(data.clone(), frac, hold, seed) else { return Ok(()); };
            prop_assert_eq!(s.all_samples().count(), n);
            let mut got: Vec<_> = s.all_samples().cloned().collect();
            let mut want = data;
            got.sort_by(|a, b| (a.hour_index, &a.field_indices).cmp(&(b.hour_index, &b.field_indices)));
            want.sort_by(|a, b| (a.hour_index, &a.field_indices).cmp(&(b.hour_index, &b.field_indices)));
            prop_assert_eq!(got, want);
            for (b, c) in s.buckets.iter().zip(&s.meta.hours) {
                prop_assert_eq!(b.train.len() + b.test.len(), per_hour.max(1));
                prop_assert_eq!(c.train, b.train.len());
                prop_assert!(b.train.iter().chain(&b.test).all(|x| x.hour_index == b.hour_index));
            }
        }
    }
}
