use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::StreamSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourRatio {
    pub hour_index: u32,
    pub samples: usize,
    /// `None` for an hour without samples.
    pub positive_ratio: Option<f64>,
}

/// Click rate of every hour between the first and last hour present,
/// counting train and test halves alike.
pub fn positive_ratio_per_hour(schedule: &StreamSchedule) -> Vec<HourRatio> {
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for s in schedule.all_samples() {
        let c = counts.entry(s.hour_index).or_default();
        c.0 += 1;
        c.1 += usize::from(s.label);
    }
    let (Some(&first), Some(&last)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Vec::new();
    };
    (first..=last)
        .map(|h| {
            let (n, pos) = counts.get(&h).copied().unwrap_or((0, 0));
            HourRatio {
                hour_index: h,
                samples: n,
                positive_ratio: (n > 0).then(|| pos as f64 / n as f64),
            }
        })
        .collect()
}

/// `present[i][j]`: token `tokens[i]` of `field` occurs in hour `hours[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceMatrix {
    pub field: usize,
    pub tokens: Vec<u32>,
    pub hours: Vec<u32>,
    pub present: Vec<Vec<bool>>,
}

pub fn feature_presence(schedule: &StreamSchedule, field: usize, tokens: &[u32]) -> PresenceMatrix {
    let mut hours: Vec<u32> = schedule.all_samples().map(|s| s.hour_index).collect();
    hours.sort_unstable();
    hours.dedup();
    let col: BTreeMap<u32, usize> = hours.iter().enumerate().map(|(i, &h)| (h, i)).collect();
    let row: BTreeMap<u32, usize> = tokens.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut present = vec![vec![false; hours.len()]; tokens.len()];
    for s in schedule.all_samples() {
        if let Some(&tok) = s.field_indices.get(field) {
            if let Some(&r) = row.get(&tok) {
                present[r][col[&s.hour_index]] = true;
            }
        }
    }
    PresenceMatrix {
        field,
        tokens: tokens.to_vec(),
        hours,
        present,
    }
}
