use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clipped to `[PROB_CLIP, 1 − PROB_CLIP]` before the log.
pub const PROB_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// `None` unless both classes are present.
    pub auc: Option<f64>,
    pub logloss: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl EvalResult {
    pub fn len(&self) -> usize {
        self.n_pos + self.n_neg
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Degenerate(format!("label {l} is not 0 or 1")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    Ok(())
}

/// 1-based ranks with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Mann–Whitney AUC with average ranks for ties: (R₊ − P(P+1)/2)/(P·N).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<Option<f64>> {
    check(scores, labels)?;
    let p = labels.iter().filter(|&&l| l == 1).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Ok(None);
    }
    let ranks = average_ranks(scores);
    let r_pos: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let (p, n) = (p as f64, n as f64);
    Ok(Some((r_pos - p * (p + 1.0) / 2.0) / (p * n)))
}

/// Mean negative log-likelihood with clipped probabilities. `None` when empty.
pub fn logloss(probs: &[f64], labels: &[u8]) -> Result<Option<f64>> {
    check(probs, labels)?;
    if probs.is_empty() {
        return Ok(None);
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(Some(total / probs.len() as f64))
}

pub fn evaluate(probs: &[f64], labels: &[u8]) -> Result<EvalResult> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    Ok(EvalResult {
        auc: auc(probs, labels)?,
        logloss: logloss(probs, labels)?,
        n_pos,
        n_neg: labels.len() - n_pos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise(scores: &[f64], labels: &[u8]) -> Option<f64> {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if si > sj {
                        wins += 1.0;
                    } else if si == sj {
                        wins += 0.5;
                    }
                }
            }
        }
        (pairs > 0.0).then(|| wins / pairs)
    }

    #[test]
    fn hand_examples() {
        assert_eq!(auc(&[0.9, 0.1], &[1, 0]).unwrap(), Some(1.0));
        assert_eq!(auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), Some(0.5));
        assert_eq!(auc(&[0.8, 0.3, 0.5, 0.2], &[1, 1, 0, 0]).unwrap(), Some(0.75));
        assert_eq!(auc(&[0.1, 0.2], &[1, 1]).unwrap(), None);
        assert_eq!(auc(&[], &[]).unwrap(), None);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(auc(&[0.1], &[1, 0]).is_err());
        assert!(auc(&[0.1, 0.2], &[1, 2]).is_err());
        assert!(auc(&[f64::NAN, 0.2], &[1, 0]).is_err());
    }

    #[test]
    fn logloss_examples() {
        let l = logloss(&[0.5; 4], &[1, 0, 0, 1]).unwrap().unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let clipped = logloss(&[1.0], &[1]).unwrap().unwrap();
        assert!((clipped - -(1.0 - PROB_CLIP).ln()).abs() < 1e-20);
        assert!(clipped < 2e-7);
        let bad = logloss(&[0.0], &[1]).unwrap().unwrap();
        assert!((bad - -(PROB_CLIP.ln())).abs() < 1e-12);
        assert_eq!(logloss(&[], &[]).unwrap(), None);
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..20, n).prop_map(|v| v.into_iter().map(|x| x as f64 / 7.0).collect()),
                prop::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_pairwise_oracle((s, y) in instance()) {
            let got = auc(&s, &y).unwrap();
            let want = pairwise(&s, &y);
            match (got, want) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
                (None, None) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn complement_symmetry((s, y) in instance()) {
            let flipped: Vec<u8> = y.iter().map(|l| 1 - l).collect();
            if let (Some(a), Some(b)) = (auc(&s, &y).unwrap(), auc(&s, &flipped).unwrap()) {
                prop_assert!((a + b - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn monotone_transform_invariance((s, y) in instance()) {
            let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 7.0).collect();
            prop_assert_eq!(auc(&s, &y).unwrap(), auc(&t, &y).unwrap());
        }
    }
}
