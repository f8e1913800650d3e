//! Model quality metrics: ROC AUC (Mann-Whitney form) and R².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricType {
    Auc,
    R2,
}

/// A model's recorded performance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetric {
    #[serde(rename = "type")]
    pub metric_type: MetricType,
    pub value: f64,
}

impl PerformanceMetric {
    pub fn auc(value: f64) -> Self {
        PerformanceMetric {
            metric_type: MetricType::Auc,
            value,
        }
    }

    pub fn r2(value: f64) -> Self {
        PerformanceMetric {
            metric_type: MetricType::R2,
            value,
        }
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half. Computed from mid-ranks in `O(n log n)`.
pub fn auc(labels: &[f64], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::Metric(format!(
            "auc: {} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(Error::Metric(format!("auc: label {bad} is not 0 or 1")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metric("auc: non-finite score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric("auc: both classes must be present".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] == 1.0 {
                pos_rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2(truth: &[f64], preds: &[f64]) -> Result<f64> {
    if truth.len() != preds.len() {
        return Err(Error::Metric(format!(
            "r2: {} targets but {} predictions",
            truth.len(),
            preds.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::Metric("r2: need at least two samples".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("r2: truth is constant".into()));
    }
    let ss_res: f64 = truth.iter().zip(preds).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Quadratic pair count, independent of the rank-sum route.
    fn auc_pairs(labels: &[f64], scores: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1.0 && lj == 0.0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.0, 1.0], &[0.1, 0.9]).unwrap(), 1.0);
        assert_eq!(auc(&[0.0, 0.0, 1.0, 1.0], &[0.8, 0.2, 0.6, 0.4]).unwrap(), 0.5);
        assert_eq!(auc(&[0.0, 1.0, 1.0, 0.0], &[0.3; 4]).unwrap(), 0.5);
        assert!(auc(&[1.0, 1.0], &[0.1, 0.2]).is_err());
        assert!(auc(&[1.0, 0.0], &[0.1]).is_err());
        assert!(auc(&[2.0, 0.0], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn r2_examples() {
        let truth = [1.0, 2.0, 3.0];
        assert_eq!(r2(&truth, &truth).unwrap(), 1.0);
        assert_eq!(r2(&truth, &[2.0; 3]).unwrap(), 0.0);
        assert_eq!(r2(&truth, &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert!(r2(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(r2(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn r2_falls_as_noise_grows() {
        use rand::Rng;
        let mut rng = crate::seed::rng(4);
        let truth: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let noise: Vec<f64> = (0..500).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mut last = 1.0;
        for scale in [0.1, 0.3, 0.6, 1.0] {
            let preds: Vec<f64> = truth.iter().zip(&noise).map(|(t, e)| t + scale * e).collect();
            let v = r2(&truth, &preds).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    fn labelled() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0)], n),
                proptest::collection::vec(0u8..8, n),
            )
                .prop_filter("both classes", |(l, _)| l.contains(&0.0) && l.contains(&1.0))
                .prop_map(|(l, s)| (l, s.into_iter().map(|v| f64::from(v) / 7.0).collect()))
        })
    }

    proptest! {
        #[test]
        fn rank_sum_matches_pair_count((labels, scores) in labelled()) {
            let fast = auc(&labels, &scores).unwrap();
            prop_assert!((fast - auc_pairs(&labels, &scores)).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_increasing_transform((labels, scores) in labelled()) {
            let t: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 1.0).collect();
            prop_assert!((auc(&labels, &scores).unwrap() - auc(&labels, &t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn negation_complements_without_ties(
            labels in proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0)], 2..30)
                .prop_filter("both classes", |l| l.contains(&0.0) && l.contains(&1.0))
        ) {
            let scores: Vec<f64> = (0..labels.len()).map(|i| ((i * 7919) % 101) as f64 + i as f64 * 1e-3).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let sum = auc(&labels, &scores).unwrap() + auc(&labels, &neg).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
