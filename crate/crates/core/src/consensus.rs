//! Consensus functions over sets of explanation records.
//!
//! The classical functions (arithmetic, harmonic and geometric means,
//! average ranking, top-N voting) work on one raw value per feature per
//! record; local records are first collapsed to their per-feature mean.
//!
//! The weighted function min-max normalizes each record, then weights it by
//! the quadratic `4(m² - m) + 1` of the model metric (`alpha`) and, for
//! local classification records, by the same quadratic of each row's class
//! probability (`beta`). Local rows are divided by the row count so a local
//! record weighs as much as a global one. Per-record contributions are
//! summed in record order and min-max normalized for presentation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{ExplanationRecord, Scope};

/// Floor substituted for non-positive values in the harmonic and geometric means.
pub const MEAN_EPSILON: f64 = 1e-12;

pub const DEFAULT_N_TOP: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusFunction {
    Arithmetic,
    Harmonic,
    Geometric,
    Ranking,
    Voting,
    Proposed,
}

impl ConsensusFunction {
    pub const ALL: [ConsensusFunction; 6] = [
        ConsensusFunction::Arithmetic,
        ConsensusFunction::Harmonic,
        ConsensusFunction::Geometric,
        ConsensusFunction::Ranking,
        ConsensusFunction::Voting,
        ConsensusFunction::Proposed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConsensusFunction::Arithmetic => "arithmetic",
            ConsensusFunction::Harmonic => "harmonic",
            ConsensusFunction::Geometric => "geometric",
            ConsensusFunction::Ranking => "ranking",
            ConsensusFunction::Voting => "voting",
            ConsensusFunction::Proposed => "proposed",
        }
    }
}

impl fmt::Display for ConsensusFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConsensusFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConsensusFunction::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown consensus function `{s}` (expected arithmetic, harmonic, geometric, ranking, voting or proposed)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordRef {
    pub model_id: String,
    pub method: String,
}

/// Fused per-feature scores and their ordering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub function: ConsensusFunction,
    /// `scores[i]` belongs to feature `F{i+1}`.
    pub scores: Vec<f64>,
    /// 1-based feature indices, best first.
    pub ranking: Vec<usize>,
    /// True when lower scores are better (average ranking).
    #[serde(default)]
    pub ascending: bool,
    pub warnings: Vec<String>,
    #[serde(default)]
    pub contributing_records: Vec<RecordRef>,
}

impl ConsensusResult {
    fn new(
        function: ConsensusFunction,
        scores: Vec<f64>,
        ascending: bool,
        warnings: Vec<String>,
        records: &[ExplanationRecord],
    ) -> Self {
        let ranking = rank_order(&scores, ascending);
        ConsensusResult {
            function,
            scores,
            ranking,
            ascending,
            warnings,
            contributing_records: records
                .iter()
                .map(|r| RecordRef {
                    model_id: r.model_id.clone(),
                    method: r.method.clone(),
                })
                .collect(),
        }
    }
}

/// 1-based feature order by score; ties resolved by ascending feature index.
pub fn rank_order(scores: &[f64], ascending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let c = scores[a].total_cmp(&scores[b]);
        let c = if ascending { c } else { c.reverse() };
        c.then(a.cmp(&b))
    });
    order.into_iter().map(|i| i + 1).collect()
}

/// Min-max output plus whether the input range was degenerate.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

/// `(v - min) / (max - min)`; a constant input maps to all zeros.
pub fn normalize_minmax(values: &[f64]) -> Result<Normalized> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot normalize an empty vector".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("cannot normalize non-finite values".into()));
    }
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if max == min {
        return Ok(Normalized {
            values: vec![0.0; values.len()],
            degenerate: true,
        });
    }
    let range = max - min;
    Ok(Normalized {
        values: values
            .iter()
            .map(|v| ((v - min) / range).clamp(0.0, 1.0))
            .collect(),
        degenerate: false,
    })
}

fn quadratic_weight(x: f64) -> f64 {
    4.0 * (x * x - x) + 1.0
}

/// Model-quality weight from an AUC or R²; inputs are clamped into `[0, 1]` first.
pub fn alpha(metric_value: f64) -> Result<f64> {
    if !metric_value.is_finite() {
        return Err(Error::InvalidInput(format!("alpha: metric {metric_value} is not finite")));
    }
    Ok(quadratic_weight(metric_value.clamp(0.0, 1.0)))
}

/// Per-sample confidence weight from a class probability in `[0, 1]`.
pub fn beta(probability: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&probability) {
        return Err(Error::InvalidInput(format!(
            "beta: probability {probability} is outside [0, 1]"
        )));
    }
    Ok(quadratic_weight(probability))
}

/// Per-feature mean over a local record's rows; a global record is returned as is.
pub fn collapse_local(record: &ExplanationRecord) -> Vec<f64> {
    let d = record.n_features;
    match record.scope {
        Scope::Global => record.attributions.clone(),
        Scope::Local => {
            let n = record.n_rows() as f64;
            let mut sums = vec![0.0; d];
            for row in record.rows() {
                for (s, v) in sums.iter_mut().zip(row) {
                    *s += v;
                }
            }
            sums.into_iter().map(|s| s / n).collect()
        }
    }
}

fn check_records(records: &[ExplanationRecord]) -> Result<usize> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidInput("consensus needs at least one record".into()))?;
    for (i, r) in records.iter().enumerate() {
        if r.n_features != first.n_features {
            return Err(Error::InvalidInput(format!(
                "record {i} ({}/{}) has {} features but record 0 ({}/{}) has {}",
                r.model_id, r.method, r.n_features, first.model_id, first.method, first.n_features
            )));
        }
        if let Err((field, reason)) = r.check() {
            return Err(Error::InvalidInput(format!(
                "record {i} ({}/{}): {field}: {reason}",
                r.model_id, r.method
            )));
        }
    }
    Ok(first.n_features)
}

fn collapsed(records: &[ExplanationRecord]) -> Result<(usize, Vec<Vec<f64>>)> {
    let d = check_records(records)?;
    Ok((d, records.iter().map(collapse_local).collect()))
}

pub fn consensus_arithmetic(records: &[ExplanationRecord]) -> Result<ConsensusResult> {
    let (d, vecs) = collapsed(records)?;
    let n = vecs.len() as f64;
    let scores = (0..d)
        .map(|j| vecs.iter().map(|v| v[j]).sum::<f64>() / n)
        .collect();
    Ok(ConsensusResult::new(ConsensusFunction::Arithmetic, scores, false, Vec::new(), records))
}

/// Column values with non-positive entries replaced by [`MEAN_EPSILON`].
fn clamped_columns(d: usize, vecs: &[Vec<f64>], warnings: &mut Vec<String>) -> Vec<Vec<f64>> {
    let mut clamped = 0usize;
    let mut features = Vec::new();
    let cols = (0..d)
        .map(|j| {
            let mut hit = false;
            let col = vecs
                .iter()
                .map(|v| {
                    if v[j] <= MEAN_EPSILON {
                        clamped += 1;
                        hit = true;
                        MEAN_EPSILON
                    } else {
                        v[j]
                    }
                })
                .collect();
            if hit {
                features.push(format!("F{}", j + 1));
            }
            col
        })
        .collect();
    if clamped > 0 {
        warnings.push(format!(
            "clamped {clamped} non-positive value(s) to {MEAN_EPSILON:e} in {}",
            features.join(", ")
        ));
    }
    cols
}

pub fn consensus_harmonic(records: &[ExplanationRecord]) -> Result<ConsensusResult> {
    let (d, vecs) = collapsed(records)?;
    let mut warnings = Vec::new();
    let n = vecs.len() as f64;
    let scores = clamped_columns(d, &vecs, &mut warnings)
        .into_iter()
        .map(|col| n / col.iter().map(|x| 1.0 / x).sum::<f64>())
        .collect();
    Ok(ConsensusResult::new(ConsensusFunction::Harmonic, scores, false, warnings, records))
}

pub fn consensus_geometric(records: &[ExplanationRecord]) -> Result<ConsensusResult> {
    let (d, vecs) = collapsed(records)?;
    let mut warnings = Vec::new();
    let n = vecs.len() as f64;
    let scores = clamped_columns(d, &vecs, &mut warnings)
        .into_iter()
        .map(|col| (col.iter().map(|x| x.ln()).sum::<f64>() / n).exp())
        .collect();
    Ok(ConsensusResult::new(ConsensusFunction::Geometric, scores, false, warnings, records))
}

/// 1-based positions by descending value; tied values share their mean position.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let order = rank_order(values, false);
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1] - 1] == values[order[i] - 1] {
            j += 1;
        }
        let mean = (i + j + 2) as f64 / 2.0;
        for &f in &order[i..=j] {
            ranks[f - 1] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Mean position per feature; lower is better.
pub fn consensus_ranking(records: &[ExplanationRecord]) -> Result<ConsensusResult> {
    let (d, vecs) = collapsed(records)?;
    let n = vecs.len() as f64;
    let mut totals = vec![0.0; d];
    for v in &vecs {
        for (t, r) in totals.iter_mut().zip(fractional_ranks(v)) {
            *t += r;
        }
    }
    let scores = totals.into_iter().map(|t| t / n).collect();
    Ok(ConsensusResult::new(ConsensusFunction::Ranking, scores, true, Vec::new(), records))
}

/// One vote per record for each of its `n_top` highest-attributed features.
pub fn consensus_voting(records: &[ExplanationRecord], n_top: usize) -> Result<ConsensusResult> {
    let (d, vecs) = collapsed(records)?;
    if n_top == 0 || n_top > d {
        return Err(Error::InvalidParams(format!(
            "n_top must be in 1..={d}, got {n_top}"
        )));
    }
    let mut votes = vec![0.0; d];
    for v in &vecs {
        for &f in &rank_order(v, false)[..n_top] {
            votes[f - 1] += 1.0;
        }
    }
    Ok(ConsensusResult::new(ConsensusFunction::Voting, votes, false, Vec::new(), records))
}

/// Weights applied to one record by the proposed function.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTerms {
    pub alpha: f64,
    /// One entry per explained row (empty for global records).
    pub beta: Vec<f64>,
    /// Explained row count (0 for global records).
    pub n_local: usize,
}

pub fn weight_terms(record: &ExplanationRecord) -> Result<WeightTerms> {
    let alpha = alpha(record.metric.value)?;
    match record.scope {
        Scope::Global => Ok(WeightTerms {
            alpha,
            beta: Vec::new(),
            n_local: 0,
        }),
        Scope::Local => {
            let n = record.n_rows();
            let beta = if record.is_classification() {
                let probs = record.probabilities.as_ref().ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "local classification record {}/{} has no probabilities",
                        record.model_id, record.method
                    ))
                })?;
                probs.iter().map(|&p| beta(p)).collect::<Result<Vec<_>>>()?
            } else {
                vec![1.0; n]
            };
            Ok(WeightTerms {
                alpha,
                beta,
                n_local: n,
            })
        }
    }
}

/// One record's per-feature contribution to the proposed function, before
/// cross-record summation. A degenerate normalization is reported in the
/// returned flag.
pub fn record_contribution(record: &ExplanationRecord) -> Result<(Vec<f64>, bool)> {
    let terms = weight_terms(record)?;
    let norm = normalize_minmax(&record.attributions)?;
    let d = record.n_features;
    let contribution = match record.scope {
        Scope::Global => norm.values.iter().map(|a| a * terms.alpha).collect(),
        Scope::Local => {
            let n = terms.n_local as f64;
            let mut acc = vec![0.0; d];
            for (row, beta) in norm.values.chunks_exact(d).zip(&terms.beta) {
                for (c, a) in acc.iter_mut().zip(row) {
                    *c += a / n * terms.alpha * beta;
                }
            }
            acc
        }
    };
    Ok((contribution, norm.degenerate))
}

pub fn consensus_proposed(records: &[ExplanationRecord]) -> Result<ConsensusResult> {
    let d = check_records(records)?;
    let mut warnings = Vec::new();
    let mut total = vec![0.0; d];
    for r in records {
        let (c, degenerate) = record_contribution(r)?;
        if degenerate {
            warnings.push(format!(
                "{}/{}: constant attributions normalized to zero",
                r.model_id, r.method
            ));
        }
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let norm = normalize_minmax(&total)?;
    if norm.degenerate {
        warnings.push("fused scores are constant; presented as zeros".into());
    }
    Ok(ConsensusResult::new(ConsensusFunction::Proposed, norm.values, false, warnings, records))
}

/// Dispatch by function; `n_top` only matters for voting.
pub fn run_consensus(
    function: ConsensusFunction,
    records: &[ExplanationRecord],
    n_top: usize,
) -> Result<ConsensusResult> {
    match function {
        ConsensusFunction::Arithmetic => consensus_arithmetic(records),
        ConsensusFunction::Harmonic => consensus_harmonic(records),
        ConsensusFunction::Geometric => consensus_geometric(records),
        ConsensusFunction::Ranking => consensus_ranking(records),
        ConsensusFunction::Voting => consensus_voting(records, n_top),
        ConsensusFunction::Proposed => consensus_proposed(records),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::PerformanceMetric;

    fn global(values: &[f64], metric: f64) -> ExplanationRecord {
        ExplanationRecord::global("g", "m", PerformanceMetric::auc(metric), values.to_vec())
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(normalize_minmax(&[2.0, 4.0, 6.0]).unwrap().values, vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_minmax(&[-1.0, 1.0]).unwrap().values, vec![0.0, 1.0]);
        let c = normalize_minmax(&[3.0; 3]).unwrap();
        assert_eq!(c, Normalized { values: vec![0.0; 3], degenerate: true });
        assert!(normalize_minmax(&[]).is_err());
        assert!(normalize_minmax(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn alpha_beta_values() {
        assert_eq!(alpha(0.5).unwrap(), 0.0);
        assert_eq!(alpha(1.0).unwrap(), 1.0);
        assert_eq!(alpha(0.0).unwrap(), 1.0);
        assert!((alpha(0.914).unwrap() - 0.685584).abs() < 1e-12);
        assert!((alpha(0.517).unwrap() - 0.001156).abs() < 1e-12);
        assert_eq!(alpha(-0.3).unwrap(), 1.0);
        assert_eq!(alpha(1.7).unwrap(), 1.0);
        assert!(alpha(f64::NAN).is_err());

        assert_eq!(beta(0.5).unwrap(), 0.0);
        assert_eq!(beta(1.0).unwrap(), 1.0);
        assert_eq!(beta(0.0).unwrap(), 1.0);
        assert!((beta(0.99).unwrap() - 0.9604).abs() < 1e-12);
        assert!(beta(1.01).is_err());
        assert!(beta(-0.01).is_err());
    }

    #[test]
    fn collapse_examples() {
        let rec = ExplanationRecord::local(
            "l", "m", PerformanceMetric::auc(0.9),
            vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0, 1], Some(vec![0.5, 0.5]),
        );
        assert_eq!(collapse_local(&rec), vec![2.0, 3.0]);
        let one = ExplanationRecord::local("l", "m", PerformanceMetric::r2(0.9), vec![vec![0.3, -0.2]], vec![0], None);
        assert_eq!(collapse_local(&one), vec![0.3, -0.2]);
        let zero = ExplanationRecord::local("l", "m", PerformanceMetric::r2(0.9), vec![vec![0.0; 3]; 4], vec![0, 1, 2, 3], None);
        assert_eq!(collapse_local(&zero), vec![0.0; 3]);
    }

    #[test]
    fn arithmetic_examples() {
        let r = consensus_arithmetic(&[global(&[0.1, 0.7, 0.3], 0.8)]).unwrap();
        assert_eq!(r.scores, vec![0.1, 0.7, 0.3]);
        assert_eq!(r.ranking, vec![2, 3, 1]);
        let r = consensus_arithmetic(&[global(&[1.0, 0.0], 0.8), global(&[0.0, 1.0], 0.8)]).unwrap();
        assert_eq!(r.scores, vec![0.5, 0.5]);
        assert_eq!(r.ranking, vec![1, 2]);
        let r = consensus_arithmetic(&[global(&[2.0, 4.0, 6.0], 0.8), global(&[0.0; 3], 0.8)]).unwrap();
        assert_eq!(r.scores, vec![1.0, 2.0, 3.0]);
        assert!(consensus_arithmetic(&[global(&[1.0], 0.8), global(&[1.0, 2.0], 0.8)]).is_err());
        assert!(consensus_arithmetic(&[]).is_err());
    }

    #[test]
    fn harmonic_and_geometric_examples() {
        let r = consensus_harmonic(&[global(&[2.0, 5.0], 0.8), global(&[4.0, 5.0], 0.8)]).unwrap();
        assert_eq!(r.scores, vec![8.0 / 3.0, 5.0]);
        assert!(r.warnings.is_empty());
        let r = consensus_geometric(&[global(&[4.0, 0.7], 0.8), global(&[9.0, 0.7], 0.8)]).unwrap();
        assert_eq!(r.scores[0], 6.0);
        assert!((r.scores[1] - 0.7).abs() < 1e-15);

        let r = consensus_harmonic(&[global(&[0.0, 1.0], 0.8), global(&[3.0, 1.0], 0.8)]).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].contains("F1"));
        assert!((r.scores[0] - 2.0 * MEAN_EPSILON).abs() < 1e-20);
        let r = consensus_geometric(&[global(&[-1.0, 1.0], 0.8)]).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(fractional_ranks(&[0.9, 0.1, 0.5]), vec![1.0, 3.0, 2.0]);
        assert_eq!(fractional_ranks(&[0.2; 4]), vec![2.5; 4]);
        assert_eq!(fractional_ranks(&[0.3, 0.9, 0.3]), vec![2.5, 1.0, 2.5]);
        let recs = [
            global(&[0.9, 0.5, 0.1], 0.8),
            global(&[0.5, 0.9, 0.1], 0.8),
            global(&[0.8, 0.2, 0.1], 0.8),
        ];
        let r = consensus_ranking(&recs).unwrap();
        assert!((r.scores[0] - 4.0 / 3.0).abs() < 1e-15);
        assert!(r.ascending);
        assert_eq!(r.ranking, vec![1, 2, 3]);
    }

    #[test]
    fn voting_examples() {
        let recs = [
            global(&[0.9, 0.8, 0.1], 0.8),
            global(&[0.9, 0.1, 0.8], 0.8),
            global(&[0.8, 0.9, 0.1], 0.8),
        ];
        let r = consensus_voting(&recs, 2).unwrap();
        assert_eq!(r.scores, vec![3.0, 2.0, 1.0]);
        let r = consensus_voting(&recs[..1], 2).unwrap();
        assert_eq!(r.scores, vec![1.0, 1.0, 0.0]);
        let r = consensus_voting(&recs, 3).unwrap();
        assert_eq!(r.scores, vec![3.0; 3]);
        assert!(consensus_voting(&recs, 0).is_err());
        assert!(consensus_voting(&recs, 4).is_err());
        // Ties fall to the lower index.
        let r = consensus_voting(&[global(&[0.5, 0.5, 0.5], 0.8)], 1).unwrap();
        assert_eq!(r.scores, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn proposed_examples() {
        let r = consensus_proposed(&[global(&[0.0, 0.5, 1.0], 1.0)]).unwrap();
        assert_eq!(r.scores, vec![0.0, 0.5, 1.0]);

        let r = consensus_proposed(&[global(&[0.3, 0.9, 0.1], 0.5)]).unwrap();
        assert_eq!(r.scores, vec![0.0; 3]);
        assert!(r.warnings.iter().any(|w| w.contains("constant")));

        // attr' = 0.6 on a single feature of one row among ten.
        let mut rows = vec![vec![0.0, 1.0]; 10];
        rows[0] = vec![0.6, 1.0];
        let mut probs = vec![0.5; 10];
        probs[0] = 0.99;
        let rec = ExplanationRecord::local("l", "m", PerformanceMetric::auc(0.914), rows, (0..10).collect(), Some(probs));
        let (c, _) = record_contribution(&rec).unwrap();
        assert!((c[0] - 0.0395061).abs() < 1e-7, "{}", c[0]);
        assert!((c[0] - 0.6 / 10.0 * 0.685584 * 0.9604).abs() < 1e-15);

        let weak = global(&[0.9, 0.5, 0.1], 0.517);
        let strong = global(&[0.1, 0.5, 0.9], 0.947);
        let r = consensus_proposed(&[weak, strong.clone()]).unwrap();
        assert_eq!(r.ranking, consensus_proposed(&[strong]).unwrap().ranking);
        assert_eq!(r.ranking, vec![3, 2, 1]);
    }

    #[test]
    fn proposed_requires_probabilities_for_local_classification() {
        let rec = ExplanationRecord::local("l", "m", PerformanceMetric::auc(0.9), vec![vec![0.1, 0.2]], vec![0], None);
        assert!(consensus_proposed(&[rec.clone()]).is_err());
        assert!(consensus_arithmetic(&[rec]).is_ok());
        let reg = ExplanationRecord::local("l", "m", PerformanceMetric::r2(0.9), vec![vec![0.1, 0.2]], vec![0], None);
        assert_eq!(weight_terms(&reg).unwrap().beta, vec![1.0]);
    }

    #[test]
    fn function_names_round_trip() {
        for f in ConsensusFunction::ALL {
            assert_eq!(f.as_str().parse::<ConsensusFunction>().unwrap(), f);
        }
        assert!("median".parse::<ConsensusFunction>().is_err());
    }
}
