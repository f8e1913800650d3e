//! Model-agnostic attribution methods.
//!
//! Global methods: permutation importance and forest impurity importance.
//! Local methods: Monte-Carlo permutation Shapley and mean-substitution
//! occlusion. [`exact_shapley`] enumerates every coalition and serves as the
//! reference the sampling estimator is tested against.
//!
//! The value function `v` is the class-1 probability for classifiers and the
//! raw prediction for regressors.

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricType, PerformanceMetric};
use crate::models::{Predictor, TrainedModel};
use crate::seed;

pub const PERMUTATION_IMPORTANCE: &str = "permutation_importance";
pub const IMPURITY_IMPORTANCE: &str = "impurity_importance";
pub const SHAPLEY_MC: &str = "shapley_mc";
pub const OCCLUSION: &str = "occlusion";

/// Largest feature count [`exact_shapley`] will enumerate.
pub const EXACT_SHAPLEY_MAX_FEATURES: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Global,
    Local,
}

/// One (model, method) attribution result, in its on-disk shape.
///
/// Local attributions are stored row-major: row `i` holds
/// `attributions[i * n_features..(i + 1) * n_features]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub method: String,
    pub scope: Scope,
    pub model_id: String,
    pub metric: PerformanceMetric,
    pub n_features: usize,
    pub attributions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_ids: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

impl ExplanationRecord {
    pub fn global(
        method: &str,
        model_id: &str,
        metric: PerformanceMetric,
        attributions: Vec<f64>,
    ) -> Self {
        ExplanationRecord {
            method: method.to_string(),
            scope: Scope::Global,
            model_id: model_id.to_string(),
            metric,
            n_features: attributions.len(),
            attributions,
            row_ids: None,
            probabilities: None,
        }
    }

    /// Build a local record from per-row attribution vectors.
    pub fn local(
        method: &str,
        model_id: &str,
        metric: PerformanceMetric,
        rows: Vec<Vec<f64>>,
        row_ids: Vec<usize>,
        probabilities: Option<Vec<f64>>,
    ) -> Self {
        let n_features = rows.first().map_or(0, Vec::len);
        ExplanationRecord {
            method: method.to_string(),
            scope: Scope::Local,
            model_id: model_id.to_string(),
            metric,
            n_features,
            attributions: rows.into_iter().flatten().collect(),
            row_ids: Some(row_ids),
            probabilities,
        }
    }

    pub fn is_classification(&self) -> bool {
        self.metric.metric_type == MetricType::Auc
    }

    /// Number of explained rows (1 for global records).
    pub fn n_rows(&self) -> usize {
        match self.scope {
            Scope::Global => 1,
            Scope::Local => self.attributions.len() / self.n_features.max(1),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.attributions.chunks_exact(self.n_features.max(1))
    }

    /// Check shape, finiteness and probability ranges.
    /// Returns the offending field name with the reason.
    pub fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.n_features == 0 {
            return Err(("n_features", "must be positive".into()));
        }
        if let Some(i) = self.attributions.iter().position(|v| !v.is_finite()) {
            return Err(("attributions", format!("entry {i} is not finite")));
        }
        if !self.metric.value.is_finite() {
            return Err(("metric", "value is not finite".into()));
        }
        match self.scope {
            Scope::Global => {
                if self.attributions.len() != self.n_features {
                    return Err((
                        "attributions",
                        format!(
                            "global record has {} entries, n_features is {}",
                            self.attributions.len(),
                            self.n_features
                        ),
                    ));
                }
                if self.probabilities.is_some() {
                    return Err(("probabilities", "not allowed on global records".into()));
                }
                if self.row_ids.is_some() {
                    return Err(("row_ids", "not allowed on global records".into()));
                }
            }
            Scope::Local => {
                if self.attributions.is_empty() || !self.attributions.len().is_multiple_of(self.n_features) {
                    return Err((
                        "attributions",
                        format!(
                            "{} entries do not form rows of {} features",
                            self.attributions.len(),
                            self.n_features
                        ),
                    ));
                }
                let n = self.n_rows();
                match &self.row_ids {
                    None => return Err(("row_ids", "required on local records".into())),
                    Some(ids) if ids.len() != n => {
                        return Err(("row_ids", format!("{} ids for {n} rows", ids.len())))
                    }
                    _ => {}
                }
                if let Some(p) = &self.probabilities {
                    if !self.is_classification() {
                        return Err(("probabilities", "only allowed for classification".into()));
                    }
                    if p.len() != n {
                        return Err(("probabilities", format!("{} values for {n} rows", p.len())));
                    }
                    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return Err(("probabilities", format!("{bad} is outside [0, 1]")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Write one record as pretty JSON.
pub fn write_record(record: &ExplanationRecord, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(record)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Read and validate a record file; errors name the file and the field.
pub fn read_record(path: &Path) -> Result<ExplanationRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_record(&text, path)
}

pub(crate) fn parse_record(text: &str, path: &Path) -> Result<ExplanationRecord> {
    let schema = |field: &str, reason: String| Error::Schema {
        path: path.to_path_buf(),
        field: field.to_string(),
        reason,
    };
    let value: Value = serde_json::from_str(text).map_err(|e| schema("<document>", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| schema("<document>", "expected a JSON object".into()))?;
    for field in ["method", "scope", "model_id", "metric", "n_features", "attributions"] {
        if !obj.contains_key(field) {
            return Err(schema(field, "missing".into()));
        }
    }
    for field in ["method", "scope", "model_id", "metric", "n_features", "attributions", "row_ids", "probabilities"] {
        if let Some(v) = obj.get(field) {
            check_field(field, v).map_err(|e| schema(field, e))?;
        }
    }
    let record: ExplanationRecord =
        serde_json::from_value(value).map_err(|e| schema("<document>", e.to_string()))?;
    record.check().map_err(|(field, reason)| schema(field, reason))?;
    Ok(record)
}

fn check_field(field: &str, v: &Value) -> std::result::Result<(), String> {
    let r = match field {
        "method" | "model_id" => serde_json::from_value::<String>(v.clone()).map(drop),
        "scope" => serde_json::from_value::<Scope>(v.clone()).map(drop),
        "metric" => serde_json::from_value::<PerformanceMetric>(v.clone()).map(drop),
        "n_features" => serde_json::from_value::<usize>(v.clone()).map(drop),
        "attributions" | "probabilities" => serde_json::from_value::<Vec<f64>>(v.clone()).map(drop),
        "row_ids" => serde_json::from_value::<Vec<usize>>(v.clone()).map(drop),
        _ => Ok(()),
    };
    r.map_err(|e| e.to_string())
}

fn require_metric(model: &dyn Predictor) -> Result<PerformanceMetric> {
    model.metric().ok_or_else(|| {
        Error::InvalidInput(format!(
            "model `{}` has no recorded metric; evaluate it first",
            model.model_id()
        ))
    })
}

fn check_data(model: &dyn Predictor, data: &Dataset) -> Result<()> {
    if data.n_features() != model.n_features() {
        return Err(Error::WidthMismatch {
            expected: model.n_features(),
            got: data.n_features(),
        });
    }
    model.check_width(&data.rows)
}

fn score(task: Task, targets: &[f64], values: &[f64]) -> Result<f64> {
    match task {
        Task::Classification => metrics::auc(targets, values),
        Task::Regression => metrics::r2(targets, values),
    }
}

/// Mean metric drop (AUC or R²) when one column is shuffled, per feature.
pub fn permutation_importance(
    model: &dyn Predictor,
    data: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<ExplanationRecord> {
    if repeats == 0 {
        return Err(Error::InvalidParams("permutation repeats must be at least 1".into()));
    }
    check_data(model, data)?;
    let metric = require_metric(model)?;
    let task = model.task();
    let baseline = score(task, &data.targets, &model.values(&data.rows)?)?;

    let drops: Result<Vec<f64>> = (0..model.n_features())
        .into_par_iter()
        .map(|j| {
            let mut rng = seed::rng(seed::derive(seed, j as u64));
            let mut rows = data.rows.clone();
            let mut column: Vec<f64> = data.rows.iter().map(|r| r[j]).collect();
            let mut total = 0.0;
            for _ in 0..repeats {
                column.shuffle(&mut rng);
                for (r, &v) in rows.iter_mut().zip(&column) {
                    r[j] = v;
                }
                let values: Vec<f64> = rows.iter().map(|r| model.value(r)).collect();
                total += baseline - score(task, &data.targets, &values)?;
            }
            Ok(total / repeats as f64)
        })
        .collect();
    Ok(ExplanationRecord::global(
        PERMUTATION_IMPORTANCE,
        model.model_id(),
        metric,
        drops?,
    ))
}

/// Forest impurity decrease per feature, normalized to sum to 1.
pub fn impurity_importance(model: &TrainedModel) -> Result<ExplanationRecord> {
    let forest = model.forest().ok_or_else(|| Error::Unsupported {
        op: IMPURITY_IMPORTANCE,
        what: format!("{} model `{}`", model.kind, model.model_id),
    })?;
    let metric = require_metric(model)?;
    let totals = forest.impurity_totals();
    let sum: f64 = totals.iter().sum();
    let attributions = if sum > 0.0 {
        totals.iter().map(|v| v / sum).collect()
    } else {
        vec![0.0; totals.len()]
    };
    Ok(ExplanationRecord::global(
        IMPURITY_IMPORTANCE,
        &model.model_id,
        metric,
        attributions,
    ))
}

fn explained_rows<'a>(data: &'a Dataset, row_ids: &[usize]) -> Result<Vec<&'a [f64]>> {
    if row_ids.is_empty() {
        return Err(Error::InvalidInput("no rows to explain".into()));
    }
    row_ids
        .iter()
        .map(|&i| {
            data.rows.get(i).map(Vec::as_slice).ok_or_else(|| {
                Error::InvalidInput(format!("row id {i} out of range for {} rows", data.n_samples()))
            })
        })
        .collect()
}

fn row_probabilities(model: &dyn Predictor, rows: &[&[f64]]) -> Option<Vec<f64>> {
    (model.task() == Task::Classification).then(|| rows.iter().map(|r| model.value(r)).collect())
}

/// Permutation-sampling Shapley values for `explain.rows[row_ids]`.
///
/// Each sampled permutation draws one background row; features are switched
/// from the background to the explained row in permutation order and each
/// switch's change in `v` is credited to the switched feature.
pub fn shapley_mc(
    model: &dyn Predictor,
    background: &Dataset,
    explain: &Dataset,
    row_ids: &[usize],
    n_permutations: usize,
    seed: u64,
) -> Result<ExplanationRecord> {
    if n_permutations == 0 {
        return Err(Error::InvalidParams("n_permutations must be at least 1".into()));
    }
    if background.n_samples() == 0 {
        return Err(Error::InvalidInput("background set is empty".into()));
    }
    check_data(model, background)?;
    check_data(model, explain)?;
    let metric = require_metric(model)?;
    let rows = explained_rows(explain, row_ids)?;
    let d = model.n_features();

    let phis: Vec<Vec<f64>> = rows
        .par_iter()
        .zip(row_ids.par_iter())
        .map(|(x, &id)| {
            let mut rng = seed::rng(seed::derive(seed, id as u64));
            let mut order: Vec<usize> = (0..d).collect();
            let mut phi = vec![0.0; d];
            for _ in 0..n_permutations {
                order.shuffle(&mut rng);
                let b = &background.rows[rng.gen_range(0..background.n_samples())];
                let mut z = b.clone();
                let mut prev = model.value(&z);
                for &j in &order {
                    z[j] = x[j];
                    let cur = model.value(&z);
                    phi[j] += cur - prev;
                    prev = cur;
                }
            }
            phi.iter_mut().for_each(|p| *p /= n_permutations as f64);
            phi
        })
        .collect();

    Ok(ExplanationRecord::local(
        SHAPLEY_MC,
        model.model_id(),
        metric,
        phis,
        row_ids.to_vec(),
        row_probabilities(model, &rows),
    ))
}

/// Exact Shapley values of `v(S)`: features in `S` from `x`, the rest from
/// `background_row`, by enumerating all `2^d` coalitions.
pub fn exact_shapley(model: &dyn Predictor, background_row: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let d = model.n_features();
    if d > EXACT_SHAPLEY_MAX_FEATURES {
        return Err(Error::InvalidInput(format!(
            "exact Shapley enumerates 2^d coalitions; d = {d} exceeds {EXACT_SHAPLEY_MAX_FEATURES}"
        )));
    }
    for r in [background_row, x] {
        if r.len() != d {
            return Err(Error::WidthMismatch { expected: d, got: r.len() });
        }
    }
    let n_masks = 1usize << d;
    let values: Vec<f64> = (0..n_masks)
        .map(|mask| {
            let z: Vec<f64> = (0..d)
                .map(|j| if mask >> j & 1 == 1 { x[j] } else { background_row[j] })
                .collect();
            model.value(&z)
        })
        .collect();

    // weight(s) = s! (d - s - 1)! / d!
    let fact: Vec<f64> = (0..=d).scan(1.0, |acc, i| {
        if i > 0 {
            *acc *= i as f64;
        }
        Some(*acc)
    })
    .collect();
    let weight: Vec<f64> = (0..d).map(|s| fact[s] * fact[d - s - 1] / fact[d]).collect();

    let mut phi = vec![0.0; d];
    for mask in 0..n_masks {
        let s = mask.count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if mask >> j & 1 == 0 {
                *p += weight[s] * (values[mask | 1 << j] - values[mask]);
            }
        }
    }
    Ok(phi)
}

/// `v(x) - v(x with feature j set to its training mean)` for every feature.
pub fn occlusion(
    model: &dyn Predictor,
    train: &Dataset,
    explain: &Dataset,
    row_ids: &[usize],
) -> Result<ExplanationRecord> {
    check_data(model, train)?;
    check_data(model, explain)?;
    if train.n_samples() == 0 {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let metric = require_metric(model)?;
    let rows = explained_rows(explain, row_ids)?;
    let n = train.n_samples() as f64;
    let d = model.n_features();
    let means: Vec<f64> = (0..d)
        .map(|j| train.rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();

    let attrs: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|x| {
            let full = model.value(x);
            let mut z = x.to_vec();
            (0..d)
                .map(|j| {
                    z[j] = means[j];
                    let occluded = model.value(&z);
                    z[j] = x[j];
                    full - occluded
                })
                .collect()
        })
        .collect();

    Ok(ExplanationRecord::local(
        OCCLUSION,
        model.model_id(),
        metric,
        attrs,
        row_ids.to_vec(),
        row_probabilities(model, &rows),
    ))
}

/// Settings for [`explain_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    /// Cap on test rows explained by local methods.
    pub max_explained: usize,
    pub permutation_repeats: usize,
    pub shapley_permutations: usize,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            max_explained: 200,
            permutation_repeats: 5,
            shapley_permutations: 50,
            seed: 0,
        }
    }
}

/// Seeded sample of up to `cap` row indices without replacement, ascending.
pub fn select_rows(n_rows: usize, cap: usize, seed: u64) -> Vec<usize> {
    let take = cap.min(n_rows);
    let mut ids = sample(&mut seed::rng(seed), n_rows, take).into_vec();
    ids.sort_unstable();
    ids
}

/// Run every applicable method: permutation importance on `test`, impurity
/// importance for forests, then Shapley and occlusion on sampled test rows.
pub fn explain_suite(
    model: &TrainedModel,
    train: &Dataset,
    test: &Dataset,
    config: &ExplainConfig,
) -> Result<Vec<ExplanationRecord>> {
    if config.max_explained == 0 {
        return Err(Error::InvalidParams("max_explained must be at least 1".into()));
    }
    let ids = select_rows(test.n_samples(), config.max_explained, seed::derive_str(config.seed, "rows"));
    let mut out = vec![permutation_importance(
        model,
        test,
        config.permutation_repeats,
        seed::derive_str(config.seed, PERMUTATION_IMPORTANCE),
    )?];
    if model.forest().is_some() {
        out.push(impurity_importance(model)?);
    }
    out.push(shapley_mc(
        model,
        train,
        test,
        &ids,
        config.shapley_permutations,
        seed::derive_str(config.seed, SHAPLEY_MC),
    )?);
    out.push(occlusion(model, train, test, &ids)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{builtin_spec, generate, split, DatasetSpec, RuleExpr};
    use crate::models::{oracle_model, train_forest, train_knn, FnModel, ForestParams};

    fn additive() -> FnModel<impl Fn(&[f64]) -> f64 + Sync> {
        FnModel::new("add", Task::Regression, 2, |x: &[f64]| 2.0 * x[0] + 3.0 * x[1]).with_metric(0.9)
    }

    fn table(rows: Vec<Vec<f64>>) -> Dataset {
        let d = rows[0].len();
        let rule = (1..=d).map(RuleExpr::feature).reduce(|a, b| a + b).unwrap();
        let spec = DatasetSpec::new("t", Task::Regression, rows.len().max(2), d, rule.clone()).unwrap();
        let targets = rows.iter().map(|r| rule.eval(r)).collect();
        Dataset { spec, rows, targets, seed: 0 }
    }

    #[test]
    fn shapley_mc_additive_is_exact() {
        let m = additive();
        let bg = table(vec![vec![0.5, 0.5]]);
        let ex = table(vec![vec![1.0, 1.0]]);
        for p in [1, 7, 50] {
            let rec = shapley_mc(&m, &bg, &ex, &[0], p, 3).unwrap();
            assert_eq!(rec.attributions, vec![1.0, 1.5]);
            assert!(rec.probabilities.is_none());
        }
        assert_eq!(exact_shapley(&m, &[0.5, 0.5], &[1.0, 1.0]).unwrap(), vec![1.0, 1.5]);
    }

    #[test]
    fn constant_model_gets_zero() {
        let m = FnModel::new("c", Task::Regression, 3, |_: &[f64]| 4.2).with_metric(0.0);
        let data = table(vec![vec![0.1, 0.2, 0.3], vec![0.9, 0.5, 0.4], vec![0.3, 0.3, 0.8]]);
        let rec = shapley_mc(&m, &data, &data, &[0, 1, 2], 20, 1).unwrap();
        assert!(rec.attributions.iter().all(|&v| v == 0.0));
        let rec = occlusion(&m, &data, &data, &[0, 2]).unwrap();
        assert!(rec.attributions.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_shapley_axioms() {
        let dictator = FnModel::new("x1", Task::Regression, 3, |x: &[f64]| x[0]);
        assert_eq!(exact_shapley(&dictator, &[0.0; 3], &[1.0; 3]).unwrap(), vec![1.0, 0.0, 0.0]);

        let sym = FnModel::new("sym", Task::Regression, 2, |x: &[f64]| x[0] + x[1]);
        let phi = exact_shapley(&sym, &[0.1, 0.1], &[0.7, 0.7]).unwrap();
        assert_eq!(phi[0], phi[1]);

        let f = |x: &[f64]| x[0] * x[1] + (x[2] * 3.0).sin() * x[3] + x[1].powi(3);
        let m = FnModel::new("f", Task::Regression, 4, f);
        let (bg, x) = ([0.2, 0.9, 0.4, 0.1], [0.8, 0.3, 0.6, 0.7]);
        let phi = exact_shapley(&m, &bg, &x).unwrap();
        assert!((phi.iter().sum::<f64>() - (f(&x) - f(&bg))).abs() < 1e-12);

        let wide = FnModel::new("w", Task::Regression, 16, |_: &[f64]| 0.0);
        assert!(exact_shapley(&wide, &[0.0; 16], &[0.0; 16]).is_err());
    }

    #[test]
    fn shapley_mc_efficiency_with_fixed_background() {
        let f = |x: &[f64]| x[0] * x[1] + x[2].powi(2) - x[3] * x[0];
        let m = FnModel::new("f", Task::Regression, 4, f).with_metric(0.5);
        let bg = table(vec![vec![0.3, 0.6, 0.2, 0.5]]);
        let ex = table(vec![vec![0.9, 0.1, 0.8, 0.4]]);
        let rec = shapley_mc(&m, &bg, &ex, &[0], 200, 5).unwrap();
        let want = f(&ex.rows[0]) - f(&bg.rows[0]);
        // Every permutation telescopes, so efficiency holds per sample.
        assert!((rec.attributions.iter().sum::<f64>() - want).abs() < 1e-12);
    }

    #[test]
    fn occlusion_substitution() {
        let m = additive();
        let train = table(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let ex = table(vec![vec![1.0, 1.0]]);
        let rec = occlusion(&m, &train, &ex, &[0]).unwrap();
        assert_eq!(rec.attributions, vec![1.0, 1.5]);
        assert_eq!(rec.row_ids, Some(vec![0]));
        assert!(occlusion(&m, &train, &table(vec![vec![1.0, 1.0, 1.0]]), &[0]).is_err());
        assert!(occlusion(&m, &train, &ex, &[]).is_err());
    }

    #[test]
    fn empty_background_is_rejected() {
        let m = additive();
        let mut bg = table(vec![vec![0.5, 0.5]]);
        bg.rows.clear();
        bg.targets.clear();
        let ex = table(vec![vec![1.0, 1.0]]);
        assert!(shapley_mc(&m, &bg, &ex, &[0], 5, 0).is_err());
    }

    #[test]
    fn oracle_ignores_unreferenced_features() {
        let spec = builtin_spec("DS1").unwrap().with_samples(800);
        let d = generate(&spec, 21).unwrap();
        let o = oracle_model(&spec).unwrap();
        let rec = permutation_importance(&o, &d, 5, 4).unwrap();
        for j in 1..=20 {
            let a = rec.attributions[j - 1];
            if spec.expected_features.contains(&j) {
                assert!(a > 0.0, "F{j}: {a}");
            } else {
                assert_eq!(a, 0.0, "F{j}");
            }
        }
        assert_eq!(rec, permutation_importance(&o, &d, 5, 4).unwrap());
        assert!(permutation_importance(&o, &generate(&builtin_spec("DS4").unwrap().with_samples(20), 0).unwrap(), 1, 0).is_err());
    }

    #[test]
    fn impurity_importance_single_feature() {
        let f = RuleExpr::feature;
        let spec = DatasetSpec::new("one", Task::Classification, 200, 3, f(1).less_than(RuleExpr::constant(0.5)))
            .unwrap();
        let d = generate(&spec, 3).unwrap();
        let mut m = train_forest(&d, &ForestParams { n_trees: 20, max_depth: 1, max_features: Some(3) }, 2).unwrap();
        m.evaluate(&d).unwrap();
        let rec = impurity_importance(&m).unwrap();
        assert_eq!(rec.attributions, vec![1.0, 0.0, 0.0]);

        let mut knn = train_knn(&d, 3).unwrap();
        knn.evaluate(&d).unwrap();
        assert!(impurity_importance(&knn).is_err());
    }

    #[test]
    fn impurity_on_ds4_finds_rule_features() {
        let spec = builtin_spec("DS4").unwrap().with_samples(800);
        let mut good = 0;
        for s in 0..5 {
            let d = generate(&spec, s).unwrap();
            let mut m = train_forest(&d, &ForestParams::default(), s).unwrap();
            m.evaluate(&d).unwrap();
            let rec = impurity_importance(&m).unwrap();
            assert!(rec.attributions.iter().all(|&v| v >= 0.0));
            assert!((rec.attributions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let mut order: Vec<usize> = (0..30).collect();
            order.sort_by(|&a, &b| rec.attributions[b].total_cmp(&rec.attributions[a]));
            let hits = order[..4].iter().filter(|&&j| spec.expected_features.contains(&(j + 1))).count();
            if hits >= 3 {
                good += 1;
            }
        }
        assert!(good >= 4, "{good}/5 seeds");
    }

    #[test]
    fn suite_counts_and_determinism() {
        let spec = builtin_spec("DS1").unwrap().with_samples(200);
        let d = generate(&spec, 6).unwrap();
        let (train, test) = split(&d, 0.8, 6).unwrap();
        let mut forest = train_forest(&train, &ForestParams { n_trees: 10, ..Default::default() }, 1).unwrap();
        forest.evaluate(&test).unwrap();
        let mut knn = train_knn(&train, 5).unwrap();
        knn.evaluate(&test).unwrap();
        let cfg = ExplainConfig {
            max_explained: 15,
            shapley_permutations: 5,
            seed: 9,
            ..Default::default()
        };
        let recs = explain_suite(&forest, &train, &test, &cfg).unwrap();
        assert_eq!(recs.len(), 4);
        let scopes: Vec<Scope> = recs.iter().map(|r| r.scope).collect();
        assert_eq!(scopes.iter().filter(|&&s| s == Scope::Global).count(), 2);
        assert_eq!(explain_suite(&knn, &train, &test, &cfg).unwrap().len(), 3);
        assert_eq!(recs, explain_suite(&forest, &train, &test, &cfg).unwrap());
        for r in &recs {
            r.check().unwrap();
            assert_eq!(r.metric, forest.metric.unwrap());
            if r.scope == Scope::Local {
                assert_eq!(r.n_rows(), 15);
                let p = r.probabilities.as_ref().unwrap();
                assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn record_json_round_trip_and_schema_errors() {
        let p = Path::new("r.json");
        let rec = ExplanationRecord::local(
            SHAPLEY_MC,
            "m",
            PerformanceMetric::auc(0.8),
            vec![vec![0.1, 0.2], vec![0.3, 0.4]],
            vec![4, 7],
            Some(vec![0.9, 0.2]),
        );
        let text = serde_json::to_string(&rec).unwrap();
        assert!(text.contains("\"metric\":{\"type\":\"auc\",\"value\":0.8}"));
        assert_eq!(parse_record(&text, p).unwrap(), rec);

        let field_of = |t: &str| match parse_record(t, p) {
            Err(Error::Schema { field, .. }) => field,
            other => panic!("unexpected {other:?}"),
        };
        let g = serde_json::to_value(ExplanationRecord::global("pi", "m", PerformanceMetric::r2(0.5), vec![1.0, 2.0])).unwrap();
        let mut v = g.clone();
        v.as_object_mut().unwrap().remove("metric");
        assert_eq!(field_of(&v.to_string()), "metric");
        let mut v = g.clone();
        v["attributions"] = serde_json::json!([1.0]);
        assert_eq!(field_of(&v.to_string()), "attributions");
        let mut v = g.clone();
        v["n_features"] = serde_json::json!("two");
        assert_eq!(field_of(&v.to_string()), "n_features");
        let mut v = serde_json::to_value(&rec).unwrap();
        v["probabilities"] = serde_json::json!([0.5, 1.5]);
        assert_eq!(field_of(&v.to_string()), "probabilities");
    }
}
