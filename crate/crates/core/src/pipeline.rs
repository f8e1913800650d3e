//! End-to-end orchestration: run configs, the `generate`/`run`/`consensus`/
//! `evaluate` commands, and the on-disk artifact tree.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consensus::{run_consensus, ConsensusFunction, ConsensusResult, DEFAULT_N_TOP};
use crate::dataset::{builtin_spec, generate, split, write_dataset, Dataset, DatasetSpec, Task, BUILTIN_NAMES};
use crate::error::{Error, Result};
use crate::eval::{emit_charts, run_matrix, topn_hits, Cell, DatasetCase, EvalConfig, EvaluationReport, HitReport};
use crate::explain::{read_record, write_record, ExplainConfig, ExplanationRecord, Scope};
use crate::models::{train_best_of_with_candidates, ModelKind, ModelParams, TrainedModel};
use crate::seed;

pub const DESK_SAMPLES: usize = 800;
pub const DESK_REPEATS: usize = 5;
pub const PAPER_REPEATS: usize = 50;
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

/// A dataset by builtin name or as a full inline spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetEntry {
    Name(String),
    Inline(DatasetSpec),
}

impl DatasetEntry {
    pub fn name(&self) -> &str {
        match self {
            DatasetEntry::Name(n) => n,
            DatasetEntry::Inline(s) => &s.name,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(flatten)]
    pub params: ModelParams,
    /// Training repeats; the profile default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
}

impl ModelEntry {
    pub fn of(kind: ModelKind) -> Self {
        ModelEntry {
            id: None,
            params: ModelParams::default_for(kind),
            repeats: None,
        }
    }

    pub fn model_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.params.kind().as_str().to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainerSettings {
    pub max_explained: usize,
    pub permutation_repeats: usize,
    pub shapley_permutations: usize,
}

impl ExplainerSettings {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => ExplainerSettings {
                max_explained: 100,
                permutation_repeats: 5,
                shapley_permutations: 20,
            },
            Profile::Paper => {
                let d = ExplainConfig::default();
                ExplainerSettings {
                    max_explained: d.max_explained,
                    permutation_repeats: d.permutation_repeats,
                    shapley_permutations: d.shapley_permutations,
                }
            }
        }
    }
}

fn default_datasets() -> Vec<DatasetEntry> {
    BUILTIN_NAMES.iter().map(|n| DatasetEntry::Name(n.to_string())).collect()
}
fn default_models() -> Vec<ModelEntry> {
    vec![ModelEntry::of(ModelKind::Knn), ModelEntry::of(ModelKind::Forest)]
}
fn default_functions() -> Vec<ConsensusFunction> {
    ConsensusFunction::ALL.to_vec()
}
fn default_n_top() -> usize {
    DEFAULT_N_TOP
}
fn default_top_n() -> usize {
    crate::eval::DEFAULT_TOP_N
}
fn default_train_fraction() -> f64 {
    crate::dataset::DEFAULT_TRAIN_FRACTION
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment. `master_seed` is mandatory in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_datasets")]
    pub datasets: Vec<DatasetEntry>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelEntry>,
    #[serde(default = "default_functions")]
    pub functions: Vec<ConsensusFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explainer: Option<ExplainerSettings>,
    #[serde(default = "default_n_top")]
    pub n_top: usize,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default)]
    pub pooled: bool,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub profile: Profile,
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(master_seed: u64) -> Self {
        RunConfig {
            datasets: default_datasets(),
            models: default_models(),
            functions: default_functions(),
            explainer: None,
            n_top: DEFAULT_N_TOP,
            top_n: default_top_n(),
            pooled: false,
            train_fraction: default_train_fraction(),
            profile: Profile::Desk,
            master_seed,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn explainer_settings(&self) -> ExplainerSettings {
        self.explainer.clone().unwrap_or_else(|| ExplainerSettings::for_profile(self.profile))
    }

    pub fn repeats(&self, entry: &ModelEntry) -> usize {
        entry.repeats.unwrap_or(match self.profile {
            Profile::Desk => DESK_REPEATS,
            Profile::Paper => PAPER_REPEATS,
        })
    }

    /// Dataset specs after name resolution and profile sizing. The desk
    /// profile shrinks builtin datasets only; inline specs are used as given.
    pub fn specs(&self) -> Result<Vec<DatasetSpec>> {
        self.datasets
            .iter()
            .map(|entry| match entry {
                DatasetEntry::Name(name) => {
                    let spec = builtin_spec(name)?;
                    Ok(match self.profile {
                        Profile::Desk => spec.with_samples(DESK_SAMPLES),
                        Profile::Paper => spec,
                    })
                }
                DatasetEntry::Inline(spec) => {
                    spec.validate()?;
                    Ok(spec.clone())
                }
            })
            .collect()
    }

    pub fn explain_config(&self) -> ExplainConfig {
        let s = self.explainer_settings();
        ExplainConfig {
            max_explained: s.max_explained,
            permutation_repeats: s.permutation_repeats,
            shapley_permutations: s.shapley_permutations,
            seed: seed::derive_str(self.master_seed, "explain"),
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            top_n: self.top_n,
            n_top: self.n_top,
            pooled: self.pooled,
            explain: self.explain_config(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.datasets.is_empty() {
            return bad("no datasets".into());
        }
        if self.models.is_empty() {
            return bad("no models".into());
        }
        if self.functions.is_empty() {
            return bad("no consensus functions".into());
        }
        let specs = self.specs()?;
        let mut names = HashSet::new();
        for s in &specs {
            if !names.insert(s.name.as_str()) {
                return bad(format!("dataset `{}` listed twice", s.name));
            }
            if !safe_name(&s.name) {
                return bad(format!("dataset name `{}` must be alphanumeric, `-` or `.`", s.name));
            }
        }
        let mut ids = HashSet::new();
        for m in &self.models {
            let id = m.model_id();
            if !ids.insert(id.clone()) {
                return bad(format!("model id `{id}` listed twice; set distinct `id` fields"));
            }
            if !safe_name(&id) {
                return bad(format!("model id `{id}` must be alphanumeric, `-` or `.`"));
            }
            if self.repeats(m) == 0 {
                return bad(format!("model `{id}`: repeats must be positive"));
            }
        }
        let s = self.explainer_settings();
        if s.max_explained == 0 || s.permutation_repeats == 0 || s.shapley_permutations == 0 {
            return bad("explainer counts must be positive".into());
        }
        let min_d = specs.iter().map(|s| s.n_features).min().unwrap_or(0);
        if self.top_n == 0 || self.top_n > min_d {
            return bad(format!("top_n must be in 1..={min_d}, got {}", self.top_n));
        }
        if self.n_top == 0 || self.n_top > min_d {
            return bad(format!("n_top must be in 1..={min_d}, got {}", self.n_top));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        Ok(())
    }

    /// Config as hashed: everything except `output_dir`.
    fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        v.to_string()
    }

    pub fn config_hash(&self) -> String {
        hex(&Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Deterministic run directory name derived from the config hash.
    pub fn run_id(&self) -> String {
        format!("run-{}", &self.config_hash()[..12])
    }
}

fn safe_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.')
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline, as every artifact is written.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json(value)?).map_err(|e| Error::io(path, e))
}

fn dataset_seed(master: u64, name: &str) -> u64 {
    seed::derive_str(seed::derive_str(master, "dataset"), name)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDataset {
    pub name: String,
    pub path: PathBuf,
    pub summary: String,
}

fn describe(ds: &Dataset) -> String {
    let head = format!("{}: {} rows x {} features", ds.spec.name, ds.n_samples(), ds.n_features());
    match ds.class1_fraction() {
        Some(f) => format!("{head}, class-1 fraction {f:.4}"),
        None => {
            let lo = ds.targets.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ds.targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            format!("{head}, target range [{lo:.4}, {hi:.4}]")
        }
    }
}

fn generate_all(config: &RunConfig) -> Result<Vec<Dataset>> {
    config
        .specs()?
        .iter()
        .map(|s| generate(s, dataset_seed(config.master_seed, &s.name)))
        .collect()
}

/// Write one CSV per configured dataset into `config.output_dir`.
pub fn cmd_generate(config: &RunConfig) -> Result<Vec<GeneratedDataset>> {
    config.validate()?;
    mkdir(&config.output_dir)?;
    generate_all(config)?
        .iter()
        .map(|ds| {
            let path = config.output_dir.join(format!("{}.csv", ds.spec.name));
            write_dataset(ds, &path)?;
            log::info!("wrote {}", path.display());
            Ok(GeneratedDataset {
                name: ds.spec.name.clone(),
                path,
                summary: describe(ds),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub ok: bool,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub xaiconsensus: String,
    pub manifest: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub versions: Versions,
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
    pub cells_total: usize,
    pub cells_failed: usize,
    pub success: bool,
}

/// Summary of one trained model as written under `models/`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub dataset: String,
    pub model_id: String,
    pub task: Task,
    pub params: ModelParams,
    pub repeats: usize,
    pub metric: Option<crate::metrics::PerformanceMetric>,
    pub candidate_metrics: Vec<f64>,
    pub best_index: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: Manifest,
    pub report: EvaluationReport,
    pub models: Vec<ModelSummary>,
}

struct Stages(Vec<StageRecord>);

impl Stages {
    fn time<T>(&mut self, name: &str, f: impl FnOnce(&mut Vec<String>) -> Result<T>) -> Result<T> {
        log::info!("stage {name}");
        let start = Instant::now();
        let mut errors = Vec::new();
        let out = f(&mut errors);
        if let Err(e) = &out {
            errors.push(e.to_string());
        }
        for e in &errors {
            log::warn!("{name}: {e}");
        }
        self.0.push(StageRecord {
            name: name.to_string(),
            ok: errors.is_empty(),
            seconds: start.elapsed().as_secs_f64(),
            errors,
        });
        out
    }
}

fn method_file(dataset: &str, model: &str, r: &ExplanationRecord) -> String {
    format!("{dataset}_{model}_{}.json", r.method)
}

/// Full experiment: generate, split, train, explain, fuse, evaluate, chart.
/// Writes `<output_dir>/<run-id>/` and returns the manifest; `success` is
/// false when any model or grid cell failed.
pub fn cmd_run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let run_id = config.run_id();
    let run_dir = config.output_dir.join(&run_id);
    let sub = |s: &str| run_dir.join(s);
    for d in ["datasets", "models", "attributions", "consensus", "reports", "charts"] {
        mkdir(&sub(d))?;
    }
    let mut stages = Stages(Vec::new());
    let master = config.master_seed;

    let datasets = stages.time("generate", |_| {
        let all = generate_all(config)?;
        for ds in &all {
            write_dataset(ds, &sub("datasets").join(format!("{}.csv", ds.spec.name)))?;
            log::info!("{}", describe(ds));
        }
        Ok(all)
    })?;

    let splits = stages.time("split", |_| {
        datasets
            .iter()
            .map(|ds| split(ds, config.train_fraction, seed::derive_str(seed::derive_str(master, "split"), &ds.spec.name)))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut failed_models: Vec<(String, String, String)> = Vec::new();
    let (cases, summaries) = stages.time("train", |errors| {
        let mut cases = Vec::new();
        let mut summaries = Vec::new();
        for (ds, (train, test)) in datasets.iter().zip(&splits) {
            let mut models: Vec<TrainedModel> = Vec::new();
            let base = seed::derive_str(seed::derive_str(master, "train"), &ds.spec.name);
            for entry in &config.models {
                let id = entry.model_id();
                let repeats = config.repeats(entry);
                match train_best_of_with_candidates(train, test, &entry.params, repeats, seed::derive_str(base, &id)) {
                    Ok(best) => {
                        let model = best.model.with_id(id.clone());
                        if let Some(m) = model.metric {
                            log::info!("{}/{id}: {:?} {:.4}", ds.spec.name, m.metric_type, m.value);
                        }
                        let summary = ModelSummary {
                            dataset: ds.spec.name.clone(),
                            model_id: id.clone(),
                            task: ds.task(),
                            params: entry.params.clone(),
                            repeats,
                            metric: model.metric,
                            candidate_metrics: best.candidate_metrics,
                            best_index: best.best_index,
                        };
                        write_json(&summary, &sub("models").join(format!("{}_{id}.json", ds.spec.name)))?;
                        summaries.push(summary);
                        models.push(model);
                    }
                    Err(e) => {
                        errors.push(format!("{}/{id}: {e}", ds.spec.name));
                        failed_models.push((ds.spec.name.clone(), id, e.to_string()));
                    }
                }
            }
            cases.push(DatasetCase {
                name: ds.spec.name.clone(),
                spec: ds.spec.clone(),
                train: train.clone(),
                test: test.clone(),
                models,
            });
        }
        Ok((cases, summaries))
    })?;

    let eval_config = config.eval_config();
    let out = stages.time("explain_and_fuse", |errors| {
        let out = run_matrix(&cases, &config.functions, &eval_config);
        for c in &out.report.cells {
            if let Some(e) = &c.error {
                errors.push(format!("{}: {e}", c.stem()));
            }
        }
        Ok(out)
    })?;

    // Failed models still occupy their grid cells, as errors.
    let mut cells = out.report.cells.clone();
    for (ds, id, e) in &failed_models {
        for &f in &config.functions {
            cells.push(Cell {
                dataset: ds.clone(),
                model: id.clone(),
                function: f,
                report: None,
                error: Some(format!("training failed: {e}")),
            });
        }
    }
    let ds_pos = |n: &str| cases.iter().position(|c| c.name == n).unwrap_or(usize::MAX);
    let model_pos = |m: &str| {
        config
            .models
            .iter()
            .position(|e| e.model_id() == m)
            .unwrap_or(config.models.len())
    };
    let fn_pos = |f: ConsensusFunction| config.functions.iter().position(|&g| g == f);
    cells.sort_by_key(|c| (ds_pos(&c.dataset), model_pos(&c.model), fn_pos(c.function)));
    let report = EvaluationReport::from_cells(cells);

    stages.time("write", |_| {
        for e in &out.explained {
            if let Ok(records) = &e.records {
                for r in records {
                    write_record(r, &sub("attributions").join(method_file(&e.dataset, &e.model, r)))?;
                }
            }
        }
        for (cell, result) in &out.consensus {
            write_json(result, &sub("consensus").join(format!("{}.json", cell.stem())))?;
        }
        write_json(&report, &sub("reports").join("report.json"))
    })?;

    stages.time("charts", |_| emit_charts(&report, &sub("charts")).map(|_| ()))?;

    let cells_failed = report.failed_cells();
    let manifest = Manifest {
        run_id,
        config_hash: config.config_hash(),
        master_seed: master,
        versions: Versions {
            xaiconsensus: env!("CARGO_PKG_VERSION").to_string(),
            manifest: MANIFEST_VERSION,
        },
        config: config.clone(),
        cells_total: report.cells.len(),
        cells_failed,
        success: cells_failed == 0 && stages.0.iter().all(|s| s.ok),
        stages: stages.0,
    };
    write_json(&manifest, &run_dir.join("manifest.json"))?;
    Ok(RunOutcome {
        run_dir,
        manifest,
        report,
        models: summaries,
    })
}

/// Read record files, checking them against each other and against what
/// `function` needs, so errors name the offending file.
pub fn load_records(paths: &[PathBuf], function: ConsensusFunction) -> Result<Vec<ExplanationRecord>> {
    if paths.is_empty() {
        return Err(Error::Config("at least one attribution file is required".into()));
    }
    let mut records: Vec<ExplanationRecord> = Vec::with_capacity(paths.len());
    for path in paths {
        let r = read_record(path)?;
        if let Some(first) = records.first() {
            if first.n_features != r.n_features {
                return Err(Error::Schema {
                    path: path.clone(),
                    field: "n_features".into(),
                    reason: format!(
                        "{} does not match {} in {}",
                        r.n_features,
                        first.n_features,
                        paths[0].display()
                    ),
                });
            }
        }
        if function == ConsensusFunction::Proposed
            && r.scope == Scope::Local
            && r.is_classification()
            && r.probabilities.is_none()
        {
            return Err(Error::Schema {
                path: path.clone(),
                field: "probabilities".into(),
                reason: "required on local classification records for the proposed function".into(),
            });
        }
        records.push(r);
    }
    Ok(records)
}

/// Fuse externally supplied record files with one function.
pub fn cmd_consensus(paths: &[PathBuf], function: ConsensusFunction, n_top: usize) -> Result<ConsensusResult> {
    let records = load_records(paths, function)?;
    run_consensus(function, &records, n_top)
}

pub fn write_consensus(result: &ConsensusResult, path: &Path) -> Result<()> {
    write_json(result, path)
}

pub fn read_consensus(path: &Path) -> Result<ConsensusResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let r: ConsensusResult = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        field: "<document>".into(),
        reason: e.to_string(),
    })?;
    let d = r.scores.len();
    let mut seen: Vec<usize> = r.ranking.clone();
    seen.sort_unstable();
    if seen != (1..=d).collect::<Vec<_>>() {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            field: "ranking".into(),
            reason: format!("must be a permutation of 1..={d}"),
        });
    }
    Ok(r)
}

/// Score a stored consensus result against an expected feature set.
pub fn cmd_evaluate(consensus_path: &Path, expected: &BTreeSet<usize>, top_n: usize) -> Result<HitReport> {
    let result = read_consensus(consensus_path)?;
    topn_hits(&result, expected, top_n).map_err(|e| match e {
        Error::InvalidInput(m) => Error::Config(m),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_hash() {
        let c = RunConfig::from_json(r#"{"master_seed": 7}"#).unwrap();
        assert_eq!(c, RunConfig::new(7));
        c.validate().unwrap();
        assert_eq!(c.specs().unwrap().iter().map(|s| s.n_samples).collect::<Vec<_>>(), vec![800; 4]);
        assert_eq!(c.repeats(&c.models[0]), DESK_REPEATS);

        let mut moved = c.clone();
        moved.output_dir = "elsewhere".into();
        assert_eq!(moved.run_id(), c.run_id());
        assert_ne!(RunConfig::new(8).config_hash(), c.config_hash());
        assert_eq!(c.config_hash().len(), 64);
    }

    #[test]
    fn paper_profile_restores_sizes() {
        let mut c = RunConfig::new(1);
        c.profile = Profile::Paper;
        let n: Vec<usize> = c.specs().unwrap().iter().map(|s| s.n_samples).collect();
        assert_eq!(n, vec![2000, 1500, 2500, 2000]);
        assert_eq!(c.repeats(&c.models[1]), PAPER_REPEATS);
        assert_eq!(c.explainer_settings().max_explained, 200);
    }

    #[test]
    fn seed_is_required() {
        assert!(matches!(RunConfig::from_json("{}"), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        let c = RunConfig::from_json(r#"{"master_seed": 1, "datasets": ["DS9"]}"#).unwrap();
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("DS9"));
        assert!(e.is_validation());

        let c = RunConfig::from_json(r#"{"master_seed": 1, "models": [{"kind": "knn"}, {"kind": "knn", "k": 3}]}"#).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("twice"));

        let c = RunConfig::from_json(
            r#"{"master_seed": 1, "models": [{"kind": "knn", "repeats": 2}, {"id": "knn3", "kind": "knn", "k": 3}]}"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.repeats(&c.models[0]), 2);
        assert_eq!(c.models[1].model_id(), "knn3");

        let mut c = RunConfig::new(1);
        c.top_n = 21;
        assert!(c.validate().is_err());
        assert!(RunConfig::from_json(r#"{"master_seed": 1, "bogus": 2}"#).is_err());
    }

    #[test]
    fn inline_specs_parse() {
        let spec = builtin_spec("DS4").unwrap().with_samples(50);
        let json = format!(r#"{{"master_seed": 3, "datasets": ["DS1", {}]}}"#, serde_json::to_string(&spec).unwrap());
        let c = RunConfig::from_json(&json).unwrap();
        c.validate().unwrap();
        assert_eq!(c.specs().unwrap()[1], spec);
    }
}
