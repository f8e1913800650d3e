//! Ground-truth scoring of consensus results: top-N hit analysis, the
//! (dataset, model, function) evaluation grid, and chart emission.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::{run_consensus, ConsensusFunction, ConsensusResult, DEFAULT_N_TOP};
use crate::dataset::{Dataset, DatasetSpec};
use crate::error::{Error, Result};
use crate::explain::{explain_suite, ExplainConfig, ExplanationRecord};
use crate::models::TrainedModel;
use crate::seed;

pub use crate::metrics::{auc, r2};

pub const DEFAULT_TOP_N: usize = 5;
pub const POOLED_MODEL_ID: &str = "pooled";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelScope {
    PerModel,
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitEntry {
    pub position: usize,
    /// 1-based feature index.
    pub feature: usize,
    pub score: f64,
    pub hit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitReport {
    pub function: ConsensusFunction,
    pub model_scope: ModelScope,
    pub top_n: usize,
    pub entries: Vec<HitEntry>,
    pub expected_recall: f64,
    /// Worst expected score minus best non-expected score, oriented so that
    /// positive means clean separation. `None` when either side is empty.
    pub separation_margin: Option<f64>,
}

/// Score the first `n` ranked features against the expected set (1-based).
pub fn topn_hits(result: &ConsensusResult, expected: &BTreeSet<usize>, n: usize) -> Result<HitReport> {
    let d = result.scores.len();
    if n == 0 || n > d {
        return Err(Error::InvalidParams(format!("top_n must be in 1..={d}, got {n}")));
    }
    if expected.is_empty() {
        return Err(Error::InvalidInput("expected feature set is empty".into()));
    }
    if let Some(&bad) = expected.iter().find(|&&f| f == 0 || f > d) {
        return Err(Error::InvalidInput(format!("expected feature F{bad} outside F1..F{d}")));
    }
    let entries: Vec<HitEntry> = result.ranking[..n]
        .iter()
        .enumerate()
        .map(|(i, &f)| HitEntry {
            position: i + 1,
            feature: f,
            score: result.scores[f - 1],
            hit: expected.contains(&f),
        })
        .collect();
    let found = entries.iter().filter(|e| e.hit).count();

    // Orient scores so larger is always better before taking the gap.
    let sign = if result.ascending { -1.0 } else { 1.0 };
    let (mut worst_expected, mut best_noise) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &s) in result.scores.iter().enumerate() {
        let s = sign * s;
        if expected.contains(&(i + 1)) {
            worst_expected = worst_expected.min(s);
        } else {
            best_noise = best_noise.max(s);
        }
    }
    let separation_margin = best_noise.is_finite().then_some(worst_expected - best_noise);

    Ok(HitReport {
        function: result.function,
        model_scope: ModelScope::PerModel,
        top_n: n,
        entries,
        expected_recall: found as f64 / expected.len() as f64,
        separation_margin,
    })
}

/// One dataset with its splits and the models trained on it.
#[derive(Clone, Debug)]
pub struct DatasetCase {
    pub name: String,
    pub spec: DatasetSpec,
    pub train: Dataset,
    pub test: Dataset,
    pub models: Vec<TrainedModel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub top_n: usize,
    /// Votes per record for the voting function.
    pub n_top: usize,
    /// Also fuse all models of a dataset together.
    pub pooled: bool,
    pub explain: ExplainConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            top_n: DEFAULT_TOP_N,
            n_top: DEFAULT_N_TOP,
            pooled: false,
            explain: ExplainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dataset: String,
    pub model: String,
    pub function: ConsensusFunction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<HitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Cell {
    /// Base file name `<dataset>_<model>_<function>`.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.dataset, self.model, self.function)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallSummary {
    pub function: ConsensusFunction,
    pub dataset: String,
    pub mean_recall: f64,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub function: ConsensusFunction,
    pub mean_separation_margin: f64,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub cells: Vec<Cell>,
    pub recall: Vec<RecallSummary>,
    pub margins: Vec<MarginSummary>,
}

impl EvaluationReport {
    pub fn from_cells(cells: Vec<Cell>) -> Self {
        let mut functions: Vec<ConsensusFunction> = cells.iter().map(|c| c.function).collect();
        functions.sort();
        functions.dedup();
        let mut datasets: Vec<&str> = Vec::new();
        for c in &cells {
            if !datasets.contains(&c.dataset.as_str()) {
                datasets.push(&c.dataset);
            }
        }
        let mut recall = Vec::new();
        let mut margins = Vec::new();
        for &f in &functions {
            for &ds in &datasets {
                let vals: Vec<f64> = cells
                    .iter()
                    .filter(|c| c.function == f && c.dataset == ds)
                    .filter_map(|c| c.report.as_ref().map(|r| r.expected_recall))
                    .collect();
                if !vals.is_empty() {
                    recall.push(RecallSummary {
                        function: f,
                        dataset: ds.to_string(),
                        mean_recall: vals.iter().sum::<f64>() / vals.len() as f64,
                        cells: vals.len(),
                    });
                }
            }
            let m: Vec<f64> = cells
                .iter()
                .filter(|c| c.function == f)
                .filter_map(|c| c.report.as_ref().and_then(|r| r.separation_margin))
                .collect();
            if !m.is_empty() {
                margins.push(MarginSummary {
                    function: f,
                    mean_separation_margin: m.iter().sum::<f64>() / m.len() as f64,
                    cells: m.len(),
                });
            }
        }
        EvaluationReport {
            cells,
            recall,
            margins,
        }
    }

    pub fn cell(&self, dataset: &str, model: &str, function: ConsensusFunction) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.model == model && c.function == function)
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

/// Attribution records of one (dataset, model) pair.
#[derive(Clone, Debug)]
pub struct ExplainedModel {
    pub dataset: String,
    pub model: String,
    pub records: std::result::Result<Vec<ExplanationRecord>, String>,
}

/// Everything a grid run produced, in canonical (dataset, model, function) order.
#[derive(Clone, Debug)]
pub struct MatrixOutput {
    pub report: EvaluationReport,
    pub explained: Vec<ExplainedModel>,
    pub consensus: Vec<(Cell, ConsensusResult)>,
}

/// Explain seed for one (dataset, model) pair.
pub fn cell_seed(base: u64, dataset: &str, model: &str) -> u64 {
    seed::derive_str(seed::derive_str(base, dataset), model)
}

fn fuse_cell(
    dataset: &str,
    model: &str,
    scope: ModelScope,
    function: ConsensusFunction,
    records: &std::result::Result<Vec<ExplanationRecord>, String>,
    expected: &BTreeSet<usize>,
    config: &EvalConfig,
) -> (Cell, Option<ConsensusResult>) {
    let outcome = records.as_ref().map_err(Clone::clone).and_then(|recs| {
        let result = run_consensus(function, recs, config.n_top).map_err(|e| e.to_string())?;
        let mut report = topn_hits(&result, expected, config.top_n).map_err(|e| e.to_string())?;
        report.model_scope = scope;
        Ok((result, report))
    });
    let (report, error, result) = match outcome {
        Ok((result, report)) => (Some(report), None, Some(result)),
        Err(e) => (None, Some(e), None),
    };
    (
        Cell {
            dataset: dataset.to_string(),
            model: model.to_string(),
            function,
            report,
            error,
        },
        result,
    )
}

/// Explain every (dataset, model) pair, fuse with every function, and score
/// each fused ranking against the dataset's expected features.
pub fn run_matrix(cases: &[DatasetCase], functions: &[ConsensusFunction], config: &EvalConfig) -> MatrixOutput {
    let jobs: Vec<(&DatasetCase, &TrainedModel)> = cases
        .iter()
        .flat_map(|c| c.models.iter().map(move |m| (c, m)))
        .collect();
    let explained: Vec<ExplainedModel> = jobs
        .par_iter()
        .map(|(case, model)| {
            let cfg = ExplainConfig {
                seed: cell_seed(config.explain.seed, &case.name, &model.model_id),
                ..config.explain.clone()
            };
            ExplainedModel {
                dataset: case.name.clone(),
                model: model.model_id.clone(),
                records: explain_suite(model, &case.train, &case.test, &cfg).map_err(|e| e.to_string()),
            }
        })
        .collect();

    let mut cells = Vec::new();
    let mut consensus = Vec::new();
    let mut push = |(cell, result): (Cell, Option<ConsensusResult>)| {
        if let Some(r) = result {
            consensus.push((cell.clone(), r));
        }
        cells.push(cell);
    };
    for case in cases {
        let mine: Vec<&ExplainedModel> = explained.iter().filter(|e| e.dataset == case.name).collect();
        for e in &mine {
            for &f in functions {
                push(fuse_cell(
                    &case.name,
                    &e.model,
                    ModelScope::PerModel,
                    f,
                    &e.records,
                    &case.spec.expected_features,
                    config,
                ));
            }
        }
        if config.pooled && !mine.is_empty() {
            let pooled: std::result::Result<Vec<ExplanationRecord>, String> = mine
                .iter()
                .map(|e| e.records.clone().map_err(|err| format!("{}: {err}", e.model)))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(|v| v.into_iter().flatten().collect());
            for &f in functions {
                push(fuse_cell(
                    &case.name,
                    POOLED_MODEL_ID,
                    ModelScope::Pooled,
                    f,
                    &pooled,
                    &case.spec.expected_features,
                    config,
                ));
            }
        }
    }
    MatrixOutput {
        report: EvaluationReport::from_cells(cells),
        explained,
        consensus,
    }
}

pub fn write_hits_csv(report: &HitReport, path: &Path) -> Result<()> {
    let mut out = String::from("position,feature,score,hit\n");
    for e in &report.entries {
        let _ = writeln!(out, "{},F{},{},{}", e.position, e.feature, e.score, e.hit);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_hits_csv(path: &Path) -> Result<Vec<HitEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, reason: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some("position,feature,score,hit") {
        return Err(bad(1, "header must be position,feature,score,hit".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(k, line)| {
            let n = k + 2;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad(n, format!("expected 4 columns, got {}", cols.len())));
            }
            Ok(HitEntry {
                position: cols[0].parse().map_err(|_| bad(n, "bad position".into()))?,
                feature: cols[1]
                    .strip_prefix('F')
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(n, format!("bad feature `{}`", cols[1])))?,
                score: cols[2].parse().map_err(|_| bad(n, "bad score".into()))?,
                hit: cols[3].parse().map_err(|_| bad(n, "bad hit flag".into()))?,
            })
        })
        .collect()
}

const HIT_FILL: &str = "#2e9e44";
const MISS_FILL: &str = "#d64545";

/// Horizontal bar chart: one bar per position, length proportional to score.
pub fn render_svg(title: &str, report: &HitReport) -> String {
    let (width, label_w, pad, row_h) = (640.0, 90.0, 20.0, 28.0);
    let top = 40.0;
    let height = top + row_h * report.entries.len() as f64 + pad;
    let bar_area = width - label_w - 2.0 * pad - 60.0;
    let max_abs = report
        .entries
        .iter()
        .map(|e| e.score.abs())
        .fold(0.0, f64::max);
    let scale = if max_abs > 0.0 { max_abs } else { 1.0 };
    let has_neg = report.entries.iter().any(|e| e.score < 0.0);
    let (zero_x, span) = if has_neg {
        (label_w + pad + bar_area / 2.0, bar_area / 2.0)
    } else {
        (label_w + pad, bar_area)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{pad}" y="24" font-size="14">{}</text>"#, escape(title));
    for (i, e) in report.entries.iter().enumerate() {
        let y = top + row_h * i as f64;
        let len = e.score.abs() / scale * span;
        let x = if e.score < 0.0 { zero_x - len } else { zero_x };
        let fill = if e.hit { HIT_FILL } else { MISS_FILL };
        let _ = writeln!(
            s,
            r#"<text x="{pad}" y="{:.1}">{}. F{}</text>"#,
            y + row_h * 0.6,
            e.position,
            e.feature
        );
        let _ = writeln!(
            s,
            r#"<rect class="{}" x="{x:.2}" y="{:.1}" width="{len:.2}" height="{:.1}" fill="{fill}"/>"#,
            if e.hit { "hit" } else { "miss" },
            y + 4.0,
            row_h - 8.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.1}">{:.4}</text>"#,
            zero_x.max(x + len) + 6.0,
            y + row_h * 0.6,
            e.score
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{zero_x:.2}" y1="{top}" x2="{zero_x:.2}" y2="{:.1}" stroke="black"/>"#,
        height - pad
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write a CSV and an SVG per scored cell; returns the written paths in order.
pub fn emit_charts(report: &EvaluationReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for cell in &report.cells {
        let Some(hits) = &cell.report else { continue };
        let stem = cell.stem();
        let csv = out_dir.join(format!("{stem}.csv"));
        write_hits_csv(hits, &csv)?;
        let svg = out_dir.join(format!("{stem}.svg"));
        let title = format!("{} / {} / {} (recall {:.2})", cell.dataset, cell.model, cell.function, hits.expected_recall);
        fs::write(&svg, render_svg(&title, hits)).map_err(|e| Error::io(&svg, e))?;
        written.push(csv);
        written.push(svg);
    }
    Ok(written)
}
