//! Synthetic datasets whose targets follow a known closed-form rule.
//!
//! Features are named `F1..Fn` and indexed from 1 wherever a feature is
//! referred to by identity (rules, expected sets, rankings). Column vectors
//! are plain 0-based slices, so `row[i - 1]` is feature `Fi`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::ops;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Smallest magnitude a rule denominator may take.
pub const DENOMINATOR_FLOOR: f64 = 1e-9;

/// Number of regenerations attempted when a classification draw is single-class.
pub const CLASS_RETRY_BUDGET: usize = 20;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

pub const BUILTIN_NAMES: [&str; 4] = ["DS1", "DS2", "DS3", "DS4"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Classification => f.write_str("classification"),
            Task::Regression => f.write_str("regression"),
        }
    }
}

/// Expression tree over 1-based feature references.
///
/// A classification rule is a [`RuleExpr::LessThan`] at the root: it yields
/// class 0 when `lhs < rhs` and class 1 otherwise (ties go to class 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RuleExpr {
    Feature { index: usize },
    Const { value: f64 },
    Add { lhs: Box<RuleExpr>, rhs: Box<RuleExpr> },
    Sub { lhs: Box<RuleExpr>, rhs: Box<RuleExpr> },
    Mul { lhs: Box<RuleExpr>, rhs: Box<RuleExpr> },
    Div { lhs: Box<RuleExpr>, rhs: Box<RuleExpr> },
    Pow { base: Box<RuleExpr>, exponent: i32 },
    Sin { arg: Box<RuleExpr> },
    Cos { arg: Box<RuleExpr> },
    Tanh { arg: Box<RuleExpr> },
    LessThan { lhs: Box<RuleExpr>, rhs: Box<RuleExpr> },
}

impl RuleExpr {
    pub fn feature(index: usize) -> Self {
        RuleExpr::Feature { index }
    }

    pub fn constant(value: f64) -> Self {
        RuleExpr::Const { value }
    }

    pub fn pow(self, exponent: i32) -> Self {
        RuleExpr::Pow {
            base: Box::new(self),
            exponent,
        }
    }

    pub fn sin(self) -> Self {
        RuleExpr::Sin { arg: Box::new(self) }
    }

    pub fn cos(self) -> Self {
        RuleExpr::Cos { arg: Box::new(self) }
    }

    pub fn tanh(self) -> Self {
        RuleExpr::Tanh { arg: Box::new(self) }
    }

    /// `if self < rhs then 0 else 1`.
    pub fn less_than(self, rhs: RuleExpr) -> Self {
        RuleExpr::LessThan {
            lhs: Box::new(self),
            rhs: Box::new(rhs),
        }
    }

    /// Evaluate on a row without bounds checks beyond slice indexing.
    pub fn eval(&self, row: &[f64]) -> f64 {
        match self {
            RuleExpr::Feature { index } => row[index - 1],
            RuleExpr::Const { value } => *value,
            RuleExpr::Add { lhs, rhs } => lhs.eval(row) + rhs.eval(row),
            RuleExpr::Sub { lhs, rhs } => lhs.eval(row) - rhs.eval(row),
            RuleExpr::Mul { lhs, rhs } => lhs.eval(row) * rhs.eval(row),
            RuleExpr::Div { lhs, rhs } => {
                let d = rhs.eval(row);
                let d = if d.abs() < DENOMINATOR_FLOOR {
                    DENOMINATOR_FLOOR.copysign(if d == 0.0 { 1.0 } else { d })
                } else {
                    d
                };
                lhs.eval(row) / d
            }
            RuleExpr::Pow { base, exponent } => base.eval(row).powi(*exponent),
            RuleExpr::Sin { arg } => arg.eval(row).sin(),
            RuleExpr::Cos { arg } => arg.eval(row).cos(),
            RuleExpr::Tanh { arg } => arg.eval(row).tanh(),
            RuleExpr::LessThan { lhs, rhs } => {
                if lhs.eval(row) < rhs.eval(row) {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// 1-based indices of every feature the expression reads.
    pub fn referenced_features(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_features(&mut out);
        out
    }

    fn collect_features(&self, out: &mut BTreeSet<usize>) {
        match self {
            RuleExpr::Feature { index } => {
                out.insert(*index);
            }
            RuleExpr::Const { .. } => {}
            RuleExpr::Add { lhs, rhs }
            | RuleExpr::Sub { lhs, rhs }
            | RuleExpr::Mul { lhs, rhs }
            | RuleExpr::Div { lhs, rhs }
            | RuleExpr::LessThan { lhs, rhs } => {
                lhs.collect_features(out);
                rhs.collect_features(out);
            }
            RuleExpr::Pow { base: arg, .. }
            | RuleExpr::Sin { arg }
            | RuleExpr::Cos { arg }
            | RuleExpr::Tanh { arg } => arg.collect_features(out),
        }
    }

    fn contains_threshold(&self) -> bool {
        match self {
            RuleExpr::LessThan { .. } => true,
            RuleExpr::Feature { .. } | RuleExpr::Const { .. } => false,
            RuleExpr::Add { lhs, rhs }
            | RuleExpr::Sub { lhs, rhs }
            | RuleExpr::Mul { lhs, rhs }
            | RuleExpr::Div { lhs, rhs } => lhs.contains_threshold() || rhs.contains_threshold(),
            RuleExpr::Pow { base: arg, .. }
            | RuleExpr::Sin { arg }
            | RuleExpr::Cos { arg }
            | RuleExpr::Tanh { arg } => arg.contains_threshold(),
        }
    }

    fn is_leaf(&self) -> bool {
        matches!(self, RuleExpr::Feature { .. } | RuleExpr::Const { .. })
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for RuleExpr {
            type Output = RuleExpr;
            fn $method(self, rhs: RuleExpr) -> RuleExpr {
                RuleExpr::$variant {
                    lhs: Box::new(self),
                    rhs: Box::new(rhs),
                }
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

struct Operand<'a>(&'a RuleExpr);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_leaf() || matches!(
            self.0,
            RuleExpr::Pow { .. } | RuleExpr::Sin { .. } | RuleExpr::Cos { .. } | RuleExpr::Tanh { .. }
        ) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "({})", self.0)
        }
    }
}

impl fmt::Display for RuleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleExpr::Feature { index } => write!(f, "F{index}"),
            RuleExpr::Const { value } => write!(f, "{value}"),
            RuleExpr::Add { lhs, rhs } => write!(f, "{} + {}", Operand(lhs), Operand(rhs)),
            RuleExpr::Sub { lhs, rhs } => write!(f, "{} - {}", Operand(lhs), Operand(rhs)),
            RuleExpr::Mul { lhs, rhs } => write!(f, "{} * {}", Operand(lhs), Operand(rhs)),
            RuleExpr::Div { lhs, rhs } => write!(f, "{} / {}", Operand(lhs), Operand(rhs)),
            RuleExpr::Pow { base, exponent } => write!(f, "{}^{exponent}", Operand(base)),
            RuleExpr::Sin { arg } => write!(f, "sin({arg})"),
            RuleExpr::Cos { arg } => write!(f, "cos({arg})"),
            RuleExpr::Tanh { arg } => write!(f, "tanh({arg})"),
            RuleExpr::LessThan { lhs, rhs } => write!(f, "if({lhs} < {rhs}) then 0 else 1"),
        }
    }
}

/// Description of a synthetic dataset: its size, its rule, and the features
/// an explainer is expected to recover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub task: Task,
    pub n_samples: usize,
    pub n_features: usize,
    pub rule: RuleExpr,
    /// 1-based feature indices.
    pub expected_features: BTreeSet<usize>,
}

impl DatasetSpec {
    /// Build a spec whose expected set is exactly the features the rule reads.
    pub fn new(
        name: impl Into<String>,
        task: Task,
        n_samples: usize,
        n_features: usize,
        rule: RuleExpr,
    ) -> Result<Self> {
        let expected_features = rule.referenced_features();
        let spec = DatasetSpec {
            name: name.into(),
            task,
            n_samples,
            n_features,
            rule,
            expected_features,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidSpec {
                name: self.name.clone(),
                reason,
            })
        };
        if self.name.is_empty() {
            return fail("name must not be empty".into());
        }
        if self.n_samples < 2 {
            return fail(format!("n_samples must be at least 2, got {}", self.n_samples));
        }
        if self.n_features < 1 {
            return fail("n_features must be at least 1".into());
        }
        let referenced = self.rule.referenced_features();
        if let Some(&bad) = referenced.iter().find(|&&i| i == 0 || i > self.n_features) {
            return fail(format!("rule references F{bad} outside F1..F{}", self.n_features));
        }
        if referenced != self.expected_features {
            return fail(format!(
                "expected_features {:?} differ from rule features {:?}",
                self.expected_features, referenced
            ));
        }
        match (self.task, &self.rule) {
            (Task::Classification, RuleExpr::LessThan { lhs, rhs }) => {
                if lhs.contains_threshold() || rhs.contains_threshold() {
                    return fail("thresholds may only appear at the root".into());
                }
            }
            (Task::Classification, _) => {
                return fail("classification rule must be a threshold comparison".into());
            }
            (Task::Regression, rule) => {
                if rule.contains_threshold() {
                    return fail("regression rule must not contain a threshold".into());
                }
            }
        }
        Ok(())
    }

    /// Copy of the spec with a different sample count.
    pub fn with_samples(&self, n_samples: usize) -> Self {
        DatasetSpec {
            n_samples,
            ..self.clone()
        }
    }
}

/// The four reference datasets.
pub fn builtin_spec(name: &str) -> Result<DatasetSpec> {
    let f = RuleExpr::feature;
    let (task, n_samples, n_features, rule) = match name {
        "DS1" => (
            Task::Classification,
            2000,
            20,
            (f(2) * f(3) / f(9)).less_than(f(17)),
        ),
        "DS2" => (
            Task::Classification,
            1500,
            75,
            (f(55).pow(3) + f(5).pow(2) - f(25)).less_than(RuleExpr::constant(0.0)),
        ),
        "DS3" => (
            Task::Regression,
            2500,
            60,
            f(60).sin() + f(58).cos() + f(56).tanh() + f(1),
        ),
        "DS4" => (
            Task::Regression,
            2000,
            30,
            f(19).pow(4) - f(21).pow(3) + f(24).pow(2) - f(26),
        ),
        other => return Err(Error::UnknownDataset(other.to_string())),
    };
    DatasetSpec::new(name, task, n_samples, n_features, rule)
}

/// Evaluate the spec's rule on one row.
pub fn eval_rule(spec: &DatasetSpec, row: &[f64]) -> Result<f64> {
    if row.len() != spec.n_features {
        return Err(Error::WidthMismatch {
            expected: spec.n_features,
            got: row.len(),
        });
    }
    if let Some(i) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { feature: i + 1 });
    }
    let value = spec.rule.eval(row);
    if !value.is_finite() {
        return Err(Error::InvalidSpec {
            name: spec.name.clone(),
            reason: format!("rule `{}` produced a non-finite value", spec.rule),
        });
    }
    Ok(value)
}

/// A realized sample table.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub seed: u64,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.spec.n_features
    }

    pub fn task(&self) -> Task {
        self.spec.task
    }

    /// Fraction of class-1 targets (classification) or `None`.
    pub fn class1_fraction(&self) -> Option<f64> {
        (self.task() == Task::Classification).then(|| {
            self.targets.iter().filter(|&&t| t == 1.0).count() as f64 / self.targets.len() as f64
        })
    }

    /// Dataset restricted to the given row indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            spec: self.spec.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            seed: self.seed,
        }
    }

    /// Attach a spec to a raw table, checking targets against the rule.
    pub fn from_table(spec: DatasetSpec, table: DataTable, seed: u64) -> Result<Dataset> {
        spec.validate()?;
        if table.n_features != spec.n_features {
            return Err(Error::WidthMismatch {
                expected: spec.n_features,
                got: table.n_features,
            });
        }
        for (i, (row, &t)) in table.rows.iter().zip(&table.targets).enumerate() {
            let want = eval_rule(&spec, row)?;
            if want != t {
                return Err(Error::InvalidInput(format!(
                    "row {} target {t} disagrees with rule value {want}",
                    i + 1
                )));
            }
        }
        Ok(Dataset {
            spec,
            rows: table.rows,
            targets: table.targets,
            seed,
        })
    }

    pub fn to_table(&self) -> DataTable {
        DataTable {
            n_features: self.n_features(),
            rows: self.rows.clone(),
            targets: self.targets.clone(),
        }
    }
}

fn draw(spec: &DatasetSpec, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rng = seed::rng(seed);
    let mut rows = Vec::with_capacity(spec.n_samples);
    let mut targets = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let row: Vec<f64> = (0..spec.n_features).map(|_| rng.gen::<f64>()).collect();
        targets.push(eval_rule(spec, &row)?);
        rows.push(row);
    }
    Ok((rows, targets))
}

/// Sample `n_samples` uniform rows on `[0, 1)` and label them with the rule.
pub fn generate(spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    for attempt in 0..=CLASS_RETRY_BUDGET {
        let draw_seed = if attempt == 0 {
            seed
        } else {
            seed::derive(seed, attempt as u64)
        };
        let (rows, targets) = draw(spec, draw_seed)?;
        if spec.task == Task::Classification {
            let ones = targets.iter().filter(|&&t| t == 1.0).count();
            if ones == 0 || ones == targets.len() {
                continue;
            }
        }
        return Ok(Dataset {
            spec: spec.clone(),
            rows,
            targets,
            seed,
        });
    }
    Err(Error::ClassBalance {
        rule: spec.rule.to_string(),
        attempts: CLASS_RETRY_BUDGET + 1,
    })
}

/// Split into train/test. Classification splits are stratified with a
/// largest-remainder allocation so the train size is exactly
/// `round(fraction * n)` and each class stays within one sample of its share.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.n_samples();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidSplit(format!(
            "fraction {train_fraction} of {n} samples leaves an empty split"
        )));
    }
    let mut rng = seed::rng(seed);

    let groups: Vec<Vec<usize>> = match dataset.task() {
        Task::Regression => vec![(0..n).collect()],
        Task::Classification => [0.0, 1.0]
            .iter()
            .map(|&c| (0..n).filter(|&i| dataset.targets[i] == c).collect())
            .collect(),
    };

    // Largest-remainder apportionment of n_train over the groups.
    let quotas: Vec<f64> = groups
        .iter()
        .map(|g| g.len() as f64 * n_train as f64 / n as f64)
        .collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = n_train - alloc.iter().sum::<usize>();
    for &g in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if alloc[g] < groups[g].len() {
            alloc[g] += 1;
            remaining -= 1;
        }
    }

    let mut train_idx = Vec::with_capacity(n_train);
    let mut test_idx = Vec::with_capacity(n - n_train);
    for (g, members) in groups.into_iter().enumerate() {
        let mut members = members;
        members.shuffle(&mut rng);
        let (left, right) = members.split_at(alloc[g]);
        if dataset.task() == Task::Classification && (left.is_empty() || right.is_empty()) {
            return Err(Error::InvalidSplit(format!(
                "class {g} cannot be represented in both splits"
            )));
        }
        train_idx.extend_from_slice(left);
        test_idx.extend_from_slice(right);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((dataset.subset(&train_idx), dataset.subset(&test_idx)))
}

/// Rows and targets without an attached rule, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct DataTable {
    pub n_features: usize,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

fn format_target(task: Task, t: f64) -> String {
    match task {
        Task::Classification => format!("{}", t as i64),
        Task::Regression => format!("{t}"),
    }
}

/// Write `F1,...,Fn,y` CSV. `f64` display is the shortest round-trip form.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        let header: Vec<String> = (1..=dataset.n_features()).map(|i| format!("F{i}")).collect();
        writeln!(w, "{},y", header.join(","))?;
        let mut line = String::new();
        for (row, &t) in dataset.rows.iter().zip(&dataset.targets) {
            line.clear();
            for v in row {
                line.push_str(&format!("{v},"));
            }
            line.push_str(&format_target(dataset.task(), t));
            writeln!(w, "{line}")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Parse a dataset CSV into a raw table.
pub fn read_table(path: &Path) -> Result<DataTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, path)
}

pub(crate) fn parse_table(text: &str, path: &Path) -> Result<DataTable> {
    let csv_err = |line: usize, reason: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| csv_err(1, "missing header".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols.last() != Some(&"y") {
        return Err(csv_err(1, "header must be F1,...,Fn,y".into()));
    }
    let n_features = cols.len() - 1;
    for (i, c) in cols[..n_features].iter().enumerate() {
        if *c != format!("F{}", i + 1) {
            return Err(csv_err(1, format!("column {} is `{c}`, expected `F{}`", i + 1, i + 1)));
        }
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_features + 1 {
            return Err(csv_err(
                lineno,
                format!("row has {} values, header has {}", cells.len(), n_features + 1),
            ));
        }
        let mut values = Vec::with_capacity(cells.len());
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| csv_err(lineno, format!("column {}: `{cell}` is not numeric", j + 1)))?;
            if !v.is_finite() {
                return Err(csv_err(lineno, format!("column {}: value is not finite", j + 1)));
            }
            values.push(v);
        }
        targets.push(values.pop().unwrap());
        rows.push(values);
    }
    Ok(DataTable {
        n_features,
        rows,
        targets,
    })
}

/// Read a dataset CSV and reattach its spec, verifying every target.
pub fn read_dataset(path: &Path, spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    Dataset::from_table(spec.clone(), read_table(path)?, seed)
}
