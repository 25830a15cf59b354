//! Task-relationship statistics: directed relative-performance matrices,
//! their symmetrised affinities, Pearson correlation with two-sided p-values
//! and aggregate comparisons against single-task training.
//!
//! Relative performance is `100 * (reference - observed) / reference` on
//! losses, so a positive percentage means the co-trained model has the
//! lower loss.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::model::{PerformanceTable, TaskSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("reference loss must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("diagonal entry for task {0:?} is not allowed")]
    DiagonalEntry(String),
    #[error("value for {0:?}/{1:?} must be finite")]
    NonFinite(String, String),
    #[error("duplicate entry for {0:?}/{1:?}")]
    DuplicateEntry(String, String),
    #[error("missing entry: trained with {0:?}, performance on {1:?}")]
    MissingDirectedEntry(String, String),
    #[error("missing affinity for {0:?}-{1:?}")]
    MissingAffinity(String, String),
    #[error("samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("a sample has zero variance")]
    ZeroVariance,
    #[error("matrices are over different task sets: {0} vs {1}")]
    TaskSetMismatch(String, String),
    #[error("directed correlation needs two directed matrices")]
    NotDirected,
}

/// Directed matrix of relative-performance percentages: entry
/// `(trained_with, performance_on)` is the change on `performance_on` when
/// co-trained with `trained_with`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRelationMatrix {
    task_set: TaskSet,
    values: BTreeMap<(usize, usize), f64>,
    label: String,
}

impl PairwiseRelationMatrix {
    pub fn new(task_set: TaskSet, label: impl Into<String>) -> Self {
        PairwiseRelationMatrix {
            task_set,
            values: BTreeMap::new(),
            label: label.into(),
        }
    }

    pub fn task_set(&self) -> &TaskSet {
        &self.task_set
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn index(&self, task: &str) -> Result<usize, AnalysisError> {
        self.task_set
            .index_of(task)
            .ok_or_else(|| AnalysisError::UnknownTask(task.to_string()))
    }

    pub fn insert(&mut self, trained_with: &str, performance_on: &str, value: f64) -> Result<(), AnalysisError> {
        let i = self.index(trained_with)?;
        let j = self.index(performance_on)?;
        if i == j {
            return Err(AnalysisError::DiagonalEntry(trained_with.to_string()));
        }
        if !value.is_finite() {
            return Err(AnalysisError::NonFinite(trained_with.into(), performance_on.into()));
        }
        if self.values.insert((i, j), value).is_some() {
            return Err(AnalysisError::DuplicateEntry(trained_with.into(), performance_on.into()));
        }
        Ok(())
    }

    pub fn get(&self, trained_with: &str, performance_on: &str) -> Option<f64> {
        let i = self.task_set.index_of(trained_with)?;
        let j = self.task_set.index_of(performance_on)?;
        self.values.get(&(i, j)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        let k = self.task_set.len();
        self.values.len() == k * (k - 1)
    }

    /// `(trained_with, performance_on, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.values.iter().map(|(&(i, j), &v)| {
            (
                self.task_set.get(i).expect("in range"),
                self.task_set.get(j).expect("in range"),
                v,
            )
        })
    }

    pub fn transpose(&self) -> Self {
        PairwiseRelationMatrix {
            task_set: self.task_set.clone(),
            values: self.values.iter().map(|(&(i, j), &v)| ((j, i), v)).collect(),
            label: format!("{}^T", self.label),
        }
    }

    fn value_at(&self, i: usize, j: usize) -> Result<f64, AnalysisError> {
        self.values.get(&(i, j)).copied().ok_or_else(|| {
            AnalysisError::MissingDirectedEntry(
                self.task_set.get(i).unwrap_or_default().into(),
                self.task_set.get(j).unwrap_or_default().into(),
            )
        })
    }

    /// All off-diagonal values, row-major. Fails on a missing entry.
    pub fn directed_values(&self) -> Result<Vec<f64>, AnalysisError> {
        let k = self.task_set.len();
        let mut out = Vec::with_capacity(k * (k - 1));
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                out.push(self.value_at(i, j)?);
            }
        }
        Ok(out)
    }
}

/// Symmetric pairwise scores keyed by unordered task pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    task_set: TaskSet,
    values: BTreeMap<(usize, usize), f64>,
    label: String,
}

impl AffinityMatrix {
    pub fn new(task_set: TaskSet, label: impl Into<String>) -> Self {
        AffinityMatrix {
            task_set,
            values: BTreeMap::new(),
            label: label.into(),
        }
    }

    pub fn task_set(&self) -> &TaskSet {
        &self.task_set
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn key(&self, a: &str, b: &str) -> Result<(usize, usize), AnalysisError> {
        let i = self
            .task_set
            .index_of(a)
            .ok_or_else(|| AnalysisError::UnknownTask(a.to_string()))?;
        let j = self
            .task_set
            .index_of(b)
            .ok_or_else(|| AnalysisError::UnknownTask(b.to_string()))?;
        if i == j {
            return Err(AnalysisError::DiagonalEntry(a.to_string()));
        }
        Ok((i.min(j), i.max(j)))
    }

    pub fn insert(&mut self, a: &str, b: &str, value: f64) -> Result<(), AnalysisError> {
        let key = self.key(a, b)?;
        if !value.is_finite() {
            return Err(AnalysisError::NonFinite(a.into(), b.into()));
        }
        if self.values.insert(key, value).is_some() {
            return Err(AnalysisError::DuplicateEntry(a.into(), b.into()));
        }
        Ok(())
    }

    /// Order-insensitive lookup.
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.key(a, b).ok().and_then(|k| self.values.get(&k).copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(task_a, task_b, value)` with `task_a` before `task_b` in set order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.values.iter().map(|(&(i, j), &v)| {
            (
                self.task_set.get(i).expect("in range"),
                self.task_set.get(j).expect("in range"),
                v,
            )
        })
    }

    /// Values for every unordered pair, in set order. Fails on a gap.
    pub fn pair_values(&self) -> Result<Vec<f64>, AnalysisError> {
        let k = self.task_set.len();
        let mut out = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in i + 1..k {
                out.push(self.values.get(&(i, j)).copied().ok_or_else(|| {
                    AnalysisError::MissingAffinity(
                        self.task_set.get(i).unwrap_or_default().into(),
                        self.task_set.get(j).unwrap_or_default().into(),
                    )
                })?);
            }
        }
        Ok(out)
    }
}

/// `100 * (reference - observed) / reference`.
pub fn relative_performance(observed: f64, reference: f64) -> Result<f64, AnalysisError> {
    if !(reference > 0.0) {
        return Err(AnalysisError::NonPositiveReference(reference));
    }
    Ok(100.0 * (reference - observed) / reference)
}

/// Relative performance of a multi-task solution's total loss against a
/// reference total (e.g. independently trained single-task networks).
pub fn relative_total_performance(mtl_total: f64, reference_total: f64) -> Result<f64, AnalysisError> {
    relative_performance(mtl_total, reference_total)
}

/// Average each directed entry with its transpose.
pub fn symmetrize(m: &PairwiseRelationMatrix) -> Result<AffinityMatrix, AnalysisError> {
    let k = m.task_set.len();
    let mut out = AffinityMatrix::new(m.task_set.clone(), format!("{} (symmetrized)", m.label));
    for i in 0..k {
        for j in i + 1..k {
            let v = (m.value_at(i, j)? + m.value_at(j, i)?) / 2.0;
            out.values.insert((i, j), v);
        }
    }
    Ok(out)
}

/// Sample correlation and its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

/// Pearson's r, with the p-value of `t = r sqrt(n-2) / sqrt(1-r^2)` under a
/// Student t distribution with `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation {
        r,
        p: correlation_p_value(r, n),
        n,
    })
}

/// Two-sided p-value for a sample correlation `r` over `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let one_minus = 1.0 - r * r;
    if one_minus <= 0.0 {
        return 0.0;
    }
    let t2 = r * r * df / one_minus;
    student_t_two_sided(t2, df)
}

/// `P(|T| >= sqrt(t2))` for `T ~ t(df)`, via the regularized incomplete beta
/// function: `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided(t2: f64, df: f64) -> f64 {
    beta_reg(df / 2.0, 0.5, df / (df + t2)).clamp(0.0, 1.0)
}

/// Which values of a relation matrix enter a correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// All `k(k-1)` off-diagonal directed entries.
    Directed,
    /// The `k(k-1)/2` symmetrised pair affinities.
    Symmetric,
}

impl CorrelationMode {
    pub fn alternate(self) -> Self {
        match self {
            CorrelationMode::Directed => CorrelationMode::Symmetric,
            CorrelationMode::Symmetric => CorrelationMode::Directed,
        }
    }
}

/// A directed matrix or an affinity table.
#[derive(Debug, Clone, PartialEq)]
pub enum Relation {
    Directed(PairwiseRelationMatrix),
    Affinity(AffinityMatrix),
}

impl Relation {
    pub fn task_set(&self) -> &TaskSet {
        match self {
            Relation::Directed(m) => m.task_set(),
            Relation::Affinity(a) => a.task_set(),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Relation::Directed(m) => m.label(),
            Relation::Affinity(a) => a.label(),
        }
    }

    /// Sample vector for `mode`; directed matrices are symmetrised for the
    /// symmetric mode.
    pub fn sample(&self, mode: CorrelationMode) -> Result<Vec<f64>, AnalysisError> {
        match (self, mode) {
            (Relation::Directed(m), CorrelationMode::Directed) => m.directed_values(),
            (Relation::Directed(m), CorrelationMode::Symmetric) => symmetrize(m)?.pair_values(),
            (Relation::Affinity(a), CorrelationMode::Symmetric) => a.pair_values(),
            (Relation::Affinity(_), CorrelationMode::Directed) => Err(AnalysisError::NotDirected),
        }
    }
}

/// Correlate two relation matrices over the same task set.
pub fn correlate(a: &Relation, b: &Relation, mode: CorrelationMode) -> Result<Correlation, AnalysisError> {
    if a.task_set() != b.task_set() {
        return Err(AnalysisError::TaskSetMismatch(
            a.task_set().to_string(),
            b.task_set().to_string(),
        ));
    }
    pearson(&a.sample(mode)?, &b.sample(mode)?)
}

/// Margins of a directed matrix for one task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowEffect {
    pub task: String,
    /// Mean effect this task has on the others (its row).
    pub as_helper: f64,
    /// Mean effect the others have on this task (its column).
    pub as_helped: f64,
}

pub fn row_effect_summary(m: &PairwiseRelationMatrix) -> Result<Vec<RowEffect>, AnalysisError> {
    let k = m.task_set.len();
    let denom = (k.max(2) - 1) as f64;
    (0..k)
        .map(|t| {
            let mut row = 0.0;
            let mut col = 0.0;
            for o in (0..k).filter(|&o| o != t) {
                row += m.value_at(t, o)?;
                col += m.value_at(o, t)?;
            }
            Ok(RowEffect {
                task: m.task_set.get(t).expect("in range").to_string(),
                as_helper: row / denom,
                as_helped: col / denom,
            })
        })
        .collect()
}

/// Mean of all off-diagonal entries (the corner cell of the margin tables).
pub fn overall_mean(m: &PairwiseRelationMatrix) -> Result<f64, AnalysisError> {
    let v = m.directed_values()?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Multi-task networks of one size compared with single-task training.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSizeRow {
    pub size: usize,
    pub networks: usize,
    /// Mean relative performance against one full-cost single-task network
    /// per task.
    pub vs_full_singles: Option<f64>,
    /// Mean relative performance against single-task networks costing
    /// `full / size` each, so the total matches.
    pub vs_split_singles: Option<f64>,
}

/// Per group size, average relative total loss of the full-cost networks
/// against single-task references. A reference column is `None` when some
/// network of that size lacks its single-task counterparts.
pub fn group_size_report(table: &PerformanceTable, full_cost_msnt: u64) -> Result<Vec<GroupSizeRow>, AnalysisError> {
    let k = table.task_set().len();
    let single = |task: usize, cost: u64| -> Option<f64> {
        (0..table.len())
            .filter(|&n| table.coverage(n) == 1 << task && table.cost(n) == cost)
            .filter_map(|n| table.loss(n, task))
            .min_by(|a, b| a.partial_cmp(b).expect("finite"))
    };
    let mut rows = Vec::new();
    for size in 1..=k {
        let nets: Vec<usize> = (0..table.len())
            .filter(|&n| table.coverage(n).count_ones() as usize == size && table.cost(n) == full_cost_msnt)
            .collect();
        if nets.is_empty() {
            continue;
        }
        let mut each = Some(Vec::new());
        let mut split = Some(Vec::new());
        let split_cost = full_cost_msnt.is_multiple_of(size as u64).then(|| full_cost_msnt / size as u64);
        for &n in &nets {
            let tasks: Vec<usize> = (0..k).filter(|&t| table.coverage(n) & (1 << t) != 0).collect();
            let mtl: f64 = tasks.iter().map(|&t| table.loss(n, t).expect("covered")).sum();
            let full_ref: Option<f64> = tasks.iter().map(|&t| single(t, full_cost_msnt)).sum();
            let split_ref: Option<f64> = split_cost.and_then(|c| tasks.iter().map(|&t| single(t, c)).sum());
            match (&mut each, full_ref) {
                (Some(v), Some(r)) => v.push(relative_total_performance(mtl, r)?),
                _ => each = None,
            }
            match (&mut split, split_ref) {
                (Some(v), Some(r)) => v.push(relative_total_performance(mtl, r)?),
                _ => split = None,
            }
        }
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        rows.push(GroupSizeRow {
            size,
            networks: nets.len(),
            vs_full_singles: each.map(mean),
            vs_split_singles: split.map(mean),
        });
    }
    Ok(rows)
}
