//! Redundancy accounting and agreement statistics between two labelings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::AggregationReport;
use crate::model::{LabelSet, TaskId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error(
        "labelings cover different tasks ({only_a} only in the first, {only_b} only in the second)"
    )]
    KeyMismatch { only_a: usize, only_b: usize },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
}

/// Contributions needed by ex-post majority voting to guarantee `p` agreeing answers on each
/// of `n_tasks` tasks with `n_labels` labels: `N * ((p - 1) * L + 1)`.
pub fn theoretical_redundancy(n_tasks: u64, n_labels: u64, p: u64) -> Result<u64, MetricsError> {
    if p < 1 {
        return Err(MetricsError::BadParameters(format!(
            "p must be at least 1, got {p}"
        )));
    }
    if n_labels < 2 {
        return Err(MetricsError::BadParameters(format!(
            "need at least 2 labels, got {n_labels}"
        )));
    }
    (p - 1)
        .checked_mul(n_labels)
        .and_then(|v| v.checked_add(1))
        .and_then(|v| v.checked_mul(n_tasks))
        .ok_or_else(|| MetricsError::BadParameters("redundancy overflows u64".into()))
}

/// `100 * (actual / theoretical - 1)`: negative values are savings.
pub fn redundancy_saving(actual: u64, theoretical: u64) -> Result<f64, MetricsError> {
    if theoretical == 0 {
        return Err(MetricsError::DivisionByZero);
    }
    Ok(100.0 * (actual as f64 / theoretical as f64 - 1.0))
}

/// Rounds to one decimal place, the precision used in reports.
pub fn one_decimal(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Agreement between two labelings of the same tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_tasks: usize,
    /// `100 * (1 - accuracy)`.
    pub percent_diff: f64,
    pub accuracy: f64,
    pub kappa: f64,
    pub adjusted_rand: f64,
    pub labels: Vec<String>,
    /// `confusion[a][b]`: tasks labeled `a` by the first labeling and `b` by the second.
    pub confusion: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_task_contribution_counts: BTreeMap<TaskId, u32>,
}

impl ComparisonReport {
    pub fn with_contribution_counts(mut self, counts: BTreeMap<TaskId, u32>) -> Self {
        self.per_task_contribution_counts = counts;
        self
    }
}

pub fn agreement_report(
    labels_a: &BTreeMap<TaskId, String>,
    labels_b: &BTreeMap<TaskId, String>,
    label_set: &LabelSet,
) -> Result<ComparisonReport, MetricsError> {
    let only_a = labels_a
        .keys()
        .filter(|k| !labels_b.contains_key(*k))
        .count();
    let only_b = labels_b
        .keys()
        .filter(|k| !labels_a.contains_key(*k))
        .count();
    if only_a + only_b > 0 {
        return Err(MetricsError::KeyMismatch { only_a, only_b });
    }
    let n_labels = label_set.len();
    let idx = |l: &String| {
        label_set
            .index_of(l)
            .ok_or_else(|| MetricsError::UnknownLabel(l.clone()))
    };
    let mut confusion = vec![vec![0u64; n_labels]; n_labels];
    for (task, a) in labels_a {
        confusion[idx(a)?][idx(&labels_b[task])?] += 1;
    }
    Ok(ComparisonReport {
        n_tasks: labels_a.len(),
        percent_diff: 100.0 * (1.0 - accuracy(&confusion)),
        accuracy: accuracy(&confusion),
        kappa: cohen_kappa(&confusion),
        adjusted_rand: adjusted_rand_index(&confusion),
        labels: label_set.labels().to_vec(),
        confusion,
        per_task_contribution_counts: BTreeMap::new(),
    })
}

fn total(confusion: &[Vec<u64>]) -> u64 {
    confusion.iter().flatten().sum()
}

/// Trace over total; 1 for an empty matrix.
pub fn accuracy(confusion: &[Vec<u64>]) -> f64 {
    let n = total(confusion);
    if n == 0 {
        return 1.0;
    }
    let diag: u64 = (0..confusion.len()).map(|i| confusion[i][i]).sum();
    diag as f64 / n as f64
}

/// Cohen's kappa with chance agreement from the two raters' marginals.
pub fn cohen_kappa(confusion: &[Vec<u64>]) -> f64 {
    let n = total(confusion) as f64;
    if n == 0.0 {
        return 1.0;
    }
    let k = confusion.len();
    let observed = accuracy(confusion);
    let chance: f64 = (0..k)
        .map(|i| {
            let row: u64 = confusion[i].iter().sum();
            let col: u64 = confusion.iter().map(|r| r[i]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    if chance >= 1.0 {
        // Both raters used one and the same label throughout.
        return 1.0;
    }
    (observed - chance) / (1.0 - chance)
}

fn pairs(n: u64) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index of the two partitions induced by a contingency table, corrected for
/// chance under the hypergeometric model.
pub fn adjusted_rand_index(contingency: &[Vec<u64>]) -> f64 {
    let n = total(contingency);
    if n < 2 {
        return 1.0;
    }
    let index: f64 = contingency.iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = contingency.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..contingency.first().map_or(0, Vec::len))
        .map(|j| pairs(contingency.iter().map(|r| r[j]).sum()))
        .sum();
    let expected = rows * cols / pairs(n);
    let max = (rows + cols) / 2.0;
    if max == expected {
        // Both partitions are the same trivial partition (one block, or all singletons).
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Spearman rank correlation (average ranks for ties). `None` if either side is constant or
/// the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Contribution count of a task, the empirical difficulty proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Difficulty {
    pub contributions: u32,
    /// False for tasks still open in a partial report; their count is a lower bound.
    pub solved: bool,
}

pub fn difficulty_proxy(report: &AggregationReport) -> BTreeMap<TaskId, Difficulty> {
    report
        .contribution_counts
        .iter()
        .map(|(id, &c)| {
            (
                id.clone(),
                Difficulty {
                    contributions: c,
                    solved: report.results.contains_key(id),
                },
            )
        })
        .collect()
}

pub fn difficulty_of(
    report: &AggregationReport,
    task: &TaskId,
) -> Result<Difficulty, MetricsError> {
    let contributions = *report
        .contribution_counts
        .get(task)
        .ok_or_else(|| MetricsError::UnknownTask(task.clone()))?;
    Ok(Difficulty {
        contributions,
        solved: report.results.contains_key(task),
    })
}
