//! On-disk formats: the JSON-lines contribution log, `results.json`, `comparison.json` and
//! `manifest.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::engine::AggregationReport;
use crate::metrics::ComparisonReport;
use crate::model::{Contribution, TaskId};
use crate::simulator::WorldParams;

pub const CONTRIBUTIONS_FILE: &str = "contributions.jsonl";
pub const RESULTS_FILE: &str = "results.json";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Writes one JSON object per contribution.
pub fn write_contributions<W: Write>(mut out: W, contributions: &[Contribution]) -> io::Result<()> {
    for c in contributions {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses a contribution log into `(line number, contribution)` pairs. Lines are numbered
/// from 1 and blank lines are skipped.
pub fn read_contributions<R: BufRead>(input: R) -> Result<Vec<(usize, Contribution)>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| FormatError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let c: Contribution = serde_json::from_str(&line).map_err(|e| FormatError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if c.is_control != c.true_label.is_some() {
            return Err(FormatError::Parse {
                line: line_no,
                message: "true_label must be present exactly when is_control is true".into(),
            });
        }
        out.push((line_no, c));
    }
    Ok(out)
}

pub fn write_contributions_file(
    path: &Path,
    contributions: &[Contribution],
) -> Result<(), FormatError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_contributions(BufWriter::new(file), contributions).map_err(io_err(path))
}

pub fn read_contributions_file(path: &Path) -> Result<Vec<(usize, Contribution)>, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_contributions(BufReader::new(file))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| FormatError::Json {
        path: path.to_owned(),
        source,
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| FormatError::Json {
        path: path.to_owned(),
        source,
    })
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: EngineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldParams>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn new(command: &str, config: &EngineConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            config: config.clone(),
            world: None,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: now(),
            finished_at: String::new(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_at = now();
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    /// Inferred label; absent for tasks left unsolved.
    pub label: Option<String>,
    pub contribution_count: u32,
    pub solved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tasks: usize,
    pub solved: usize,
    pub unsolved: Vec<TaskId>,
    pub rounds: u64,
    pub total_contributions: u64,
    pub control_contributions: u64,
    pub theoretical_redundancy: u64,
    /// Percent change against the theoretical redundancy; negative is a saving.
    pub redundancy_saving: f64,
}

/// Layout of `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub manifest: RunManifest,
    pub labels: Vec<String>,
    pub summary: RunSummary,
    pub tasks: BTreeMap<TaskId, TaskResult>,
}

impl ResultsFile {
    pub fn task_results(report: &AggregationReport) -> BTreeMap<TaskId, TaskResult> {
        report
            .contribution_counts
            .iter()
            .map(|(id, &count)| {
                (
                    id.clone(),
                    TaskResult {
                        label: report.results.get(id).cloned(),
                        contribution_count: count,
                        solved: report.results.contains_key(id),
                    },
                )
            })
            .collect()
    }

    /// Solved tasks and their labels.
    pub fn solved(&self) -> BTreeMap<TaskId, String> {
        self.tasks
            .iter()
            .filter_map(|(id, r)| r.label.clone().map(|l| (id.clone(), l)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmComparison {
    pub algorithm: String,
    pub report: ComparisonReport,
}

/// Layout of `comparison.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFile {
    pub manifest: RunManifest,
    /// Tasks left unsolved by the incremental run are not compared.
    pub excluded_unsolved: usize,
    pub comparisons: Vec<AlgorithmComparison>,
}
