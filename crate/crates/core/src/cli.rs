//! The `simulate`, `replay` and `compare` commands behind the `truthinf` binary, usable
//! directly as library calls.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::baselines::{
    dawid_skene_em, majority_vote, message_passing, BaselineError, ContributionLog, EmOptions,
    MP_DEFAULT_ITERS,
};
use crate::config::{ConfigError, EngineConfig};
use crate::engine::{AggregationReport, EngineError, EngineState, RecordedAnswer};
use crate::io::{
    self, AlgorithmComparison, ComparisonFile, FormatError, ResultsFile, RunManifest, RunSummary,
    COMPARISON_FILE, CONTRIBUTIONS_FILE, MANIFEST_FILE, RESULTS_FILE,
};
use crate::metrics::{self, one_decimal, MetricsError};
use crate::model::{Contribution, LabelSet, LabelSetError, PlayerId, TaskId};
use crate::simulator::{generate_world, run_experiment, SimulatorError, WorldParams};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot use output directory {path}: {source}")]
    OutputDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read config {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("line {line}: round {round_id} comes after round {previous}")]
    OutOfOrderRounds {
        line: usize,
        round_id: u64,
        previous: u64,
    },
    #[error("line {line}: round {round_id} mixes answers from {first} and {other}")]
    MixedRound {
        line: usize,
        round_id: u64,
        first: PlayerId,
        other: PlayerId,
    },
    #[error("unknown algorithm {0:?} (expected mv, em or mp)")]
    UnknownAlgorithm(String),
    #[error("label set: {0}")]
    Labels(#[from] LabelSetError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Ex-post aggregators available to `compare`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algorithm {
    MajorityVote,
    Em,
    MessagePassing,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::MajorityVote,
        Algorithm::Em,
        Algorithm::MessagePassing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MajorityVote => "mv",
            Algorithm::Em => "em",
            Algorithm::MessagePassing => "mp",
        }
    }
}

impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mv" => Ok(Algorithm::MajorityVote),
            "em" => Ok(Algorithm::Em),
            "mp" => Ok(Algorithm::MessagePassing),
            _ => Err(CliError::UnknownAlgorithm(s.to_owned())),
        }
    }
}

pub fn parse_algorithms<S: AsRef<str>>(names: &[S]) -> Result<Vec<Algorithm>, CliError> {
    names.iter().map(|n| n.as_ref().parse()).collect()
}

/// Flag values that override the config file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConfigOverrides {
    pub min_agreement: Option<u32>,
    pub threshold: Option<f64>,
    pub alpha: Option<f64>,
}

impl ConfigOverrides {
    /// Applies the overrides. A new minimum agreement without an explicit threshold also
    /// moves the threshold to `min_agreement - 0.5`.
    pub fn apply(&self, mut config: EngineConfig) -> EngineConfig {
        if let Some(p) = self.min_agreement {
            config.min_agreement = p;
            if self.threshold.is_none() {
                config.threshold = f64::from(p) - 0.5;
            }
        }
        if let Some(t) = self.threshold {
            config.threshold = t;
        }
        if let Some(a) = self.alpha {
            config.alpha = a;
        }
        config
    }
}

/// Reads a TOML config whose keys are [`EngineConfig`] field names; missing keys keep their
/// defaults. Without a path, returns the defaults.
pub fn load_config(path: Option<&Path>) -> Result<EngineConfig, CliError> {
    let Some(path) = path else {
        return Ok(EngineConfig::default());
    };
    let err = |message: String| CliError::ConfigFile {
        path: path.to_owned(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    toml::from_str(&text).map_err(|e| err(e.to_string()))
}

fn prepare_out_dir(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::OutputDir {
        path: out_dir.to_owned(),
        source,
    })
}

fn summary(
    report: &AggregationReport,
    config: &EngineConfig,
    n_labels: usize,
) -> Result<RunSummary, CliError> {
    let n_tasks = report.contribution_counts.len();
    let theoretical = metrics::theoretical_redundancy(
        n_tasks as u64,
        n_labels as u64,
        u64::from(config.min_agreement),
    )?;
    Ok(RunSummary {
        tasks: n_tasks,
        solved: report.results.len(),
        unsolved: report.unsolved.clone(),
        rounds: report.rounds,
        total_contributions: report.total_contributions,
        control_contributions: report.control_contributions,
        theoretical_redundancy: theoretical,
        redundancy_saving: metrics::redundancy_saving(report.total_contributions, theoretical)?,
    })
}

/// What `simulate` produced.
#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub report: AggregationReport,
    pub results: ResultsFile,
    pub files: Vec<PathBuf>,
}

/// Generates a world, plays it to completion and writes `contributions.jsonl`,
/// `results.json` and `manifest.json` into `out_dir`.
pub fn simulate(
    world_params: &WorldParams,
    config: &EngineConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<SimulateOutput, CliError> {
    config.validate()?;
    prepare_out_dir(out_dir)?;
    let mut manifest = RunManifest::new("simulate", config);
    manifest.world = Some(world_params.clone());
    manifest.seeds.insert("seed".into(), seed);

    let world = generate_world(world_params, seed)?;
    let experiment = run_experiment(&world, config, seed)?;

    let files: Vec<PathBuf> = [CONTRIBUTIONS_FILE, RESULTS_FILE, MANIFEST_FILE]
        .iter()
        .map(|f| out_dir.join(f))
        .collect();
    manifest.outputs = files.clone();
    io::write_contributions_file(&files[0], &experiment.contributions)?;
    manifest.finish();
    let results = ResultsFile {
        manifest: manifest.clone(),
        labels: world.labels.labels().to_vec(),
        summary: summary(&experiment.report, config, world.labels.len())?,
        tasks: ResultsFile::task_results(&experiment.report),
    };
    io::write_json(&files[1], &results)?;
    io::write_json(&files[2], &manifest)?;
    Ok(SimulateOutput {
        report: experiment.report,
        results,
        files,
    })
}

type Round = (PlayerId, u64, Vec<RecordedAnswer>);

/// Groups numbered log lines into rounds, checking that round ids never decrease and that
/// each round belongs to a single player.
fn rounds<'a>(
    lines: impl IntoIterator<Item = (usize, &'a Contribution)>,
) -> Result<Vec<Round>, CliError> {
    let mut out: Vec<Round> = Vec::new();
    for (line, c) in lines {
        let answer = RecordedAnswer {
            task_id: c.task_id.clone(),
            label: c.label.clone(),
            control_truth: c.true_label.clone(),
        };
        match out.last_mut() {
            Some((player, round_id, answers)) if *round_id == c.round_id => {
                if *player != c.player_id {
                    return Err(CliError::MixedRound {
                        line,
                        round_id: c.round_id,
                        first: player.clone(),
                        other: c.player_id.clone(),
                    });
                }
                answers.push(answer);
            }
            Some((_, previous, _)) if *previous > c.round_id => {
                return Err(CliError::OutOfOrderRounds {
                    line,
                    round_id: c.round_id,
                    previous: *previous,
                });
            }
            _ => out.push((c.player_id.clone(), c.round_id, vec![answer])),
        }
    }
    Ok(out)
}

/// Labels used by a log, in sorted order.
pub fn labels_in_log<'a>(
    contributions: impl IntoIterator<Item = &'a Contribution>,
) -> Result<LabelSet, CliError> {
    let labels: BTreeSet<&str> = contributions
        .into_iter()
        .flat_map(|c| std::iter::once(c.label.as_str()).chain(c.true_label.as_deref()))
        .collect();
    Ok(LabelSet::new(labels)?)
}

/// Replays a contribution log through the engine in recorded order.
///
/// Every task that appears as a non-control answer is treated as initially unsolved; controls
/// are scored against the known answer recorded on their line.
pub fn replay_log(
    contributions: &[Contribution],
    labels: LabelSet,
    config: &EngineConfig,
) -> Result<AggregationReport, CliError> {
    let lines = || contributions.iter().enumerate().map(|(i, c)| (i + 1, c));
    replay_rounds(rounds(lines())?, lines().map(|(_, c)| c), labels, config)
}

fn replay_rounds<'a>(
    rounds: Vec<Round>,
    contributions: impl IntoIterator<Item = &'a Contribution>,
    labels: LabelSet,
    config: &EngineConfig,
) -> Result<AggregationReport, CliError> {
    config.validate()?;
    let tasks: BTreeSet<TaskId> = contributions
        .into_iter()
        .filter(|c| !c.is_control)
        .map(|c| c.task_id.clone())
        .collect();
    let mut state = EngineState::new(labels, tasks, std::iter::empty())?;
    for (player, round_id, answers) in rounds {
        state.replay_round(&player, round_id, &answers, config)?;
    }
    Ok(state.report())
}

/// Reads `log_path`, replays it and writes `results.json` into `out_dir`. Without `labels`,
/// the label set is every label that appears in the log.
pub fn replay(
    log_path: &Path,
    labels: Option<LabelSet>,
    config: &EngineConfig,
    out_dir: &Path,
) -> Result<ResultsFile, CliError> {
    config.validate()?;
    let mut manifest = RunManifest::new("replay", config);
    manifest.inputs.push(log_path.to_owned());
    let lines = io::read_contributions_file(log_path)?;
    let grouped = rounds(lines.iter().map(|(n, c)| (*n, c)))?;
    let labels = match labels {
        Some(l) => l,
        None => labels_in_log(lines.iter().map(|(_, c)| c))?,
    };
    let report = replay_rounds(
        grouped,
        lines.iter().map(|(_, c)| c),
        labels.clone(),
        config,
    )?;

    prepare_out_dir(out_dir)?;
    let path = out_dir.join(RESULTS_FILE);
    manifest.outputs.push(path.clone());
    manifest.finish();
    let results = ResultsFile {
        manifest,
        labels: labels.labels().to_vec(),
        summary: summary(&report, config, labels.len())?,
        tasks: ResultsFile::task_results(&report),
    };
    io::write_json(&path, &results)?;
    Ok(results)
}

/// Runs each baseline on `log` and compares it with `incremental` over the tasks the
/// incremental run solved.
pub fn compare_labels(
    log: &ContributionLog,
    incremental: &BTreeMap<TaskId, String>,
    counts: &BTreeMap<TaskId, u32>,
    algorithms: &[Algorithm],
    seed: u64,
) -> Result<Vec<AlgorithmComparison>, CliError> {
    let mut out = Vec::new();
    for &algorithm in algorithms {
        let labels = match algorithm {
            Algorithm::MajorityVote => majority_vote(log, seed)?.labels,
            Algorithm::Em => dawid_skene_em(log, EmOptions::default())?.1,
            Algorithm::MessagePassing => message_passing(log, MP_DEFAULT_ITERS, seed)?,
        };
        let mut restricted = BTreeMap::new();
        for task in incremental.keys() {
            // A solved task always has at least one answer in its own log.
            let label = labels
                .get(task)
                .ok_or_else(|| MetricsError::UnknownTask(task.clone()))?;
            restricted.insert(task.clone(), label.clone());
        }
        let report = metrics::agreement_report(incremental, &restricted, log.labels())?
            .with_contribution_counts(counts.clone());
        out.push(AlgorithmComparison {
            algorithm: algorithm.name().to_owned(),
            report,
        });
    }
    Ok(out)
}

/// Console summary in the column order Algorithm, % diff., Accuracy, Kappa, Rand; all
/// figures are percentages to one decimal.
pub fn comparison_table(comparisons: &[AlgorithmComparison]) -> String {
    let mut s = format!(
        "{:<10}{:>9}{:>10}{:>8}{:>8}\n",
        "Algorithm", "% diff.", "Accuracy", "Kappa", "Rand"
    );
    for c in comparisons {
        let r = &c.report;
        let _ = writeln!(
            s,
            "{:<10}{:>9.1}{:>10.1}{:>8.1}{:>8.1}",
            c.algorithm,
            one_decimal(r.percent_diff),
            one_decimal(100.0 * r.accuracy),
            one_decimal(100.0 * r.kappa),
            one_decimal(100.0 * r.adjusted_rand),
        );
    }
    s
}

/// Reads a contribution log and a `results.json`, compares the requested baselines against
/// the incremental labels and writes `comparison.json` into `out_dir`.
pub fn compare(
    log_path: &Path,
    results_path: &Path,
    algorithms: &[Algorithm],
    seed: u64,
    out_dir: &Path,
) -> Result<ComparisonFile, CliError> {
    let results: ResultsFile = io::read_json(results_path)?;
    let mut manifest = RunManifest::new("compare", &results.manifest.config);
    manifest.seeds.insert("seed".into(), seed);
    manifest.inputs = vec![log_path.to_owned(), results_path.to_owned()];

    let labels = LabelSet::new(&results.labels)?;
    let lines = io::read_contributions_file(log_path)?;
    let log = ContributionLog::new(labels, lines.into_iter().map(|(_, c)| c))?;
    let solved = results.solved();
    let counts = results
        .tasks
        .iter()
        .filter(|(_, r)| r.solved)
        .map(|(id, r)| (id.clone(), r.contribution_count))
        .collect();
    let comparisons = compare_labels(&log, &solved, &counts, algorithms, seed)?;

    prepare_out_dir(out_dir)?;
    let path = out_dir.join(COMPARISON_FILE);
    manifest.outputs.push(path.clone());
    manifest.finish();
    let file = ComparisonFile {
        manifest,
        excluded_unsolved: results.tasks.len() - solved.len(),
        comparisons,
    };
    io::write_json(&path, &file)?;
    Ok(file)
}
