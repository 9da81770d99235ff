//! Incremental truth inference.
//!
//! Each game round mixes control tasks (known answer) with unsolved tasks. The control answers
//! give the round's quality `q`; every unsolved-task answer then adds `increment * q` to the
//! answered label's score. A task is solved, and leaves the game, as soon as its unique top
//! score exceeds the configured threshold.
//!
//! [`EngineState`] is a single logical writer: [`EngineState::submit_round`] must be serialized
//! per instance. Disjoint task pools can run in independent instances.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, EngineConfig, ReliabilityMode};
use crate::model::{
    Contribution, LabelSet, PlayerId, ReliabilityRecord, RoundId, ScoreRow, Task, TaskId, TaskState,
};
use crate::seed;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("all tasks are solved")]
    PoolEmpty,
    #[error("player {0} has already seen every eligible task")]
    PlayerExhausted(PlayerId),
    #[error("{errors} errors out of {control_count} control answers is out of domain")]
    Domain { errors: u32, control_count: u32 },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {0} registered twice")]
    DuplicateTask(TaskId),
    #[error("round {round_id}: answers do not match the assignment (missing {missing:?}, unexpected {unexpected:?})")]
    AnswerSetMismatch {
        round_id: RoundId,
        missing: Vec<TaskId>,
        unexpected: Vec<TaskId>,
    },
    #[error("round {0} is not pending")]
    UnknownRound(RoundId),
    #[error("round {0} has no control answers")]
    MissingControl(RoundId),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("player stream ended with {} unsolved tasks", .0.unsolved.len())]
    Starvation(Box<AggregationReport>),
}

/// Turns a round's control-task errors into a quality in `[0, 1]`.
pub fn compute_reliability(
    errors: u32,
    control_count: u32,
    config: &EngineConfig,
) -> Result<f64, EngineError> {
    if control_count == 0 || errors > control_count {
        return Err(EngineError::Domain {
            errors,
            control_count,
        });
    }
    Ok(match config.reliability_mode {
        ReliabilityMode::Exponential => (-config.alpha * f64::from(errors)).exp(),
        ReliabilityMode::LinearFraction => 1.0 - f64::from(errors) / f64::from(control_count),
    })
}

/// Adds `increment * quality` to the answered label and removes `decrement * quality` from
/// every other label, clamping at zero.
pub fn update_solution_estimate(
    row: &mut ScoreRow,
    answered: usize,
    quality: f64,
    config: &EngineConfig,
) -> Result<(), EngineError> {
    if answered >= row.scores.len() {
        return Err(EngineError::UnknownLabel(format!("#{answered}")));
    }
    for (j, s) in row.scores.iter_mut().enumerate() {
        if j == answered {
            *s += config.increment * quality;
        } else if config.decrement > 0.0 {
            *s = (*s - config.decrement * quality).max(0.0);
        }
    }
    Ok(())
}

/// The winning label index if the row's maximum is unique and exceeds the threshold.
///
/// Several labels tied at a maximum above the threshold do not complete the task.
pub fn check_completion(row: &ScoreRow, config: &EngineConfig) -> Option<usize> {
    match row.max() {
        Some((j, s, 1)) if s > config.threshold => Some(j),
        _ => None,
    }
}

/// Tasks handed to a player for one round.
///
/// Only `player_id`, `round_id` and `tasks` are visible to the answering side; which of the
/// tasks are controls is kept internal and never serialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundAssignment {
    pub player_id: PlayerId,
    pub round_id: RoundId,
    pub tasks: Vec<TaskId>,
    #[serde(skip)]
    control_mask: Vec<bool>,
}

impl RoundAssignment {
    pub(crate) fn is_control(&self, idx: usize) -> bool {
        self.control_mask[idx]
    }
}

/// What a submitted round did.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub reliability: ReliabilityRecord,
    /// Tasks solved by this round, in processing order, with their inferred label.
    pub solved: Vec<(TaskId, String)>,
    /// Answers discarded because their task had already been solved.
    pub stale: Vec<TaskId>,
}

/// One answer of a recorded round, used to replay a contribution log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedAnswer {
    pub task_id: TaskId,
    pub label: String,
    /// Known answer when the task served as a control.
    pub control_truth: Option<String>,
}

/// Inferred labels plus the bookkeeping needed to assess a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub results: BTreeMap<TaskId, String>,
    /// Accepted non-control contributions per originally unsolved task, solved or not.
    pub contribution_counts: BTreeMap<TaskId, u32>,
    pub unsolved: Vec<TaskId>,
    pub reliability_log: Vec<ReliabilityRecord>,
    pub rounds: u64,
    pub total_contributions: u64,
    pub control_contributions: u64,
}

impl AggregationReport {
    pub fn is_complete(&self) -> bool {
        self.unsolved.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Pending {
    player_id: PlayerId,
    tasks: Vec<TaskId>,
}

/// The task pool, control pool, scores, per-player history and inferred results.
#[derive(Debug, Clone)]
pub struct EngineState {
    labels: LabelSet,
    tasks: BTreeMap<TaskId, Task>,
    task_pool: BTreeSet<TaskId>,
    control_pool: BTreeSet<TaskId>,
    scores: BTreeMap<TaskId, ScoreRow>,
    history: HashMap<PlayerId, HashSet<TaskId>>,
    results: BTreeMap<TaskId, String>,
    reliability_log: Vec<ReliabilityRecord>,
    contributions: Vec<Contribution>,
    pending: BTreeMap<RoundId, Pending>,
    next_round: RoundId,
}

impl EngineState {
    /// Builds a state from unsolved task ids and `(task, known label)` control tasks.
    pub fn new<U, C>(labels: LabelSet, unsolved: U, controls: C) -> Result<Self, EngineError>
    where
        U: IntoIterator<Item = TaskId>,
        C: IntoIterator<Item = (TaskId, String)>,
    {
        let mut state = Self {
            labels,
            tasks: BTreeMap::new(),
            task_pool: BTreeSet::new(),
            control_pool: BTreeSet::new(),
            scores: BTreeMap::new(),
            history: HashMap::new(),
            results: BTreeMap::new(),
            reliability_log: Vec::new(),
            contributions: Vec::new(),
            pending: BTreeMap::new(),
            next_round: 0,
        };
        let n_labels = state.labels.len();
        for id in unsolved {
            if state.tasks.contains_key(&id) {
                return Err(EngineError::DuplicateTask(id));
            }
            state.task_pool.insert(id.clone());
            state
                .scores
                .insert(id.clone(), ScoreRow::zeros(id.clone(), n_labels));
            state.tasks.insert(id.clone(), Task::unsolved(id));
        }
        for (id, label) in controls {
            if !state.labels.contains(&label) {
                return Err(EngineError::UnknownLabel(label));
            }
            if state.tasks.contains_key(&id) {
                return Err(EngineError::DuplicateTask(id));
            }
            state.control_pool.insert(id.clone());
            state.tasks.insert(id.clone(), Task::control(id, label));
        }
        Ok(state)
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn task(&self, id: &TaskId) -> Option<&Task> {
        self.tasks.get(id)
    }

    pub fn score_row(&self, id: &TaskId) -> Option<&ScoreRow> {
        self.scores.get(id)
    }

    pub fn task_pool(&self) -> &BTreeSet<TaskId> {
        &self.task_pool
    }

    pub fn control_pool(&self) -> &BTreeSet<TaskId> {
        &self.control_pool
    }

    pub fn results(&self) -> &BTreeMap<TaskId, String> {
        &self.results
    }

    pub fn reliability_log(&self) -> &[ReliabilityRecord] {
        &self.reliability_log
    }

    /// Every accepted answer, control answers included, in processing order.
    pub fn contributions(&self) -> &[Contribution] {
        &self.contributions
    }

    pub fn has_seen(&self, player: &PlayerId, task: &TaskId) -> bool {
        self.history.get(player).is_some_and(|h| h.contains(task))
    }

    /// Picks unseen control and unsolved tasks for `player` and reserves them in the
    /// player's history. Deterministic given the state and `seed`.
    pub fn assign_round(
        &mut self,
        player: &PlayerId,
        config: &EngineConfig,
        seed: u64,
    ) -> Result<RoundAssignment, EngineError> {
        config.validate()?;
        if self.task_pool.is_empty() {
            return Err(EngineError::PoolEmpty);
        }
        let seen = self.history.get(player);
        let unseen = |id: &&TaskId| seen.is_none_or(|h| !h.contains(*id));
        let open: Vec<&TaskId> = self.task_pool.iter().filter(unseen).collect();
        let controls: Vec<&TaskId> = self.control_pool.iter().filter(unseen).collect();
        if open.is_empty() || controls.is_empty() {
            return Err(EngineError::PlayerExhausted(player.clone()));
        }

        let mut rng = seed::rng(seed);
        let n_controls = config.control_tasks_per_round.min(controls.len());
        let n_open = config.tasks_per_round.min(open.len());
        let mut picked: Vec<(TaskId, bool)> = Vec::with_capacity(n_controls + n_open);
        for i in index::sample(&mut rng, controls.len(), n_controls) {
            picked.push((controls[i].clone(), true));
        }
        for i in index::sample(&mut rng, open.len(), n_open) {
            picked.push((open[i].clone(), false));
        }
        picked.shuffle(&mut rng);

        let round_id = self.next_round;
        self.next_round += 1;
        let (tasks, control_mask): (Vec<TaskId>, Vec<bool>) = picked.into_iter().unzip();
        self.history
            .entry(player.clone())
            .or_default()
            .extend(tasks.iter().cloned());
        self.pending.insert(
            round_id,
            Pending {
                player_id: player.clone(),
                tasks: tasks.clone(),
            },
        );
        Ok(RoundAssignment {
            player_id: player.clone(),
            round_id,
            tasks,
            control_mask,
        })
    }

    /// Abandons a pending round and releases its history reservation.
    pub fn cancel_round(&mut self, round_id: RoundId) -> Result<(), EngineError> {
        let pending = self
            .pending
            .remove(&round_id)
            .ok_or(EngineError::UnknownRound(round_id))?;
        if let Some(h) = self.history.get_mut(&pending.player_id) {
            for t in &pending.tasks {
                h.remove(t);
            }
        }
        Ok(())
    }

    /// Scores a player's answers to a pending assignment.
    ///
    /// Answers to tasks solved since the assignment was made are discarded and reported in
    /// [`RoundOutcome::stale`].
    pub fn submit_round(
        &mut self,
        assignment: &RoundAssignment,
        answers: &HashMap<TaskId, String>,
        config: &EngineConfig,
    ) -> Result<RoundOutcome, EngineError> {
        let round_id = assignment.round_id;
        match self.pending.get(&round_id) {
            Some(p) if p.player_id == assignment.player_id && p.tasks == assignment.tasks => {}
            _ => return Err(EngineError::UnknownRound(round_id)),
        }
        let missing: Vec<TaskId> = assignment
            .tasks
            .iter()
            .filter(|t| !answers.contains_key(*t))
            .cloned()
            .collect();
        let mut unexpected: Vec<TaskId> = answers
            .keys()
            .filter(|t| !assignment.tasks.contains(t))
            .cloned()
            .collect();
        if !missing.is_empty() || !unexpected.is_empty() {
            unexpected.sort();
            return Err(EngineError::AnswerSetMismatch {
                round_id,
                missing,
                unexpected,
            });
        }

        let mut controls = Vec::new();
        let mut open = Vec::new();
        for (i, task_id) in assignment.tasks.iter().enumerate() {
            let label = &answers[task_id];
            let answered = self
                .labels
                .index_of(label)
                .ok_or_else(|| EngineError::UnknownLabel(label.clone()))?;
            if assignment.is_control(i) {
                let truth = self.tasks[task_id]
                    .true_label
                    .as_deref()
                    .and_then(|l| self.labels.index_of(l))
                    .expect("control tasks carry a valid known label");
                controls.push((task_id.clone(), answered, truth));
            } else {
                open.push((task_id.clone(), answered));
            }
        }
        self.pending.remove(&round_id);
        self.apply_round(&assignment.player_id, round_id, controls, open, config)
    }

    /// Feeds one recorded round (for instance from a contribution log) through the engine,
    /// bypassing assignment. Controls are scored against the recorded known answer.
    pub fn replay_round(
        &mut self,
        player: &PlayerId,
        round_id: RoundId,
        answers: &[RecordedAnswer],
        config: &EngineConfig,
    ) -> Result<RoundOutcome, EngineError> {
        config.validate()?;
        let mut controls = Vec::new();
        let mut open = Vec::new();
        for a in answers {
            let answered = self
                .labels
                .index_of(&a.label)
                .ok_or_else(|| EngineError::UnknownLabel(a.label.clone()))?;
            match &a.control_truth {
                Some(truth) => {
                    let truth = self
                        .labels
                        .index_of(truth)
                        .ok_or_else(|| EngineError::UnknownLabel(truth.clone()))?;
                    controls.push((a.task_id.clone(), answered, truth));
                }
                None => {
                    if !self.tasks.contains_key(&a.task_id) {
                        return Err(EngineError::UnknownTask(a.task_id.clone()));
                    }
                    open.push((a.task_id.clone(), answered));
                }
            }
        }
        self.history
            .entry(player.clone())
            .or_default()
            .extend(answers.iter().map(|a| a.task_id.clone()));
        self.next_round = self.next_round.max(round_id + 1);
        self.apply_round(player, round_id, controls, open, config)
    }

    fn apply_round(
        &mut self,
        player: &PlayerId,
        round_id: RoundId,
        controls: Vec<(TaskId, usize, usize)>,
        open: Vec<(TaskId, usize)>,
        config: &EngineConfig,
    ) -> Result<RoundOutcome, EngineError> {
        if controls.is_empty() {
            return Err(EngineError::MissingControl(round_id));
        }
        let errors = controls.iter().filter(|(_, a, t)| a != t).count() as u32;
        let control_count = controls.len() as u32;
        let quality = compute_reliability(errors, control_count, config)?;

        for (task_id, answered, truth) in controls {
            self.contributions.push(Contribution {
                round_id,
                player_id: player.clone(),
                task_id,
                label: self.labels.label(answered).to_owned(),
                is_control: true,
                true_label: Some(self.labels.label(truth).to_owned()),
            });
        }

        let mut solved = Vec::new();
        let mut stale = Vec::new();
        for (task_id, answered) in open {
            if !self.task_pool.contains(&task_id) {
                stale.push(task_id);
                continue;
            }
            let row = self
                .scores
                .get_mut(&task_id)
                .expect("pooled tasks have a score row");
            update_solution_estimate(row, answered, quality, config)?;
            let winner = check_completion(row, config);
            let task = self
                .tasks
                .get_mut(&task_id)
                .expect("pooled tasks are registered");
            task.contribution_count += 1;
            self.contributions.push(Contribution {
                round_id,
                player_id: player.clone(),
                task_id: task_id.clone(),
                label: self.labels.label(answered).to_owned(),
                is_control: false,
                true_label: None,
            });
            if let Some(winner) = winner {
                // Only the answered label grew, so a fresh unique maximum must be it.
                debug_assert_eq!(winner, answered);
                let label = self.labels.label(winner).to_owned();
                task.state = TaskState::Solved;
                task.true_label = Some(label.clone());
                self.task_pool.remove(&task_id);
                if config.promote_solved_to_control {
                    self.control_pool.insert(task_id.clone());
                }
                self.results.insert(task_id.clone(), label.clone());
                solved.push((task_id, label));
            }
        }

        let reliability = ReliabilityRecord {
            player_id: player.clone(),
            round_id,
            errors,
            control_count,
            quality,
        };
        self.reliability_log.push(reliability.clone());
        Ok(RoundOutcome {
            reliability,
            solved,
            stale,
        })
    }

    /// Snapshot of the inferred labels and counters.
    pub fn report(&self) -> AggregationReport {
        let contribution_counts: BTreeMap<TaskId, u32> = self
            .scores
            .keys()
            .map(|id| (id.clone(), self.tasks[id].contribution_count))
            .collect();
        let total_contributions = contribution_counts.values().map(|&c| u64::from(c)).sum();
        let control_contributions = self.contributions.iter().filter(|c| c.is_control).count();
        AggregationReport {
            results: self.results.clone(),
            contribution_counts,
            unsolved: self.task_pool.iter().cloned().collect(),
            reliability_log: self.reliability_log.clone(),
            rounds: self.reliability_log.len() as u64,
            total_contributions,
            control_contributions: control_contributions as u64,
        }
    }

    /// Runs assign/submit over a stream of player sessions until every task is solved.
    ///
    /// Each stream item is one round played by `player`; its answer function receives the
    /// round id and the task id. Sessions of players who have seen every eligible task are
    /// skipped. If the stream ends first, the partial report is returned inside
    /// [`EngineError::Starvation`].
    pub fn run_to_completion<I, F>(
        &mut self,
        sessions: I,
        config: &EngineConfig,
        seed: u64,
    ) -> Result<AggregationReport, EngineError>
    where
        I: IntoIterator<Item = (PlayerId, F)>,
        F: FnMut(RoundId, &TaskId) -> String,
    {
        config.validate()?;
        for (player, mut answer) in sessions {
            if self.task_pool.is_empty() {
                break;
            }
            let round_seed = seed::derive(seed, &[self.next_round]);
            let assignment = match self.assign_round(&player, config, round_seed) {
                Ok(a) => a,
                Err(EngineError::PlayerExhausted(_)) => continue,
                Err(EngineError::PoolEmpty) => break,
                Err(e) => return Err(e),
            };
            let answers: HashMap<TaskId, String> = assignment
                .tasks
                .iter()
                .map(|t| (t.clone(), answer(assignment.round_id, t)))
                .collect();
            if let Err(e) = self.submit_round(&assignment, &answers, config) {
                self.cancel_round(assignment.round_id).ok();
                return Err(e);
            }
        }
        let report = self.report();
        if report.is_complete() {
            Ok(report)
        } else {
            Err(EngineError::Starvation(Box::new(report)))
        }
    }
}
