//! Ex-post aggregators: they see every contribution at once, after collection has finished.

mod em;
mod majority;
mod message_passing;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Contribution, LabelSet, PlayerId, TaskId};

pub use em::{dawid_skene_em, EmModel, EmOptions, EM_SMOOTHING};
pub use majority::{majority_vote, MajorityVote};
pub use message_passing::{message_passing, MP_DEFAULT_ITERS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("the contribution log is empty")]
    NoContributions,
    #[error("task {0} has no contributions")]
    EmptyTask(TaskId),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("player {player} answered task {task} more than once")]
    DuplicateContribution { player: PlayerId, task: TaskId },
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}

/// One non-control answer, with task, player and label as dense indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Answer {
    pub task: usize,
    pub player: usize,
    pub label: usize,
}

/// The sparse task x player answer matrix consumed by the baselines.
///
/// Answers are stored in canonical (task, player) order, so aggregators do not depend on the
/// order contributions were supplied in.
#[derive(Debug, Clone)]
pub struct ContributionLog {
    labels: LabelSet,
    tasks: Vec<TaskId>,
    players: Vec<PlayerId>,
    answers: Vec<Answer>,
}

impl ContributionLog {
    /// Builds a log from contributions. Control answers are skipped.
    pub fn new<I>(labels: LabelSet, contributions: I) -> Result<Self, BaselineError>
    where
        I: IntoIterator<Item = Contribution>,
    {
        let mut raw = Vec::new();
        for c in contributions.into_iter().filter(|c| !c.is_control) {
            let label = labels
                .index_of(&c.label)
                .ok_or_else(|| BaselineError::UnknownLabel(c.label.clone()))?;
            raw.push((c.task_id, c.player_id, label));
        }
        Self::from_triples(labels, raw, std::iter::empty())
    }

    /// Builds a log from `(task, player, label index)` triples plus extra tasks that may have
    /// no answers.
    pub(crate) fn from_triples<E>(
        labels: LabelSet,
        raw: Vec<(TaskId, PlayerId, usize)>,
        extra_tasks: E,
    ) -> Result<Self, BaselineError>
    where
        E: IntoIterator<Item = TaskId>,
    {
        let mut task_idx: BTreeMap<TaskId, usize> =
            raw.iter().map(|(t, _, _)| (t.clone(), 0)).collect();
        for t in extra_tasks {
            task_idx.entry(t).or_insert(0);
        }
        let mut player_idx: BTreeMap<PlayerId, usize> =
            raw.iter().map(|(_, p, _)| (p.clone(), 0)).collect();
        for (i, v) in task_idx.values_mut().enumerate() {
            *v = i;
        }
        for (i, v) in player_idx.values_mut().enumerate() {
            *v = i;
        }
        let mut answers: Vec<Answer> = raw
            .iter()
            .map(|(t, p, l)| Answer {
                task: task_idx[t],
                player: player_idx[p],
                label: *l,
            })
            .collect();
        answers.sort();
        let tasks: Vec<TaskId> = task_idx.into_keys().collect();
        let players: Vec<PlayerId> = player_idx.into_keys().collect();
        if let Some(w) = answers
            .windows(2)
            .find(|w| w[0].task == w[1].task && w[0].player == w[1].player)
        {
            return Err(BaselineError::DuplicateContribution {
                player: players[w[0].player].clone(),
                task: tasks[w[0].task].clone(),
            });
        }
        Ok(Self {
            labels,
            tasks,
            players,
            answers,
        })
    }

    /// Registers a task that has no contributions (yet).
    pub fn with_task(self, task: TaskId) -> Self {
        let raw = self
            .answers
            .iter()
            .map(|a| {
                (
                    self.tasks[a.task].clone(),
                    self.players[a.player].clone(),
                    a.label,
                )
            })
            .collect();
        let extra = self.tasks.iter().cloned().chain(std::iter::once(task));
        Self::from_triples(self.labels.clone(), raw, extra.collect::<Vec<_>>())
            .expect("re-indexing a valid log cannot fail")
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn tasks(&self) -> &[TaskId] {
        &self.tasks
    }

    pub fn players(&self) -> &[PlayerId] {
        &self.players
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub(crate) fn answers(&self) -> &[Answer] {
        &self.answers
    }

    /// Per-task label vote counts.
    pub(crate) fn vote_counts(&self) -> Vec<Vec<u32>> {
        let mut counts = vec![vec![0u32; self.labels.len()]; self.tasks.len()];
        for a in &self.answers {
            counts[a.task][a.label] += 1;
        }
        counts
    }

    pub(crate) fn label_map(
        &self,
        per_task: impl IntoIterator<Item = usize>,
    ) -> BTreeMap<TaskId, String> {
        self.tasks
            .iter()
            .cloned()
            .zip(
                per_task
                    .into_iter()
                    .map(|l| self.labels.label(l).to_owned()),
            )
            .collect()
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
