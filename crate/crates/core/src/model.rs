//! Domain types shared by the engine, the ex-post baselines, the simulator and the metrics.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Identifier of a labeling task.
    TaskId
);
string_id!(
    /// Identifier of a player (crowd worker).
    PlayerId
);

/// Identifier of a game round. Rounds are numbered in the order they were assigned.
pub type RoundId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelSetError {
    #[error("label set needs at least 2 labels, got {0}")]
    TooSmall(usize),
    #[error("duplicate label `{0}`")]
    Duplicate(String),
}

/// The ordered set of admissible labels. Score vectors index labels by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelSet {
    labels: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self, LabelSetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(LabelSetError::Duplicate(l.clone()));
            }
        }
        if labels.len() < 2 {
            return Err(LabelSetError::TooSmall(labels.len()));
        }
        Ok(Self { labels, index })
    }

    /// `v1 .. vL`.
    pub fn numbered(n: usize) -> Result<Self, LabelSetError> {
        Self::new((1..=n).map(|i| format!("v{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    /// Panics if `idx >= len()`.
    pub fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            labels: Vec<String>,
        }
        let raw = Raw::deserialize(d)?;
        LabelSet::new(raw.labels).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Unsolved,
    Solved,
    Control,
}

/// A labeling task and its lifecycle state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub state: TaskState,
    /// Present iff the task is `Control` or `Solved`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<String>,
    /// Accepted non-control contributions.
    pub contribution_count: u32,
}

impl Task {
    pub fn unsolved(id: impl Into<TaskId>) -> Self {
        Self {
            id: id.into(),
            state: TaskState::Unsolved,
            true_label: None,
            contribution_count: 0,
        }
    }

    pub fn control(id: impl Into<TaskId>, true_label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            state: TaskState::Control,
            true_label: Some(true_label.into()),
            contribution_count: 0,
        }
    }
}

/// One answer given by a player to a task during a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub round_id: RoundId,
    pub player_id: PlayerId,
    pub task_id: TaskId,
    pub label: String,
    pub is_control: bool,
    /// Known answer of a control task; present iff `is_control`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<String>,
}

/// Estimation scores of one task over the label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub task_id: TaskId,
    pub scores: Vec<f64>,
}

impl ScoreRow {
    pub fn zeros(task_id: TaskId, n_labels: usize) -> Self {
        Self {
            task_id,
            scores: vec![0.0; n_labels],
        }
    }

    /// Index of the largest score and the number of labels sharing it.
    pub fn max(&self) -> Option<(usize, f64, usize)> {
        let mut best: Option<(usize, f64, usize)> = None;
        for (i, &s) in self.scores.iter().enumerate() {
            best = match best {
                None => Some((i, s, 1)),
                Some((bi, bs, n)) if s == bs => Some((bi, bs, n + 1)),
                Some((_, bs, _)) if s > bs => Some((i, s, 1)),
                keep => keep,
            };
        }
        best
    }
}

/// Reliability of one player during one round, measured on control tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRecord {
    pub player_id: PlayerId,
    pub round_id: RoundId,
    pub errors: u32,
    pub control_count: u32,
    pub quality: f64,
}
