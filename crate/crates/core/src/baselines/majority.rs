use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::{BaselineError, ContributionLog};
use crate::model::TaskId;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityVote {
    pub labels: BTreeMap<TaskId, String>,
    /// Tasks whose modal label was tied and picked at random.
    pub ties: BTreeSet<TaskId>,
}

/// Per task, the most frequent label. Ties are broken uniformly at random, keyed by
/// `tie_seed` and the task id.
pub fn majority_vote(log: &ContributionLog, tie_seed: u64) -> Result<MajorityVote, BaselineError> {
    let counts = log.vote_counts();
    let mut labels = BTreeMap::new();
    let mut ties = BTreeSet::new();
    for (task, row) in log.tasks().iter().zip(&counts) {
        let top = *row.iter().max().unwrap_or(&0);
        if top == 0 {
            return Err(BaselineError::EmptyTask(task.clone()));
        }
        let modal: Vec<usize> = (0..row.len()).filter(|&l| row[l] == top).collect();
        let pick = if modal.len() == 1 {
            modal[0]
        } else {
            ties.insert(task.clone());
            let mut rng = seed::rng(seed::derive(tie_seed, &[seed::hash_str(task.as_str())]));
            *modal.choose(&mut rng).expect("at least two modal labels")
        };
        labels.insert(task.clone(), log.labels().label(pick).to_owned());
    }
    Ok(MajorityVote { labels, ties })
}
