//! Iterative task/player message passing (Karger, Oh and Shah), lifted to `L` labels by
//! running the binary algorithm once per label in one-vs-rest form.
//!
//! For label `l`, every answer becomes `+1` if it is `l` and `-1` otherwise. Player-to-task
//! messages start from a seeded `N(1, 1)` draw; each iteration computes
//!
//! ```text
//! x[i->j] = sum_{j' in d(i) \ j} A[i,j'] * y[j'->i]
//! y[j->i] = mean_{i' in d(j) \ i} A[i',j] * x[i'->j]
//! ```
//!
//! and the decision value of task `i` is `sum_{j in d(i)} A[i,j] * y[j->i]`. The label with
//! the largest decision value wins, ties to the lowest index.
//!
//! Player messages average over the player's other tasks instead of summing. On graphs where
//! every player has the same degree this is a constant rescaling and decisions are unchanged;
//! on long-tailed graphs a plain sum weights each player by how many tasks they answered, and a
//! single heavy player ends up overruling everyone else.
//!
//! Messages are rescaled to unit root-mean-square after every iteration; decisions are
//! invariant to that. A player who answered a single task gets no evidence from the rest of
//! the graph, so their message is pinned at the prior mean 1.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{argmax_lowest, BaselineError, ContributionLog};
use crate::model::TaskId;
use crate::seed;

pub const MP_DEFAULT_ITERS: usize = 20;

pub fn message_passing(
    log: &ContributionLog,
    num_iters: usize,
    rng_seed: u64,
) -> Result<BTreeMap<TaskId, String>, BaselineError> {
    if log.is_empty() {
        return Err(BaselineError::NoContributions);
    }
    if num_iters == 0 {
        return Err(BaselineError::BadParameter("num_iters must be at least 1"));
    }
    let answers = log.answers();
    let n_labels = log.labels().len();
    let n_tasks = log.tasks().len();
    let n_players = log.players().len();

    // Edges are the answers; group edge indices by task and by player.
    let mut by_task = vec![Vec::new(); n_tasks];
    let mut by_player = vec![Vec::new(); n_players];
    for (e, a) in answers.iter().enumerate() {
        by_task[a.task].push(e);
        by_player[a.player].push(e);
    }
    let pinned: Vec<bool> = answers
        .iter()
        .map(|a| by_player[a.player].len() == 1)
        .collect();

    let mut rng = seed::rng(rng_seed);
    let init: Vec<f64> = answers
        .iter()
        .map(|_| 1.0 + rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut per_label: Vec<Vec<f64>> = Vec::with_capacity(n_labels);
    let mut sign = vec![0.0; answers.len()];
    let mut x = vec![0.0; answers.len()];
    for label in 0..n_labels {
        for (s, a) in sign.iter_mut().zip(answers) {
            *s = if a.label == label { 1.0 } else { -1.0 };
        }
        let mut y: Vec<f64> = init
            .iter()
            .zip(&pinned)
            .map(|(&v, &p)| if p { 1.0 } else { v })
            .collect();

        for _ in 0..num_iters {
            for edges in &by_task {
                let total: f64 = edges.iter().map(|&e| sign[e] * y[e]).sum();
                for &e in edges {
                    x[e] = total - sign[e] * y[e];
                }
            }
            for edges in &by_player {
                if edges.len() == 1 {
                    continue;
                }
                let total: f64 = edges.iter().map(|&e| sign[e] * x[e]).sum();
                let others = (edges.len() - 1) as f64;
                for &e in edges {
                    y[e] = (total - sign[e] * x[e]) / others;
                }
            }
            let (sq, n) = y
                .iter()
                .zip(&pinned)
                .filter(|(_, &p)| !p)
                .fold((0.0, 0usize), |(sq, n), (v, _)| (sq + v * v, n + 1));
            if n > 0 && sq > 0.0 {
                let rms = (sq / n as f64).sqrt();
                for (v, &p) in y.iter_mut().zip(&pinned) {
                    if !p {
                        *v /= rms;
                    }
                }
            }
        }

        per_label.push(
            by_task
                .iter()
                .map(|edges| edges.iter().map(|&e| sign[e] * y[e]).sum())
                .collect(),
        );
    }

    let winners =
        (0..n_tasks).map(|t| argmax_lowest(&per_label.iter().map(|d| d[t]).collect::<Vec<_>>()));
    Ok(log.label_map(winners))
}
