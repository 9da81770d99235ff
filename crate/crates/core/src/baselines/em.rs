//! Dawid–Skene expectation maximization.
//!
//! Every player has an `L x L` confusion matrix `pi[true][answered]`; tasks have a latent
//! true label with class priors. Posteriors start from majority-vote soft counts, then
//! M-steps (priors and confusion matrices from posteriors, with additive smoothing) alternate
//! with E-steps (posteriors from priors and confusion matrices).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{argmax_lowest, BaselineError, ContributionLog};
use crate::model::{PlayerId, TaskId};

/// Pseudo-count added to every confusion-matrix and class-prior cell.
pub const EM_SMOOTHING: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iters: usize,
    /// Stop once the largest absolute posterior change falls below this.
    pub tol: f64,
    pub smoothing: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            smoothing: EM_SMOOTHING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmModel {
    pub class_priors: Vec<f64>,
    /// Row-stochastic: `confusion[player][true][answered]`.
    pub confusion: BTreeMap<PlayerId, Vec<Vec<f64>>>,
    pub posteriors: BTreeMap<TaskId, Vec<f64>>,
    /// Observed-data log-likelihood after each M-step.
    pub log_likelihood: Vec<f64>,
    /// Log-likelihood plus the log-density of the Dirichlet prior that the smoothing
    /// corresponds to. This is the quantity EM provably never decreases.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn dawid_skene_em(
    log: &ContributionLog,
    options: EmOptions,
) -> Result<(EmModel, BTreeMap<TaskId, String>), BaselineError> {
    if log.is_empty() {
        return Err(BaselineError::NoContributions);
    }
    if options.max_iters == 0 {
        return Err(BaselineError::BadParameter("max_iters must be at least 1"));
    }
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(BaselineError::BadParameter("tol must be positive"));
    }
    if options.smoothing.is_nan() || options.smoothing < 0.0 {
        return Err(BaselineError::BadParameter("smoothing must be nonnegative"));
    }

    let n_labels = log.labels().len();
    let n_tasks = log.tasks().len();
    let n_players = log.players().len();
    let answers = log.answers();
    let s = options.smoothing;

    let mut post: Vec<Vec<f64>> = log
        .vote_counts()
        .into_iter()
        .map(|row| {
            let total: u32 = row.iter().sum();
            if total == 0 {
                vec![1.0 / n_labels as f64; n_labels]
            } else {
                row.iter()
                    .map(|&c| f64::from(c) / f64::from(total))
                    .collect()
            }
        })
        .collect();

    let mut priors = vec![0.0; n_labels];
    let mut confusion = vec![vec![vec![0.0; n_labels]; n_labels]; n_players];
    let mut log_likelihood = Vec::new();
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iters {
        iterations += 1;

        // M-step.
        for (l, p) in priors.iter_mut().enumerate() {
            *p = post.iter().map(|row| row[l]).sum::<f64>() + s;
        }
        let norm: f64 = priors.iter().sum();
        priors.iter_mut().for_each(|p| *p /= norm);

        for m in confusion.iter_mut() {
            for row in m.iter_mut() {
                row.iter_mut().for_each(|c| *c = s);
            }
        }
        for a in answers {
            for (l, &w) in post[a.task].iter().enumerate() {
                confusion[a.player][l][a.label] += w;
            }
        }
        for m in confusion.iter_mut() {
            for row in m.iter_mut() {
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.iter_mut().for_each(|c| *c /= total);
                } else {
                    // No smoothing and no evidence for this true class.
                    row.iter_mut().for_each(|c| *c = 1.0 / n_labels as f64);
                }
            }
        }

        // E-step.
        let log_priors: Vec<f64> = priors.iter().map(|p| p.ln()).collect();
        let mut log_post = vec![log_priors; n_tasks];
        for a in answers {
            for (l, lp) in log_post[a.task].iter_mut().enumerate() {
                *lp += confusion[a.player][l][a.label].ln();
            }
        }
        let mut ll = 0.0;
        let mut delta: f64 = 0.0;
        for (row, old) in log_post.iter().zip(post.iter_mut()) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            ll += lse;
            for (l, v) in row.iter().enumerate() {
                let p = (v - lse).exp();
                delta = delta.max((p - old[l]).abs());
                old[l] = p;
            }
        }
        let log_prior_density: f64 = if s > 0.0 {
            s * (priors.iter().map(|p| p.ln()).sum::<f64>()
                + confusion
                    .iter()
                    .flatten()
                    .flatten()
                    .map(|c| c.ln())
                    .sum::<f64>())
        } else {
            0.0
        };
        log_likelihood.push(ll);
        objective.push(ll + log_prior_density);

        if delta < options.tol {
            converged = true;
            break;
        }
    }

    let labels = log.label_map(post.iter().map(|row| argmax_lowest(row)));
    let model = EmModel {
        class_priors: priors,
        confusion: log.players().iter().cloned().zip(confusion).collect(),
        posteriors: log.tasks().iter().cloned().zip(post).collect(),
        log_likelihood,
        objective,
        iterations,
        converged,
    };
    Ok((model, labels))
}
