//! Synthetic worlds: planted ground truth, player populations with spammers and long-tail
//! activity, and simulated play against the incremental engine.

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Beta, Distribution, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{BaselineError, ContributionLog};
use crate::config::EngineConfig;
use crate::engine::{AggregationReport, EngineError, EngineState};
use crate::model::{Contribution, LabelSet, PlayerId, TaskId};
use crate::seed;

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("players ran out before every task was solved ({} unsolved)", .0.unsolved.len())]
    Starvation(Box<AggregationReport>),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerProfile {
    pub player_id: PlayerId,
    pub base_accuracy: f64,
    pub is_spammer: bool,
    /// Per-round accuracy jitter is drawn uniformly from `[-attention_drift, attention_drift]`.
    pub attention_drift: f64,
    pub rounds_to_play: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub task_id: TaskId,
    pub true_label: String,
    /// In `[0, 1)`. Lowers honest accuracy and steers errors to `confusion_target`.
    pub confusability: f64,
    pub confusion_target: String,
}

/// Parameters of [`generate_world`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub n_tasks: usize,
    /// Ground-truth tasks available as controls from the start.
    pub n_controls: usize,
    pub n_labels: usize,
    pub n_players: usize,
    pub spammer_fraction: f64,
    /// Honest players' base accuracy.
    pub accuracy: BetaParams,
    /// Task confusability.
    pub difficulty: BetaParams,
    /// Accuracy lost per unit of confusability.
    pub confusability_penalty: f64,
    /// Players' attention drift is uniform in `[0, max_attention_drift]`.
    pub max_attention_drift: f64,
    /// Exponent of the discrete power law of session lengths.
    pub session_exponent: f64,
    /// True-label distribution; uniform when absent.
    pub label_priors: Option<Vec<f64>>,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            n_tasks: 1_000,
            n_controls: 50,
            n_labels: 6,
            n_players: 200,
            spammer_fraction: 0.15,
            accuracy: BetaParams {
                alpha: 8.0,
                beta: 2.0,
            },
            difficulty: BetaParams {
                alpha: 1.0,
                beta: 9.0,
            },
            confusability_penalty: 1.0,
            max_attention_drift: 0.1,
            session_exponent: 2.0,
            label_priors: None,
        }
    }
}

const MAX_CONFUSABILITY: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub labels: LabelSet,
    pub tasks: Vec<TaskProfile>,
    pub controls: Vec<TaskProfile>,
    pub players: Vec<PlayerProfile>,
    pub confusability_penalty: f64,
}

fn bad(msg: impl Into<String>) -> SimulatorError {
    SimulatorError::BadParameters(msg.into())
}

fn padded(prefix: char, i: usize, n: usize) -> String {
    let width = n.max(1).to_string().len();
    format!("{prefix}{i:0width$}")
}

pub fn generate_world(params: &WorldParams, seed: u64) -> Result<World, SimulatorError> {
    if params.n_tasks == 0 || params.n_players == 0 {
        return Err(bad("n_tasks and n_players must be at least 1"));
    }
    if params.n_controls == 0 {
        return Err(bad("n_controls must be at least 1"));
    }
    if !(0.0..1.0).contains(&params.spammer_fraction) {
        return Err(bad(format!(
            "spammer_fraction must be in [0, 1), got {}",
            params.spammer_fraction
        )));
    }
    if !(0.0..=1.0).contains(&params.max_attention_drift) {
        return Err(bad("max_attention_drift must be in [0, 1]"));
    }
    if params.confusability_penalty.is_nan() || params.confusability_penalty < 0.0 {
        return Err(bad("confusability_penalty must be nonnegative"));
    }
    let labels = LabelSet::numbered(params.n_labels).map_err(|e| bad(e.to_string()))?;
    let accuracy = Beta::new(params.accuracy.alpha, params.accuracy.beta)
        .map_err(|e| bad(format!("accuracy distribution: {e}")))?;
    let difficulty = Beta::new(params.difficulty.alpha, params.difficulty.beta)
        .map_err(|e| bad(format!("difficulty distribution: {e}")))?;
    let sessions = Zipf::new(params.n_tasks.max(1) as f64, params.session_exponent)
        .map_err(|e| bad(format!("session distribution: {e}")))?;
    let priors = match &params.label_priors {
        Some(p) if p.len() != params.n_labels => {
            return Err(bad("label_priors must have one weight per label"));
        }
        Some(p) => Some(WeightedIndex::new(p).map_err(|e| bad(format!("label_priors: {e}")))?),
        None => None,
    };

    let mut rng = seed::rng(seed);
    let n_labels = labels.len();
    let make_task = |id: String, rng: &mut rand_chacha::ChaCha8Rng| {
        let truth = match &priors {
            Some(w) => w.sample(rng),
            None => rng.random_range(0..n_labels),
        };
        let confusability = difficulty.sample(rng).min(MAX_CONFUSABILITY);
        let k = rng.random_range(0..n_labels - 1);
        let target = if k >= truth { k + 1 } else { k };
        TaskProfile {
            task_id: TaskId(id),
            true_label: labels.label(truth).to_owned(),
            confusability,
            confusion_target: labels.label(target).to_owned(),
        }
    };
    let tasks: Vec<TaskProfile> = (0..params.n_tasks)
        .map(|i| make_task(padded('t', i, params.n_tasks), &mut rng))
        .collect();
    let controls: Vec<TaskProfile> = (0..params.n_controls)
        .map(|i| make_task(padded('g', i, params.n_controls), &mut rng))
        .collect();

    let n_spammers = (params.spammer_fraction * params.n_players as f64).round() as usize;
    let mut spammer = vec![false; params.n_players];
    for i in index::sample(&mut rng, params.n_players, n_spammers) {
        spammer[i] = true;
    }
    let players = (0..params.n_players)
        .map(|i| PlayerProfile {
            player_id: PlayerId(padded('p', i, params.n_players)),
            base_accuracy: accuracy.sample(&mut rng),
            is_spammer: spammer[i],
            attention_drift: rng.random_range(0.0..=params.max_attention_drift),
            rounds_to_play: sessions.sample(&mut rng) as u32,
        })
        .collect();

    Ok(World {
        labels,
        tasks,
        controls,
        players,
        confusability_penalty: params.confusability_penalty,
    })
}

impl World {
    /// The label `player` gives to `task` in round `round_index`; deterministic per
    /// `(player, task, round_index, seed)`.
    ///
    /// Spammers answer uniformly at random. Honest players answer correctly with probability
    /// `base_accuracy - confusability * penalty + jitter` (clamped to `[0, 1]`, jitter fixed per
    /// player and round); a wrong answer is the task's confusion target with probability
    /// `confusability`, otherwise uniform over the other wrong labels and the target.
    pub fn answer(
        &self,
        player: &PlayerProfile,
        task: &TaskProfile,
        round_index: u64,
        seed: u64,
    ) -> String {
        let n = self.labels.len();
        let player_key = seed::hash_str(player.player_id.as_str());
        let mut rng = seed::rng(seed::derive(
            seed,
            &[
                player_key,
                seed::hash_str(task.task_id.as_str()),
                round_index,
            ],
        ));
        if player.is_spammer {
            return self.labels.label(rng.random_range(0..n)).to_owned();
        }
        let jitter = if player.attention_drift > 0.0 {
            let mut round_rng = seed::rng(seed::derive(seed, &[player_key, round_index, 0xD21F7]));
            round_rng.random_range(-player.attention_drift..=player.attention_drift)
        } else {
            0.0
        };
        let accuracy = (player.base_accuracy - task.confusability * self.confusability_penalty
            + jitter)
            .clamp(0.0, 1.0);
        if rng.random::<f64>() < accuracy {
            return task.true_label.clone();
        }
        if rng.random::<f64>() < task.confusability {
            return task.confusion_target.clone();
        }
        let truth = self
            .labels
            .index_of(&task.true_label)
            .expect("planted label is in the label set");
        let k = rng.random_range(0..n - 1);
        self.labels
            .label(if k >= truth { k + 1 } else { k })
            .to_owned()
    }

    pub fn truth(&self) -> BTreeMap<TaskId, String> {
        self.tasks
            .iter()
            .map(|t| (t.task_id.clone(), t.true_label.clone()))
            .collect()
    }

    pub fn engine_state(&self) -> Result<EngineState, EngineError> {
        EngineState::new(
            self.labels.clone(),
            self.tasks.iter().map(|t| t.task_id.clone()),
            self.controls
                .iter()
                .map(|t| (t.task_id.clone(), t.true_label.clone())),
        )
    }
}

/// Output of one simulated run.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// Every answer, control answers included, in processing order.
    pub contributions: Vec<Contribution>,
    pub report: AggregationReport,
    pub labels: LabelSet,
}

impl Experiment {
    /// Non-control contributions, ready for the ex-post baselines.
    pub fn log(&self) -> Result<ContributionLog, BaselineError> {
        ContributionLog::new(self.labels.clone(), self.contributions.iter().cloned())
    }
}

/// Plays `world` against the incremental engine until every task is solved.
///
/// Each player's sessions last `rounds_to_play` rounds; all sessions are interleaved in a
/// seeded random order. While tasks remain, players come back for further sessions of the same
/// lengths, so activity stays long-tailed. The run starves once a full pass over the
/// population produces no round, which happens when every player has seen every remaining
/// task.
pub fn run_experiment(
    world: &World,
    config: &EngineConfig,
    seed: u64,
) -> Result<Experiment, SimulatorError> {
    config.validate().map_err(EngineError::from)?;
    let mut state = world.engine_state()?;
    let profiles: HashMap<&TaskId, &TaskProfile> = world
        .tasks
        .iter()
        .chain(&world.controls)
        .map(|t| (&t.task_id, t))
        .collect();
    let profiles = &profiles;
    let answer_seed = seed::derive(seed, &[0xA5]);

    let mut sessions: Vec<usize> = world
        .players
        .iter()
        .enumerate()
        .flat_map(|(i, p)| std::iter::repeat_n(i, p.rounds_to_play as usize))
        .collect();
    let mut pass = 0u64;
    let report = loop {
        let mut order_rng = seed::rng(seed::derive(seed, &[0x0D, pass]));
        sessions.shuffle(&mut order_rng);
        let before = state.reliability_log().len();
        let stream = sessions.iter().map(|&i| {
            let player = &world.players[i];
            let answer = move |round, task: &TaskId| {
                world.answer(player, profiles[task], round, answer_seed)
            };
            (player.player_id.clone(), answer)
        });
        match state.run_to_completion(stream, config, seed::derive(seed, &[0xE9, pass])) {
            Ok(report) => break report,
            Err(EngineError::Starvation(report)) => {
                if state.reliability_log().len() == before {
                    return Err(SimulatorError::Starvation(report));
                }
            }
            Err(e) => return Err(e.into()),
        }
        pass += 1;
    };

    Ok(Experiment {
        contributions: state.contributions().to_vec(),
        report,
        labels: world.labels.clone(),
    })
}

/// Shape of a planted-confusion log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedParams {
    pub n_tasks: usize,
    pub n_players: usize,
    pub n_labels: usize,
    /// Diagonal of every player's confusion matrix.
    pub accuracy: f64,
    /// Distinct players per task; `None` means every player answers every task.
    pub answers_per_task: Option<usize>,
    /// The first `n_spammers` players answer uniformly at random instead.
    pub n_spammers: usize,
}

/// A contribution log whose generating confusion matrices are known exactly.
#[derive(Debug, Clone)]
pub struct PlantedLog {
    pub labels: LabelSet,
    pub truth: BTreeMap<TaskId, String>,
    pub contributions: Vec<Contribution>,
}

impl PlantedLog {
    pub fn log(&self) -> Result<ContributionLog, BaselineError> {
        ContributionLog::new(self.labels.clone(), self.contributions.iter().cloned())
    }
}

/// Generates answers from players who all share the confusion matrix with `accuracy` on the
/// diagonal and the remaining mass spread evenly over the wrong labels.
///
/// Errors are planted by quota rather than by independent coin flips: of the tasks a player
/// answered with true class `c`, exactly `round((1 - accuracy) * n)` are wrong, chosen at
/// random, and wrong answers are drawn uniformly. The empirical diagonal then matches the
/// planted one up to rounding, so recovery can be checked without sampling noise.
pub fn planted_confusion_log(
    params: &PlantedParams,
    seed: u64,
) -> Result<PlantedLog, SimulatorError> {
    let &PlantedParams {
        n_tasks,
        n_players,
        n_labels,
        accuracy,
        answers_per_task,
        n_spammers,
    } = params;
    if n_tasks == 0 || n_players == 0 {
        return Err(bad("n_tasks and n_players must be positive"));
    }
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(bad("accuracy must lie in [0, 1]"));
    }
    let per_task = answers_per_task.unwrap_or(n_players);
    if per_task == 0 || per_task > n_players {
        return Err(bad("answers_per_task must lie in 1..=n_players"));
    }
    if n_spammers > n_players {
        return Err(bad("n_spammers cannot exceed n_players"));
    }
    let labels = LabelSet::numbered(n_labels).map_err(|e| bad(e.to_string()))?;
    let mut rng = seed::rng(seed);

    let truth: Vec<usize> = (0..n_tasks)
        .map(|_| rng.random_range(0..n_labels))
        .collect();
    let mut answered_by = vec![Vec::new(); n_players];
    for t in 0..n_tasks {
        for p in index::sample(&mut rng, n_players, per_task) {
            answered_by[p].push(t);
        }
    }

    let task_ids: Vec<TaskId> = (0..n_tasks)
        .map(|i| TaskId(padded('t', i, n_tasks)))
        .collect();
    let mut contributions = Vec::with_capacity(n_tasks * per_task);
    for (p, tasks) in answered_by.iter().enumerate() {
        let player_id = PlayerId(padded('p', p, n_players));
        let mut wrong = vec![false; n_tasks];
        for class in 0..n_labels {
            let mut of_class: Vec<usize> = tasks
                .iter()
                .copied()
                .filter(|&t| truth[t] == class)
                .collect();
            of_class.shuffle(&mut rng);
            let quota = ((1.0 - accuracy) * of_class.len() as f64).round() as usize;
            for &t in &of_class[..quota] {
                wrong[t] = true;
            }
        }
        for &t in tasks {
            let label = if p < n_spammers {
                rng.random_range(0..n_labels)
            } else if wrong[t] {
                let k = rng.random_range(0..n_labels - 1);
                if k >= truth[t] {
                    k + 1
                } else {
                    k
                }
            } else {
                truth[t]
            };
            contributions.push(Contribution {
                round_id: p as u64,
                player_id: player_id.clone(),
                task_id: task_ids[t].clone(),
                label: labels.label(label).to_owned(),
                is_control: false,
                true_label: None,
            });
        }
    }

    let truth = task_ids
        .into_iter()
        .zip(&truth)
        .map(|(id, &l)| (id, labels.label(l).to_owned()))
        .collect();
    Ok(PlantedLog {
        labels,
        truth,
        contributions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> WorldParams {
        WorldParams {
            n_tasks: 40,
            n_controls: 10,
            n_players: 100,
            ..WorldParams::default()
        }
    }

    #[test]
    fn spammer_count_is_exact() {
        let p = WorldParams {
            spammer_fraction: 0.42,
            ..params()
        };
        let world = generate_world(&p, 7).unwrap();
        assert_eq!(world.players.iter().filter(|p| p.is_spammer).count(), 42);
        let honest = WorldParams {
            spammer_fraction: 0.0,
            ..params()
        };
        assert!(generate_world(&honest, 7)
            .unwrap()
            .players
            .iter()
            .all(|p| !p.is_spammer));
    }

    #[test]
    fn worlds_are_deterministic() {
        assert_eq!(
            generate_world(&params(), 3).unwrap(),
            generate_world(&params(), 3).unwrap()
        );
        assert_ne!(
            generate_world(&params(), 3).unwrap(),
            generate_world(&params(), 4).unwrap()
        );
    }

    #[test]
    fn profiles_respect_invariants() {
        let world = generate_world(&params(), 11).unwrap();
        for t in world.tasks.iter().chain(&world.controls) {
            assert_ne!(t.true_label, t.confusion_target);
            assert!((0.0..1.0).contains(&t.confusability));
        }
        for p in &world.players {
            assert!(p.rounds_to_play >= 1 && p.rounds_to_play as usize <= 40);
            assert!((0.0..=1.0).contains(&p.base_accuracy));
        }
    }

    #[test]
    fn bad_parameters() {
        for p in [
            WorldParams {
                spammer_fraction: 1.0,
                ..params()
            },
            WorldParams {
                n_tasks: 0,
                ..params()
            },
            WorldParams {
                n_players: 0,
                ..params()
            },
            WorldParams {
                n_labels: 1,
                ..params()
            },
            WorldParams {
                label_priors: Some(vec![1.0]),
                ..params()
            },
        ] {
            assert!(
                matches!(generate_world(&p, 0), Err(SimulatorError::BadParameters(_))),
                "{p:?}"
            );
        }
    }

    #[test]
    fn label_priors_are_used() {
        let p = WorldParams {
            n_tasks: 500,
            label_priors: Some(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ..params()
        };
        let world = generate_world(&p, 1).unwrap();
        assert!(world.tasks.iter().all(|t| t.true_label == "v1"));
    }
}
