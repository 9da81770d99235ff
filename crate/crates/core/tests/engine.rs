use std::collections::{BTreeMap, HashMap, HashSet};

use proptest::prelude::*;
use rand::Rng;
use truthinf::config::EngineConfig;
use truthinf::engine::{
    check_completion, compute_reliability, update_solution_estimate, EngineError, EngineState,
    RecordedAnswer,
};
use truthinf::metrics::{difficulty_of, difficulty_proxy};
use truthinf::model::{LabelSet, PlayerId, ScoreRow, TaskId};
use truthinf::seed;

fn ids(prefix: &str, n: usize) -> Vec<TaskId> {
    (0..n).map(|i| TaskId(format!("{prefix}{i:03}"))).collect()
}

fn fresh(n_tasks: usize, n_controls: usize, n_labels: usize) -> EngineState {
    let labels = LabelSet::numbered(n_labels).unwrap();
    let controls = ids("g", n_controls)
        .into_iter()
        .map(|id| (id, "v1".to_owned()));
    EngineState::new(labels, ids("t", n_tasks), controls).unwrap()
}

/// Plays random rounds with random answers, calling `inspect` after every submitted round.
fn random_play(
    state: &mut EngineState,
    config: &EngineConfig,
    n_players: usize,
    rounds: usize,
    seed: u64,
    mut inspect: impl FnMut(&EngineState, &truthinf::engine::RoundOutcome),
) {
    let mut rng = seed::rng(seed);
    let n_labels = state.labels().len();
    for r in 0..rounds {
        let player = PlayerId(format!("p{}", rng.random_range(0..n_players)));
        let assignment = match state.assign_round(&player, config, seed::derive(seed, &[r as u64]))
        {
            Ok(a) => a,
            Err(EngineError::PlayerExhausted(_)) => continue,
            Err(EngineError::PoolEmpty) => break,
            Err(e) => panic!("{e}"),
        };
        let answers: HashMap<TaskId, String> = assignment
            .tasks
            .iter()
            .map(|t| {
                // Mostly right on controls and biased towards v1 elsewhere, so tasks do finish.
                let l = if rng.random_bool(0.6) {
                    0
                } else {
                    rng.random_range(0..n_labels)
                };
                (t.clone(), format!("v{}", l + 1))
            })
            .collect();
        let outcome = state.submit_round(&assignment, &answers, config).unwrap();
        inspect(state, &outcome);
    }
}

fn scores(state: &EngineState, tasks: &[TaskId]) -> Vec<Vec<f64>> {
    tasks
        .iter()
        .map(|t| state.score_row(t).unwrap().scores.clone())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scores_never_decrease_without_decrement(seed in any::<u64>(), n_labels in 2usize..6, p in 2u32..5) {
        let config = EngineConfig::for_min_agreement(p);
        let mut state = fresh(30, 6, n_labels);
        let tasks = ids("t", 30);
        let mut before = scores(&state, &tasks);
        let mut ok = true;
        random_play(&mut state, &config, 15, 120, seed, |s, _| {
            let now = scores(s, &tasks);
            ok &= before.iter().flatten().zip(now.iter().flatten()).all(|(a, b)| b >= a);
            before = now;
        });
        prop_assert!(ok);
    }

    #[test]
    fn solved_label_is_the_top_score(seed in any::<u64>(), decrement in 0.0f64..0.5) {
        let config = EngineConfig { decrement, ..EngineConfig::default() };
        let mut state = fresh(30, 6, 4);
        let mut ok = true;
        random_play(&mut state, &config, 15, 150, seed, |s, outcome| {
            for (task, label) in &outcome.solved {
                let row = s.score_row(task).unwrap();
                let (idx, value, ties) = row.max().unwrap();
                ok &= ties == 1 && value > config.threshold && s.labels().label(idx) == label;
                ok &= s.results()[task] == *label;
            }
        });
        prop_assert!(ok);
    }

    #[test]
    fn players_never_see_a_task_twice(seed in any::<u64>()) {
        let config = EngineConfig::default();
        let mut state = fresh(25, 8, 3);
        random_play(&mut state, &config, 6, 200, seed, |_, _| {});
        let mut seen: HashMap<&PlayerId, HashSet<&TaskId>> = HashMap::new();
        for c in state.contributions() {
            prop_assert!(seen.entry(&c.player_id).or_default().insert(&c.task_id), "{c:?}");
        }
    }

    /// Lowering a quality can break an exact tie at the top score and so finish a task
    /// sooner. Qualities here are continuous, where such ties have probability zero.
    #[test]
    fn lowering_a_quality_never_speeds_up_completion(
        answers in prop::collection::vec((0usize..3, 0.01f64..1.0), 1..40),
        which in any::<prop::sample::Index>(),
        factor in 0.0f64..1.0,
    ) {
        let config = EngineConfig::default();
        let completion = |seq: &[(usize, f64)]| {
            let mut row = ScoreRow::zeros(TaskId::from("t"), 3);
            for (k, &(label, q)) in seq.iter().enumerate() {
                update_solution_estimate(&mut row, label, q, &config).unwrap();
                if check_completion(&row, &config).is_some() {
                    return k;
                }
            }
            usize::MAX
        };
        let mut lowered = answers.clone();
        let i = which.index(answers.len());
        lowered[i].1 *= factor;
        prop_assert!(completion(&lowered) >= completion(&answers));
    }

    /// Replaying a log round by round gives the same results as folding each task's own
    /// (quality, label) sequence through the update and completion rules.
    #[test]
    fn results_depend_only_on_per_task_sequences(seed in any::<u64>(), n_rounds in 1usize..60) {
        let config = EngineConfig::default();
        let labels = LabelSet::numbered(3).unwrap();
        let tasks = ids("t", 12);
        let mut rng = seed::rng(seed);
        let mut state = EngineState::new(labels.clone(), tasks.clone(), std::iter::empty()).unwrap();
        let mut per_task: BTreeMap<TaskId, Vec<(usize, f64)>> = BTreeMap::new();
        for r in 0..n_rounds {
            let errors = rng.random_range(0..=2u32);
            let mut answers: Vec<RecordedAnswer> = (0..2)
                .map(|i| RecordedAnswer {
                    task_id: TaskId(format!("g{r}-{i}")),
                    label: if i < errors { "v2" } else { "v1" }.into(),
                    control_truth: Some("v1".into()),
                })
                .collect();
            let q = compute_reliability(errors, 2, &config).unwrap();
            let mut picked: Vec<&TaskId> = tasks.iter().collect();
            picked.retain(|_| rng.random_bool(0.4));
            for t in picked {
                let label = rng.random_range(0..3);
                answers.push(RecordedAnswer { task_id: t.clone(), label: labels.label(label).into(), control_truth: None });
                per_task.entry(t.clone()).or_default().push((label, q));
            }
            state.replay_round(&PlayerId(format!("p{r}")), r as u64, &answers, &config).unwrap();
        }

        let mut expected = BTreeMap::new();
        for (task, seq) in &per_task {
            let mut row = ScoreRow::zeros(task.clone(), 3);
            for &(label, q) in seq {
                update_solution_estimate(&mut row, label, q, &config).unwrap();
                if let Some(w) = check_completion(&row, &config) {
                    expected.insert(task.clone(), labels.label(w).to_owned());
                    break;
                }
            }
        }
        prop_assert_eq!(state.results(), &expected);
    }

    #[test]
    fn serialized_assignment_hides_controls(seed in any::<u64>()) {
        let mut state = fresh(20, 5, 3);
        let a = state.assign_round(&PlayerId::from("p"), &EngineConfig::default(), seed).unwrap();
        let json: serde_json::Value = serde_json::to_value(&a).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        prop_assert_eq!(keys, ["player_id", "round_id", "tasks"]);
        prop_assert_eq!(json["tasks"].as_array().unwrap().len(), 8);
    }
}

#[test]
fn control_positions_are_uniform_over_the_round() {
    let config = EngineConfig::default();
    let mut by_slot = [0u32; 8];
    let trials = 4_000;
    for seed in 0..trials {
        let mut state = fresh(20, 5, 3);
        let a = state
            .assign_round(&PlayerId::from("p"), &config, seed)
            .unwrap();
        for (slot, t) in a.tasks.iter().enumerate() {
            if state.control_pool().contains(t) {
                by_slot[slot] += 1;
            }
        }
    }
    // Two controls in eight slots: each slot holds a control a quarter of the time.
    for count in by_slot {
        let share = f64::from(count) / trials as f64;
        assert!((share - 0.25).abs() < 0.03, "{by_slot:?}");
    }
}

/// Answers every task with its planted label.
fn perfect_sessions(
    n_players: usize,
    truth: &BTreeMap<TaskId, String>,
) -> impl Iterator<Item = (PlayerId, impl FnMut(u64, &TaskId) -> String + '_)> + '_ {
    (0..n_players).cycle().take(10_000).map(move |p| {
        (PlayerId(format!("p{p}")), move |_, t: &TaskId| {
            truth[t].clone()
        })
    })
}

#[test]
fn perfect_unanimous_players_spend_exactly_p_answers_per_task() {
    let labels = LabelSet::numbered(4).unwrap();
    let tasks = ids("t", 20);
    let mut truth: BTreeMap<TaskId, String> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), format!("v{}", i % 4 + 1)))
        .collect();
    let controls: Vec<(TaskId, String)> = ids("g", 4)
        .into_iter()
        .map(|g| (g, "v2".to_owned()))
        .collect();
    truth.extend(controls.iter().cloned());
    let mut state = EngineState::new(labels, tasks.clone(), controls).unwrap();
    let report = state
        .run_to_completion(perfect_sessions(10, &truth), &EngineConfig::default(), 1)
        .unwrap();
    assert_eq!(report.total_contributions, 60);
    assert!(report.contribution_counts.values().all(|&c| c == 3));
    for t in &tasks {
        assert_eq!(report.results[t], truth[t]);
        assert_eq!(difficulty_of(&report, t).unwrap().contributions, 3);
    }
}

#[test]
fn a_single_player_starves() {
    // Enough controls that the unsolved pool, not the control pool, runs out first.
    let mut state = fresh(20, 10, 3);
    let truth: BTreeMap<TaskId, String> = ids("t", 20)
        .into_iter()
        .chain(ids("g", 10))
        .map(|t| (t, "v1".to_owned()))
        .collect();
    match state.run_to_completion(perfect_sessions(1, &truth), &EngineConfig::default(), 2) {
        Err(EngineError::Starvation(report)) => {
            assert!(!report.is_complete());
            assert_eq!(report.total_contributions, 20);
            assert_eq!(report.unsolved.len(), 20);
            // Open tasks are still reported, flagged unsolved, with their count as is.
            let d = difficulty_proxy(&report);
            assert!(d.values().all(|d| !d.solved && d.contributions == 1));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_task_list_gives_an_empty_report() {
    let mut state = fresh(0, 3, 3);
    let truth = BTreeMap::new();
    let report = state
        .run_to_completion(perfect_sessions(2, &truth), &EngineConfig::default(), 3)
        .unwrap();
    assert!(report.results.is_empty() && report.is_complete());
    assert_eq!(report.total_contributions, 0);
}

fn round(task_label: &str) -> Vec<RecordedAnswer> {
    vec![
        RecordedAnswer {
            task_id: TaskId::from("g"),
            label: "v1".into(),
            control_truth: Some("v1".into()),
        },
        RecordedAnswer {
            task_id: TaskId::from("t"),
            label: task_label.into(),
            control_truth: None,
        },
    ]
}

#[test]
fn split_votes_take_more_than_p_answers() {
    let config = EngineConfig::default();
    let mut state =
        EngineState::new(LabelSet::numbered(3).unwrap(), [TaskId::from("t")], []).unwrap();
    for (r, label) in ["v1", "v2", "v1", "v2", "v1", "v1"].iter().enumerate() {
        state
            .replay_round(&PlayerId(format!("p{r}")), r as u64, &round(label), &config)
            .unwrap();
    }
    let report = state.report();
    assert_eq!(report.results[&TaskId::from("t")], "v1");
    let d = difficulty_of(&report, &TaskId::from("t")).unwrap();
    assert!(d.solved && d.contributions > config.min_agreement, "{d:?}");
    assert_eq!(d.contributions, 5);
    assert!(matches!(
        difficulty_of(&report, &TaskId::from("nope")),
        Err(truthinf::metrics::MetricsError::UnknownTask(_))
    ));
}
