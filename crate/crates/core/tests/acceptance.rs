//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use truthinf::baselines::{
    dawid_skene_em, majority_vote, message_passing, EmOptions, MP_DEFAULT_ITERS,
};
use truthinf::config::EngineConfig;
use truthinf::engine::{update_solution_estimate, EngineState, RecordedAnswer};
use truthinf::metrics::{
    adjusted_rand_index, agreement_report, cohen_kappa, redundancy_saving, spearman,
    theoretical_redundancy,
};
use truthinf::model::{LabelSet, PlayerId, ScoreRow, TaskId};
use truthinf::seed;
use truthinf::simulator::{
    generate_world, planted_confusion_log, run_experiment, Experiment, PlantedParams, World,
    WorldParams,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Closed form of the theoretical redundancy, written out independently of the library.
fn redundancy_oracle(n: u64, l: u64, p: u64) -> u64 {
    let per_task = (p - 1) * l + 1;
    n * per_task
}

fn criterion_1() -> Outcome {
    let large = theoretical_redundancy(27_700, 6, 4).map_err(|e| e.to_string())?;
    let small = theoretical_redundancy(1_000, 5, 3).map_err(|e| e.to_string())?;
    let rel = (large as f64 - 525_000.0).abs() / 525_000.0;
    check(
        large == 526_300
            && large == redundancy_oracle(27_700, 6, 4)
            && small == 11_000
            && small == redundancy_oracle(1_000, 5, 3)
            && rel <= 0.003,
        format!(
            "r(27700,6,4) = {large} ({:.2}% from 525,000), r(1000,5,3) = {small}",
            100.0 * rel
        ),
    )
}

/// A world where every player always answers correctly.
fn perfect_world(n_tasks: usize, n_labels: usize, n_players: usize, seed: u64) -> World {
    let params = WorldParams {
        n_tasks,
        n_labels,
        n_players,
        n_controls: 20,
        spammer_fraction: 0.0,
        ..WorldParams::default()
    };
    let mut world = generate_world(&params, seed).expect("valid parameters");
    for p in &mut world.players {
        p.base_accuracy = 1.0;
        p.attention_drift = 0.0;
    }
    for t in world.tasks.iter_mut().chain(&mut world.controls) {
        t.confusability = 0.0;
    }
    world
}

fn criterion_2a() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (l, p, expected) in [(5u64, 3u32, 72.7), (6, 4, 78.9)] {
        let n = 1_000u64;
        let world = perfect_world(n as usize, l as usize, 60, 11);
        let exp = run_experiment(&world, &EngineConfig::for_min_agreement(p), 11)
            .map_err(|e| e.to_string())?;
        let actual = exp.report.total_contributions;
        let saving = -redundancy_saving(actual, redundancy_oracle(n, l, u64::from(p)))
            .map_err(|e| e.to_string())?;
        let closed_form = 100.0 * (1.0 - f64::from(p) / ((f64::from(p) - 1.0) * l as f64 + 1.0));
        ok &= actual == n * u64::from(p)
            && (saving - closed_form).abs() < 1e-9
            && (saving * 10.0).round() / 10.0 == expected;
        details.push(format!(
            "L={l} p={p}: {actual} contributions, saving {saving:.1}%"
        ));
    }
    check(ok, details.join("; "))
}

fn desk_world_params(n_tasks: usize) -> WorldParams {
    WorldParams {
        n_tasks,
        n_labels: 6,
        n_players: 200,
        spammer_fraction: 0.15,
        ..WorldParams::default()
    }
}

const DESK_SEEDS: u64 = 10;

fn desk_runs() -> Result<Vec<Experiment>, String> {
    (0..DESK_SEEDS)
        .map(|seed| {
            let world =
                generate_world(&desk_world_params(1_000), seed).map_err(|e| e.to_string())?;
            run_experiment(&world, &EngineConfig::for_min_agreement(4), seed)
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn criterion_2b(runs: &[Experiment]) -> Outcome {
    let savings: Vec<f64> = runs
        .iter()
        .map(|r| {
            -redundancy_saving(r.report.total_contributions, redundancy_oracle(1_000, 6, 4))
                .unwrap()
        })
        .collect();
    let ok = savings.iter().all(|s| (35.0..=70.0).contains(s));
    let min = savings.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = savings.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    check(
        ok,
        format!("savings over {DESK_SEEDS} seeds in [{min:.1}%, {max:.1}%], band [35%, 70%]"),
    )
}

fn criterion_3(runs: &[Experiment]) -> Outcome {
    let mut passing = BTreeMap::from([("em", 0), ("mp", 0)]);
    let mut worst = BTreeMap::from([("em", (1.0f64, 1.0f64, 1.0f64)), ("mp", (1.0, 1.0, 1.0))]);
    for (seed, run) in runs.iter().enumerate() {
        let log = run.log().map_err(|e| e.to_string())?;
        let (_, em) = dawid_skene_em(&log, EmOptions::default()).map_err(|e| e.to_string())?;
        let mp = message_passing(&log, MP_DEFAULT_ITERS, seed as u64).map_err(|e| e.to_string())?;
        for (name, labels) in [("em", em), ("mp", mp)] {
            let r = agreement_report(&run.report.results, &labels, &run.labels)
                .map_err(|e| e.to_string())?;
            if r.accuracy >= 0.95 && r.kappa >= 0.90 && r.adjusted_rand >= 0.85 {
                *passing.get_mut(name).unwrap() += 1;
            }
            let w = worst.get_mut(name).unwrap();
            *w = (
                w.0.min(r.accuracy),
                w.1.min(r.kappa),
                w.2.min(r.adjusted_rand),
            );
        }
    }
    let ok = passing.values().all(|&n| n >= 8);
    let detail = ["em", "mp"]
        .iter()
        .map(|n| {
            let (a, k, r) = worst[n];
            format!(
                "{n}: {}/{DESK_SEEDS} seeds pass (worst agreement {:.1}%, kappa {:.3}, ARI {:.3})",
                passing[n],
                100.0 * a,
                k,
                r
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    check(ok, detail)
}

fn criterion_4() -> Outcome {
    let mut rng = seed::rng(404);
    let mut failures = Vec::new();
    for instance in 0..100u64 {
        let n_tasks = rng.random_range(1..=50);
        let n_labels = rng.random_range(2..=6);
        let p = rng.random_range(2..=5);
        let world = perfect_world(n_tasks, n_labels, 12, instance);
        let exp = run_experiment(&world, &EngineConfig::for_min_agreement(p), instance)
            .map_err(|e| e.to_string())?;
        let mv = majority_vote(&exp.log().map_err(|e| e.to_string())?, instance)
            .map_err(|e| e.to_string())?;
        let truth = world.truth();
        if exp.report.results != truth || mv.labels != truth || !mv.ties.is_empty() {
            failures.push(instance);
        }
    }
    check(
        failures.is_empty(),
        format!("100 unanimous instances (N <= 50), mismatches: {failures:?}"),
    )
}

fn criterion_5() -> Outcome {
    let params = PlantedParams {
        n_tasks: 500,
        n_players: 30,
        n_labels: 5,
        accuracy: 0.9,
        answers_per_task: None,
        n_spammers: 0,
    };
    let mut worst_err: f64 = 0.0;
    let mut worst_step = f64::INFINITY;
    for s in 0..5 {
        let planted = planted_confusion_log(&params, s).map_err(|e| e.to_string())?;
        let (model, _) = dawid_skene_em(
            &planted.log().map_err(|e| e.to_string())?,
            EmOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        for m in model.confusion.values() {
            for (i, row) in m.iter().enumerate() {
                worst_err = worst_err.max((row[i] - 0.9).abs());
            }
        }
        for w in model.log_likelihood.windows(2) {
            worst_step = worst_step.min(w[1] - w[0]);
        }
    }
    check(
        worst_err <= 0.05 && worst_step >= 0.0,
        format!("5 seeds: max |diag - 0.9| = {worst_err:.4}, smallest log-likelihood step = {worst_step:.3e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = seed::rng(606);
    let n = 10_000;
    let l = 4;
    let labels = LabelSet::numbered(l).unwrap();
    let random_labeling = |rng: &mut rand_chacha::ChaCha8Rng| -> BTreeMap<TaskId, String> {
        (0..n)
            .map(|i| {
                (
                    TaskId(format!("t{i}")),
                    labels.label(rng.random_range(0..l)).to_owned(),
                )
            })
            .collect()
    };
    let a = random_labeling(&mut rng);
    let same = agreement_report(&a, &a, &labels).map_err(|e| e.to_string())?;
    let mut ok = same.kappa == 1.0 && same.adjusted_rand == 1.0 && same.accuracy == 1.0;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let a = random_labeling(&mut rng);
        let b = random_labeling(&mut rng);
        let r = agreement_report(&a, &b, &labels).map_err(|e| e.to_string())?;
        worst = worst.max(r.kappa.abs()).max(r.adjusted_rand.abs());
        // The report and the bare matrix functions must agree.
        ok &= r.kappa == cohen_kappa(&r.confusion)
            && r.adjusted_rand == adjusted_rand_index(&r.confusion);
    }
    ok &= worst <= 0.03;
    check(
        ok,
        format!(
            "identity: kappa {} ARI {}; 10 random pairs of 10,000 labels: max |stat| = {worst:.4}",
            same.kappa, same.adjusted_rand
        ),
    )
}

/// Replays `rounds` rounds of one task answered `v1`, each round carrying `control_errors`
/// wrong answers out of two controls, and returns the score after each round and the round
/// that solved the task.
fn unanimous_trace(rounds: usize, control_errors: usize) -> (Vec<f64>, Option<usize>, u32) {
    let labels = LabelSet::numbered(3).unwrap();
    let config = EngineConfig::default();
    let controls = [("g0", "v1"), ("g1", "v1")];
    let mut state = EngineState::new(
        labels,
        [TaskId::from("t")],
        controls
            .iter()
            .map(|(t, l)| (TaskId::from(*t), (*l).to_owned())),
    )
    .unwrap();
    let mut scores = Vec::new();
    let mut solved_at = None;
    for r in 0..rounds {
        let mut answers: Vec<RecordedAnswer> = controls
            .iter()
            .enumerate()
            .map(|(i, (t, truth))| RecordedAnswer {
                task_id: TaskId::from(*t),
                label: if i < control_errors { "v2" } else { "v1" }.to_owned(),
                control_truth: Some((*truth).to_owned()),
            })
            .collect();
        answers.push(RecordedAnswer {
            task_id: TaskId::from("t"),
            label: "v1".into(),
            control_truth: None,
        });
        let outcome = state
            .replay_round(&PlayerId(format!("p{r}")), r as u64, &answers, &config)
            .unwrap();
        scores.push(state.score_row(&TaskId::from("t")).unwrap().scores[0]);
        if !outcome.solved.is_empty() && solved_at.is_none() {
            solved_at = Some(r + 1);
        }
    }
    let count = state.task(&TaskId::from("t")).unwrap().contribution_count;
    (scores, solved_at, count)
}

fn criterion_7() -> Outcome {
    let (scores, solved_at, count) = unanimous_trace(3, 0);
    let a = solved_at == Some(3)
        && count == 3
        && scores
            .iter()
            .enumerate()
            .all(|(k, s)| (s - (k + 1) as f64).abs() <= 1e-9);

    // exp(-1.4) from its power series, independent of the library's exponential.
    let q = (0..60)
        .fold((0.0, 1.0), |(sum, term), k| {
            (sum + term, term * -1.4 / f64::from(k + 1))
        })
        .0;
    let (scores, solved_at, count) = unanimous_trace(11, 2);
    let b = solved_at == Some(11)
        && count == 11
        && scores
            .iter()
            .enumerate()
            .all(|(k, s)| (s - (k + 1) as f64 * q).abs() <= 1e-9);

    let mut row = ScoreRow {
        task_id: TaskId::from("t"),
        scores: vec![0.8, 0.3, 0.0],
    };
    let config = EngineConfig {
        decrement: 0.5,
        ..EngineConfig::default()
    };
    update_solution_estimate(&mut row, 0, 0.5, &config).map_err(|e| e.to_string())?;
    let expected = [1.3, 0.05, 0.0];
    let c = row
        .scores
        .iter()
        .zip(expected)
        .all(|(s, e)| (s - e).abs() <= 1e-9);
    check(
        a && b && c,
        format!(
            "unanimous p=3 solve: {a}; q={q:.4} needs 11 rounds: {b}; decrement clamp -> {:?}: {c}",
            row.scores
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rhos = Vec::new();
    for seed in 0..10 {
        let world = generate_world(&desk_world_params(500), seed).map_err(|e| e.to_string())?;
        let exp = run_experiment(&world, &EngineConfig::for_min_agreement(4), seed)
            .map_err(|e| e.to_string())?;
        let confusability: Vec<f64> = world.tasks.iter().map(|t| t.confusability).collect();
        let counts: Vec<f64> = world
            .tasks
            .iter()
            .map(|t| f64::from(exp.report.contribution_counts[&t.task_id]))
            .collect();
        rhos.push(spearman(&confusability, &counts).ok_or("constant input")?);
    }
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    let min = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        mean > 0.3 && min > 0.0,
        format!("N=500, 10 seeds: mean Spearman {mean:.3} (min {min:.3})"),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let runs = desk_runs();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 theoretical redundancy", criterion_1()),
        ("2a perfect-world savings", criterion_2a()),
        (
            "2b noisy-world savings",
            runs.as_ref()
                .map_err(Clone::clone)
                .and_then(|r| criterion_2b(r)),
        ),
        (
            "3 baseline agreement",
            runs.as_ref()
                .map_err(Clone::clone)
                .and_then(|r| criterion_3(r)),
        ),
        ("4 unanimity oracle", criterion_4()),
        ("5 EM recovery", criterion_5()),
        ("6 metric identities", criterion_6()),
        ("7 hand-traced engine", criterion_7()),
        ("8 difficulty proxy", criterion_8()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
