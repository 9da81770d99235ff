//! Drives the engine by hand: assign a round, answer it, submit it, repeat.
//!
//! Three players label four pictures as cat or dog. Two known pictures serve as controls;
//! every player gets one of them per round without being told which.

use std::collections::{BTreeMap, HashMap};

use truthinf::config::EngineConfig;
use truthinf::engine::{EngineError, EngineState};
use truthinf::model::{LabelSet, PlayerId, TaskId};

fn main() -> Result<(), EngineError> {
    let labels = LabelSet::new(["cat", "dog"]).expect("two distinct labels");
    let truth: BTreeMap<TaskId, &str> = [
        ("img-1", "cat"),
        ("img-2", "dog"),
        ("img-3", "dog"),
        ("img-4", "cat"),
        ("known-1", "cat"),
        ("known-2", "dog"),
    ]
    .into_iter()
    .map(|(t, l)| (TaskId::from(t), l))
    .collect();

    let mut state = EngineState::new(
        labels,
        ["img-1", "img-2", "img-3", "img-4"].map(TaskId::from),
        [("known-1", "cat"), ("known-2", "dog")].map(|(t, l)| (TaskId::from(t), l.to_owned())),
    )?;
    let config = EngineConfig {
        control_tasks_per_round: 1,
        tasks_per_round: 4,
        ..EngineConfig::default()
    };

    let players = ["ana", "ben", "chloe", "dev"].map(PlayerId::from);
    for (round, player) in players.iter().enumerate() {
        let assignment = match state.assign_round(player, &config, round as u64) {
            Ok(a) => a,
            Err(EngineError::PoolEmpty) => break,
            Err(e) => return Err(e),
        };
        println!(
            "{player} sees {:?}",
            assignment
                .tasks
                .iter()
                .map(TaskId::as_str)
                .collect::<Vec<_>>()
        );

        // Ben mislabels everything; the others answer correctly.
        let answers: HashMap<TaskId, String> = assignment
            .tasks
            .iter()
            .map(|t| {
                let right = truth[t];
                let given = if player.as_str() == "ben" {
                    if right == "cat" {
                        "dog"
                    } else {
                        "cat"
                    }
                } else {
                    right
                };
                (t.clone(), given.to_owned())
            })
            .collect();
        let outcome = state.submit_round(&assignment, &answers, &config)?;
        println!(
            "  quality {:.3}, solved {:?}",
            outcome.reliability.quality, outcome.solved
        );
    }

    let report = state.report();
    println!("results: {:?}", report.results);
    println!("still open: {:?}", report.unsolved);
    Ok(())
}
