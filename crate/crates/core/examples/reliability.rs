//! Reliability, score updates and completion on a single task, step by step.

use truthinf::config::{EngineConfig, ReliabilityMode};
use truthinf::engine::{
    check_completion, compute_reliability, update_solution_estimate, EngineError,
};
use truthinf::model::{ScoreRow, TaskId};

fn main() -> Result<(), EngineError> {
    let exponential = EngineConfig::default();
    let linear = EngineConfig {
        reliability_mode: ReliabilityMode::LinearFraction,
        ..EngineConfig::default()
    };
    println!("errors  exp(-0.7 e)  1 - e/4");
    for errors in 0..=4 {
        println!(
            "{errors:>6}  {:>11.4}  {:>7.2}",
            compute_reliability(errors, 4, &exponential)?,
            compute_reliability(errors, 4, &linear)?
        );
    }

    // Eleven rounds with both controls wrong: each answer only adds exp(-1.4) ~ 0.2466.
    let q = compute_reliability(2, 2, &exponential)?;
    let mut row = ScoreRow::zeros(TaskId::from("t"), 3);
    for k in 1.. {
        update_solution_estimate(&mut row, 0, q, &exponential)?;
        if let Some(winner) = check_completion(&row, &exponential) {
            println!(
                "low-quality answers needed: {k} (score {:.4}, label index {winner})",
                row.scores[0]
            );
            break;
        }
    }

    // With a decrement, rival labels lose ground and stop at zero.
    let with_decrement = EngineConfig {
        decrement: 0.5,
        ..EngineConfig::default()
    };
    let mut row = ScoreRow {
        task_id: TaskId::from("t"),
        scores: vec![0.8, 0.3, 0.0],
    };
    update_solution_estimate(&mut row, 0, 0.5, &with_decrement)?;
    println!("after one decrementing update: {:?}", row.scores);

    // A tie at the top defers completion even above the threshold.
    let tied = ScoreRow {
        task_id: TaskId::from("t"),
        scores: vec![2.6, 2.6, 0.0],
    };
    println!(
        "tied row completes: {:?}",
        check_completion(&tied, &exponential)
    );
    Ok(())
}
