//! Runs majority vote, Dawid-Skene EM and message passing ex post on a simulated log and
//! compares each with the incremental labels.

use truthinf::cli::{compare_labels, comparison_table, Algorithm};
use truthinf::config::EngineConfig;
use truthinf::simulator::{generate_world, run_experiment, WorldParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = generate_world(&WorldParams::default(), 7)?;
    let experiment = run_experiment(&world, &EngineConfig::for_min_agreement(4), 7)?;
    let log = experiment.log()?;
    println!(
        "{} tasks, {} players, {} answers\n",
        log.tasks().len(),
        log.players().len(),
        log.len()
    );

    let comparisons = compare_labels(
        &log,
        &experiment.report.results,
        &experiment.report.contribution_counts,
        &Algorithm::ALL,
        7,
    )?;
    print!("{}", comparison_table(&comparisons));
    Ok(())
}
