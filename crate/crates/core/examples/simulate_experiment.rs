//! Plays a synthetic player population (with spammers and long-tail activity) against the
//! engine and reports the redundancy it took.

use truthinf::config::EngineConfig;
use truthinf::metrics::{redundancy_saving, theoretical_redundancy};
use truthinf::simulator::{generate_world, run_experiment, WorldParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = WorldParams {
        n_tasks: 1_000,
        n_labels: 6,
        n_players: 200,
        spammer_fraction: 0.15,
        ..WorldParams::default()
    };
    let config = EngineConfig::for_min_agreement(4);
    let theoretical = theoretical_redundancy(params.n_tasks as u64, params.n_labels as u64, 4)?;

    for seed in 0..5 {
        let world = generate_world(&params, seed)?;
        let experiment = run_experiment(&world, &config, seed)?;
        let report = &experiment.report;
        let truth = world.truth();
        let correct = report
            .results
            .iter()
            .filter(|(t, l)| truth[*t] == **l)
            .count();
        println!(
            "seed {seed}: {} rounds, {} answers ({:+.1}% vs {theoretical}), {:.1}% correct",
            report.rounds,
            report.total_contributions,
            redundancy_saving(report.total_contributions, theoretical)?,
            100.0 * correct as f64 / truth.len() as f64
        );
    }
    Ok(())
}
