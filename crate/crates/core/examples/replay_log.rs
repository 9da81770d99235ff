//! Writes a simulated run to disk, replays the contribution log and compares baselines, the
//! same pipeline as `truthinf simulate`, `replay` and `compare`.

use truthinf::cli::{self, comparison_table, Algorithm};
use truthinf::config::EngineConfig;
use truthinf::simulator::WorldParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("truthinf-replay-example");
    let config = EngineConfig::default();
    let world = WorldParams {
        n_tasks: 300,
        n_players: 80,
        ..WorldParams::default()
    };

    let simulated = cli::simulate(&world, &config, 42, &out)?;
    for f in &simulated.files {
        println!("wrote {}", f.display());
    }

    let log = out.join("contributions.jsonl");
    let replayed = cli::replay(&log, None, &config, &out.join("replay"))?;
    assert_eq!(replayed.tasks, simulated.results.tasks);
    println!(
        "replay reproduced all {} task results",
        replayed.tasks.len()
    );

    let comparison = cli::compare(&log, &out.join("results.json"), &Algorithm::ALL, 42, &out)?;
    print!("{}", comparison_table(&comparison.comparisons));
    Ok(())
}
