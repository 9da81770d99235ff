//! Contribution counts as a difficulty proxy: harder (more confusable) tasks take more answers.

use std::collections::BTreeMap;

use truthinf::config::EngineConfig;
use truthinf::metrics::{difficulty_proxy, spearman};
use truthinf::simulator::{generate_world, run_experiment, WorldParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = generate_world(
        &WorldParams {
            n_tasks: 500,
            ..WorldParams::default()
        },
        3,
    )?;
    let experiment = run_experiment(&world, &EngineConfig::for_min_agreement(4), 3)?;
    let proxy = difficulty_proxy(&experiment.report);

    let confusability: Vec<f64> = world.tasks.iter().map(|t| t.confusability).collect();
    let counts: Vec<f64> = world
        .tasks
        .iter()
        .map(|t| f64::from(proxy[&t.task_id].contributions))
        .collect();
    println!(
        "Spearman(confusability, answers) = {:.3}",
        spearman(&confusability, &counts).unwrap_or(f64::NAN)
    );

    // Mean planted confusability per observed contribution count.
    let mut by_count: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for t in &world.tasks {
        let e = by_count.entry(proxy[&t.task_id].contributions).or_default();
        e.0 += t.confusability;
        e.1 += 1;
    }
    println!("answers  tasks  mean confusability");
    for (count, (sum, n)) in by_count {
        println!("{count:>7}  {n:>5}  {:>18.3}", sum / n as f64);
    }
    Ok(())
}
