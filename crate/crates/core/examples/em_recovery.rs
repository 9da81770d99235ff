//! Recovers planted confusion matrices with Dawid-Skene EM.

use truthinf::baselines::{dawid_skene_em, majority_vote, EmOptions};
use truthinf::simulator::{planted_confusion_log, PlantedParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = PlantedParams {
        n_tasks: 500,
        n_players: 30,
        n_labels: 5,
        accuracy: 0.9,
        answers_per_task: None,
        n_spammers: 0,
    };
    let planted = planted_confusion_log(&params, 1)?;
    let (model, labels) = dawid_skene_em(&planted.log()?, EmOptions::default())?;

    let diagonals: Vec<f64> = model
        .confusion
        .values()
        .flat_map(|m| (0..m.len()).map(move |i| m[i][i]))
        .collect();
    let worst = diagonals
        .iter()
        .map(|d| (d - 0.9).abs())
        .fold(0.0, f64::max);
    println!(
        "{} iterations, converged: {}",
        model.iterations, model.converged
    );
    println!("log-likelihood: {:?}", model.log_likelihood);
    println!("largest diagonal error: {worst:.4}");
    let correct = labels
        .iter()
        .filter(|(t, l)| planted.truth[*t] == **l)
        .count();
    println!("labels recovered: {correct} of {}", labels.len());

    // A third of the players spamming, ten answers per task: EM learns whom to ignore.
    let noisy = PlantedParams {
        n_tasks: 400,
        n_labels: 4,
        accuracy: 0.75,
        answers_per_task: Some(10),
        n_spammers: 10,
        ..params
    };
    let planted = planted_confusion_log(&noisy, 2)?;
    let log = planted.log()?;
    let (_, em) = dawid_skene_em(&log, EmOptions::default())?;
    let mv = majority_vote(&log, 2)?.labels;
    let correct = |l: &std::collections::BTreeMap<_, String>| {
        l.iter().filter(|(t, v)| planted.truth[*t] == **v).count()
    };
    println!(
        "with spammers: EM {} / MV {} correct of 400",
        correct(&em),
        correct(&mv)
    );
    Ok(())
}
