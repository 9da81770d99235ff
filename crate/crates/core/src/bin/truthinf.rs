use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use truthinf::cli::{self, CliError, ConfigOverrides};
use truthinf::io::{CONTRIBUTIONS_FILE, RESULTS_FILE};
use truthinf::model::LabelSet;
use truthinf::simulator::WorldParams;

#[derive(Parser)]
#[command(
    name = "truthinf",
    version,
    about = "Incremental truth inference for crowd answers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file with engine settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    min_agreement: Option<u32>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
}

impl Common {
    fn engine_config(&self) -> Result<truthinf::config::EngineConfig, CliError> {
        let base = cli::load_config(self.config.as_deref())?;
        let overrides = ConfigOverrides {
            min_agreement: self.min_agreement,
            threshold: self.threshold,
            alpha: self.alpha,
        };
        Ok(overrides.apply(base))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a player population against the incremental engine.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tasks: Option<usize>,
        /// Number of labels.
        #[arg(long)]
        labels: Option<usize>,
        #[arg(long)]
        players: Option<usize>,
        #[arg(long)]
        spammer_fraction: Option<f64>,
    },
    /// Replay a recorded contribution log through the engine.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Contribution log; defaults to the one in the output directory.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Use labels v1..vN instead of the labels found in the log.
        #[arg(long)]
        labels: Option<usize>,
    },
    /// Compare ex-post baselines with incremental results.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "mv,em,mp")]
        algorithms: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            common,
            tasks,
            labels,
            players,
            spammer_fraction,
        } => {
            let defaults = WorldParams::default();
            let world = WorldParams {
                n_tasks: tasks.unwrap_or(defaults.n_tasks),
                n_labels: labels.unwrap_or(defaults.n_labels),
                n_players: players.unwrap_or(defaults.n_players),
                spammer_fraction: spammer_fraction.unwrap_or(defaults.spammer_fraction),
                ..defaults
            };
            let out = cli::simulate(&world, &common.engine_config()?, common.seed, &common.out)?;
            let s = &out.results.summary;
            println!(
                "solved {}/{} tasks with {} contributions ({:+.1}% against {} theoretical)",
                s.solved,
                s.tasks,
                s.total_contributions,
                s.redundancy_saving,
                s.theoretical_redundancy
            );
        }
        Command::Replay {
            common,
            log,
            labels,
        } => {
            let log = log.unwrap_or_else(|| common.out.join(CONTRIBUTIONS_FILE));
            let labels = labels.map(LabelSet::numbered).transpose()?;
            let results = cli::replay(&log, labels, &common.engine_config()?, &common.out)?;
            let s = &results.summary;
            println!(
                "solved {}/{} tasks, {} unsolved",
                s.solved,
                s.tasks,
                s.unsolved.len()
            );
        }
        Command::Compare {
            common,
            log,
            results,
            algorithms,
        } => {
            let algorithms = cli::parse_algorithms(&algorithms)?;
            let log = log.unwrap_or_else(|| common.out.join(CONTRIBUTIONS_FILE));
            let results = results.unwrap_or_else(|| common.out.join(RESULTS_FILE));
            let file = cli::compare(&log, &results, &algorithms, common.seed, &common.out)?;
            print!("{}", cli::comparison_table(&file.comparisons));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
