use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use somdp::commands::{cmd_cluster_demo, cmd_selforg, cmd_solve};
use somdp::RunConfig;

#[derive(Parser)]
#[command(
    name = "somdp",
    version,
    about = "Multi-task planning with self-organizing state-aggregation modules"
)]
struct Cli {
    /// Run configuration file (line-based `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one navigation task exactly and evaluate the greedy policy.
    Solve {
        /// Task index, 1..=6.
        #[arg(long)]
        task: usize,
    },
    /// Run the six-task modular self-organization experiment.
    Selforg,
    /// Batch and on-line dynamic clustering on a seeded blob dataset.
    ClusterDemo,
}

// Exit codes: 0 success, 1 usage error, 2 runtime failure.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    if let Command::Solve { task } = &cli.command {
        if !(1..=6).contains(task) {
            eprintln!("bad argument: --task must be in 1..=6, got {task}");
            return ExitCode::from(1);
        }
    }

    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }

    let outcome = match cli.command {
        Command::Solve { task } => cmd_solve(&cfg, task),
        Command::Selforg => cmd_selforg(&cfg).map(|_| ()),
        Command::ClusterDemo => cmd_cluster_demo(&cfg).map(|_| ()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
