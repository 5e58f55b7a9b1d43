use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use octoport_cli::{execute, parse_config_with, CliError, Defaults};

#[derive(Parser)]
#[command(name = "octoport", version, about = "Eight-port homodyne detector simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write its results.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Raise the four-mode vector limit to 4e7 amplitudes and add r = 4
        /// to the default schedule.
        #[arg(long)]
        large_memory: bool,
    },
    /// Check an experiment file without running it.
    Validate {
        config: PathBuf,
        #[arg(long)]
        large_memory: bool,
    },
}

fn load(path: &PathBuf, large_memory: bool) -> Result<octoport_cli::ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_with(&text, &Defaults { large_memory })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads, large_memory } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            load(&config, large_memory).and_then(|cfg| execute(&cfg, &out))
        }
        Command::Validate { config, large_memory } => load(&config, large_memory).map(|cfg| {
            println!("{}: valid {} experiment", config.display(), cfg.kind);
            octoport_cli::Status::Ok
        }),
    };
    match result {
        Ok(status) => {
            if let octoport_cli::Status::CheckFailed(m) | octoport_cli::Status::Infeasible(m) = &status {
                eprintln!("octoport: {m}");
            }
            ExitCode::from(status.exit_code())
        }
        Err(e) => {
            eprintln!("octoport: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
