use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dhondtxai::cli::{self, RunConfig};

#[derive(Parser)]
#[command(
    name = "dhondtxai",
    version,
    about = "Feature importance as a D'Hondt parliament"
)]
struct Args {
    /// Log progress and column encodings.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Forest seed, overriding `[trainer] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Apportion seats directly from an `entity,votes` CSV.
    Allocate {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long)]
        seats: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<(), cli::CliError> {
    match command {
        Command::Run { config, out, seed } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(out) = out {
                config.output_dir = out;
            }
            if let Some(seed) = seed {
                config.trainer.forest.seed = seed;
            }
            let outcome = cli::run(&config)?;
            print!("{}", outcome.table.to_text());
            if let Some(c) = &outcome.comparison {
                println!(
                    "\nSpearman rho = {:.4}, p = {:.4} (n = {})",
                    c.spearman_rho, c.p_value, c.n
                );
            }
            for f in &outcome.files {
                log::info!("wrote {}", f.display());
            }
        }
        Command::Allocate { votes, seats, out } => {
            let outcome = cli::allocate(&votes, seats, out.as_deref())?;
            print!("{}", outcome.table.to_text());
            for f in &outcome.files {
                log::info!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
