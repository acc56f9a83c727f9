use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use diraclab_cli::catalog;
use diraclab_cli::experiments;
use diraclab_core::error::Error;

/// Reproducible experiment driver for weighted Dirac eigenvalue problems on
/// flat spin geometries.
#[derive(Parser)]
#[command(name = "diraclab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML configuration file.
    Run {
        /// Path to the configuration file.
        #[arg(long, short)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Thread-count hint for the dense kernels (0 = library default).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Print the built-in geometries, weights, families and experiments.
    ListBuiltins {
        /// Emit the catalog as JSON instead of text.
        #[arg(long)]
        machine: bool,
    },
}

// Exit codes: 0 success, 1 verdict failure, 2 configuration error,
// 3 numeric/runtime failure.
fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListBuiltins { machine } => {
            if machine {
                print!("{}", catalog::render_machine());
            } else {
                print!("{}", catalog::render_text());
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, output_dir, seed, threads } => {
            if threads > 0 {
                faer_set_threads(threads);
            }
            match experiments::run(&config, output_dir.as_deref(), seed) {
                Ok(outcome) => {
                    for w in &outcome.warnings {
                        eprintln!("warning: {w}");
                    }
                    if outcome.verdict_failures > 0 {
                        eprintln!(
                            "{} verdict(s) failed; see {}",
                            outcome.verdict_failures,
                            outcome.out_dir.display()
                        );
                        ExitCode::from(1)
                    } else {
                        println!("wrote {}", outcome.out_dir.display());
                        ExitCode::SUCCESS
                    }
                }
                Err(Error::Config(msg)) => {
                    eprintln!("config error: {msg}");
                    ExitCode::from(2)
                }
                Err(other) => {
                    eprintln!("error: {other}");
                    ExitCode::from(3)
                }
            }
        }
    }
}

fn faer_set_threads(n: usize) {
    diraclab_core::linalg::set_parallelism(n);
}
