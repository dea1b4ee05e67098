//! Command-line front end for the collective-atom simulator.
//!
//! Exit codes: 0 success, 2 config error, 3 capacity exceeded,
//! 4 nonconvergence or stiffness, 5 internal error.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use symrad::config::RunConfig;
use symrad::run::{execute, exit_code, CliOptions};

#[derive(Parser)]
#[command(name = "symrad", about = "Collective open-system dynamics of identical atoms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario described by a TOML config file.
    Run {
        /// Path to the config file.
        config: PathBuf,
        /// Directory to place outputs in (prepended to the configured path).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Thread budget for parallel assembly and sweep points.
        #[arg(long)]
        jobs: Option<usize>,
        /// Cross-check the configured model against the dense reference at
        /// small atom number before the main run.
        #[arg(long)]
        verify_oracle: bool,
        /// Additionally write the assembled generator in coordinate format.
        #[arg(long)]
        dump_generator: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output_dir, jobs, verify_oracle, dump_generator } => {
            if let Some(n) = jobs {
                if let Err(e) =
                    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()
                {
                    eprintln!("symrad: failed to configure {n} threads: {e}");
                    return ExitCode::from(5);
                }
            }
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("symrad: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let cfg = match RunConfig::from_toml(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("symrad: {e}");
                    return ExitCode::from(2);
                }
            };
            let opts = CliOptions { output_dir, jobs, verify_oracle, dump_generator };
            match execute(&cfg, &opts) {
                Ok(path) => {
                    println!("{}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("symrad: {e}");
                    ExitCode::from(exit_code(&e) as u8)
                }
            }
        }
    }
}
