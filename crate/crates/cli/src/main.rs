use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pairwise_rcd_cli::config::KEYS;
use pairwise_rcd_cli::{commands, Command, Config};

/// Stability and convergence experiments for pairwise randomized coordinate descent.
#[derive(Parser)]
#[command(name = "pairwise-rcd", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Configuration file of `key = value` lines
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` or `--key=value` (see `pairwise-rcd keys`)
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "OVERRIDES"
    )]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Sub {
    /// Delta_t across the step-size grid
    Stability(RunArgs),
    /// RCD against SGD at one step size
    Compare(RunArgs),
    /// Seed-averaged training risk against the optimization bounds
    Convergence(RunArgs),
    /// Theoretical bounds, joined with measured stability where available
    Bounds(RunArgs),
    /// Parse a LIBSVM file, report counts and check the round trip
    ParseCheck(RunArgs),
    /// List configuration keys and defaults
    Keys,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, args) = match cli.command {
        Sub::Stability(a) => (Command::Stability, a),
        Sub::Compare(a) => (Command::Compare, a),
        Sub::Convergence(a) => (Command::Convergence, a),
        Sub::Bounds(a) => (Command::Bounds, a),
        Sub::ParseCheck(a) => (Command::ParseCheck, a),
        Sub::Keys => {
            for (key, default, help) in KEYS {
                println!(
                    "{key:<16} {:<14} {help}",
                    if default.is_empty() { "-" } else { default }
                );
            }
            return ExitCode::SUCCESS;
        }
    };
    let result = Config::resolve(args.config.as_deref(), &args.overrides)
        .and_then(|cfg| commands::run(command, &cfg));
    match result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
