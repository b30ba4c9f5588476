use std::process::ExitCode;

use clap::Parser;
use porous_cli::args::Cli;
use porous_cli::EXIT_INVALID;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match porous_cli::run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
