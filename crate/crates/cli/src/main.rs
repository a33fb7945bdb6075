use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    hipdyn_cli::run(hipdyn_cli::Cli::parse())
}
