use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = laprop_cli::Cli::parse();
    ExitCode::from(laprop_cli::run(cli))
}
