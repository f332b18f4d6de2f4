use std::process::ExitCode;

use clap::Parser;
use streamctr_cli::cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match streamctr_cli::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
