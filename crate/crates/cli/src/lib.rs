//! Reproducibility shell around the streaming engine: versioned TOML
//! configs, experiment manifests, sweeps and analysis exports.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod prepared;

pub use error::{CliError, Result};

use cli::{Cli, Command};

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Prepare(a) => commands::prepare::execute(a).map(drop),
        Command::Run(a) => commands::run::execute(a).map(drop),
        Command::Sweep(a) => commands::sweep::execute(a).map(drop),
        Command::Analyze(a) => commands::analyze::execute(a).map(drop),
        Command::Synth(a) => commands::synth::execute(a),
    }
}
