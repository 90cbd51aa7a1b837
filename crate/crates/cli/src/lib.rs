//! Library side of the `hoikit` command-line tool, exposed so the pipeline can
//! be driven from tests without spawning processes.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::PathBuf;

pub use commands::Report;
pub use config::{Overrides, RunConfig};
pub use error::CliError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Synth,
    Extract,
    Interp,
    Train,
    Sample,
    Genlong,
    Rollout,
    Metrics,
    Report {
        input: Option<PathBuf>,
        format: Option<String>,
    },
}

/// Runs one command against a loaded configuration.
pub fn run(command: &Command, cfg: &RunConfig) -> Result<Report, CliError> {
    match command {
        Command::Synth => commands::synth(cfg),
        Command::Extract => commands::extract(cfg),
        Command::Interp => commands::interp(cfg),
        Command::Train => commands::train_cmd(cfg),
        Command::Sample => commands::sample(cfg),
        Command::Genlong => commands::genlong(cfg),
        Command::Rollout => commands::rollout(cfg),
        Command::Metrics => commands::metrics(cfg),
        Command::Report { input, format } => commands::report(cfg, input.clone(), format.clone()),
    }
}
