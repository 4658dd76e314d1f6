mod args;
mod commands;
mod io;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    /// Flag values that parse but make no sense.
    Usage(String),
    Core(zsl_core::Error),
}

impl From<zsl_core::Error> for CliError {
    fn from(e: zsl_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_format_error() => 4,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::ExtractSubgraph(a) => commands::extract_subgraph(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Conse(a) => commands::conse(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::AnalyzeDistances(a) => commands::analyze_distances(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run `zsl help` for usage");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
