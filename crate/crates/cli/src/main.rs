//! `conformal-box`: conformal calibration of bounding-box predictions.

mod args;
mod commands;
mod overlay;

use clap::Parser;

use args::{Cli, Command};
use conformal_box_core::Error;

/// Machine-checkable exit codes for pipeline use.
const EXIT_VALIDATION: i32 = 2;
const EXIT_UNBOUNDED_MARGINS: i32 = 3;
const EXIT_IO: i32 = 4;

fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Io { .. } => EXIT_IO,
        Error::UnboundedMargins { .. } => EXIT_UNBOUNDED_MARGINS,
        _ => EXIT_VALIDATION,
    }
}

fn run(cli: Cli) -> conformal_box_core::Result<()> {
    match &cli.command {
        Command::Calibrate(args) => commands::calibrate::run(args),
        Command::Conformalize(args) => commands::conformalize::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::ValidateCoverage(args) => commands::validate_coverage::run(args),
        Command::Render(args) => commands::render::run(args),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error}");
        std::process::exit(exit_code(&error));
    }
}
