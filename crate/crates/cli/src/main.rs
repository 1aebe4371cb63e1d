mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, UsageError};
use rop_core::ErrorCategory;

const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_COMPUTE: u8 = 5;
const EXIT_IO: u8 = 6;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rop_core::Error>() {
            return match e.category() {
                ErrorCategory::Parse => EXIT_PARSE,
                ErrorCategory::Validation => EXIT_VALIDATION,
                ErrorCategory::Compute => EXIT_COMPUTE,
                ErrorCategory::Io => EXIT_IO,
            };
        }
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<toml::de::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_PARSE;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_COMPUTE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Combine(a) => commands::combine(a),
        Command::SelectR(a) => commands::select_r(a),
        Command::Power(a) => commands::power(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::VoteCount(a) => commands::vote_count(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
