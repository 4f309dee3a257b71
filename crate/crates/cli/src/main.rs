//! `roomfit` command-line driver.

mod args;
mod commands;
mod config;
mod error;
mod manifest;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::CliError;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and succeed; usage errors are
            // configuration errors
            std::process::exit(if e.use_stderr() { CliError::config("").exit_code() } else { 0 });
        }
    };
    let verbose = match &cli.command {
        Command::Fuse(a) => a.common.verbose,
        Command::Envelope(a) => a.common.verbose,
        Command::Register(a) => a.common.verbose,
        Command::Layout(a) => a.common.verbose,
        Command::Losses(a) => a.common.verbose,
        Command::Synth(a) => a.common.verbose,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if verbose { "info" } else { "warn" }))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Fuse(a) => commands::fuse(a),
        Command::Envelope(a) => commands::envelope(a),
        Command::Register(a) => commands::register(a),
        Command::Layout(a) => commands::layout(a),
        Command::Losses(a) => commands::losses(a),
        Command::Synth(a) => commands::synth(a),
    };
    if let Err(e) = result {
        eprintln!("roomfit: {e}");
        std::process::exit(e.exit_code());
    }
}
