//! Command-line harness around `parnes-core`: problem generation, single
//! solves, reference solutions and benchmark sweeps.

pub mod args;
pub mod bench;
pub mod commands;
pub mod error;

use args::{Cli, Command};
use commands::Outcome;
use error::CliResult;

/// Runs a parsed command line; `argv` is echoed into bench manifests.
pub fn run(cli: &Cli, argv: &[String]) -> CliResult<Outcome> {
    match &cli.command {
        Command::Gen(a) => commands::run_gen(a),
        Command::Solve(a) => commands::run_solve(a),
        Command::Bench(a) => bench::run_bench(a, argv),
        Command::Reference(a) => commands::run_reference(a),
    }
}
