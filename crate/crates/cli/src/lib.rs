//! Command-line front end: argument grammar, run manifests, output
//! formatting and the acceptance checks behind `bai verify`.

pub mod args;
pub mod commands;
pub mod error;
pub mod format;
pub mod manifest;
pub mod verify;

use std::io::Write;
use std::path::Path;

pub use error::{CliError, Result};

use args::{Cli, Command};
use commands::Context;

/// Runs a parsed command line. Returns whether the command succeeded.
pub fn run(cli: &Cli, exe: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<bool> {
    let ctx = Context { wall_clock: cli.stamp };
    let output = match &cli.command {
        Command::Solve(a) => commands::solve(a, ctx)?,
        Command::Regret(a) => commands::regret(a, ctx)?,
        Command::Sweep(a) => commands::sweep(a, ctx)?,
        Command::Simulate(a) => commands::simulate(a, ctx)?,
        Command::Verify(a) => commands::verify(a, exe, stderr)?,
    };
    output.emit(stdout, stderr)
}
