//! Command-line front end: file formats, checkpoints, run configuration and
//! the `diner` subcommands.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod fsutil;
pub mod imageio;

use std::ffi::OsString;

use clap::Parser;

pub use error::{exit, CliError, Result};

use cli::{Cli, Command, LenslessCommand};

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return exit::USAGE;
        }
        // Fails only if a pool already exists, which keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let result = match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a),
        Command::Invariance(a) => commands::cmd_invariance(a),
        Command::Spectrum(a) => commands::cmd_spectrum(a),
        Command::Lensless(LenslessCommand::Simulate(a)) => commands::cmd_simulate(a),
        Command::Lensless(LenslessCommand::Reconstruct(a)) => commands::cmd_reconstruct(a),
    };
    match result {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
