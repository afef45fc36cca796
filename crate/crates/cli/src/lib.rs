//! Command-line driver: experiment configs, subcommands and the acceptance
//! suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod constants;

use clap::Parser;
use std::ffi::OsString;

pub use commands::{Cli, CliError};

/// Worker count from `DISPLAB_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("DISPLAB_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Parses `argv`, runs the subcommand and returns the process exit code:
/// 0 on success, 1 on a failed suite or computation, 2 on usage or config
/// errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = threads_from_env() {
        if !displab::parallel::init_threads(n) {
            log::debug!("worker pool already configured; DISPLAB_THREADS={n} ignored");
        }
    }
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
