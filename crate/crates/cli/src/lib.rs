//! Command-line front end: calibrate, detect, composite, evaluate, sweep.
//!
//! Exit codes are 0 on success, 1 when some records failed but the rest were
//! written, and 2 for configuration, manifest or whole-run failures.

pub mod args;
pub mod commands;

use clap::Parser;

pub use args::Cli;
pub use commands::{dispatch, Outcome};

/// Runs a parsed command and reports errors on stderr.
pub fn run(cli: &Cli) -> u8 {
    match dispatch(cli) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::Partial { failed, total }) => {
            eprintln!("error: {failed} of {total} record(s) failed");
            1
        }
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}
