//! Command-line front end of `msbayes`: configuration files, result
//! directories and the experiment sweeps.

pub mod commands;
pub mod config;
pub mod output;

use msbayes::Error;

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Numerical(_) => 3,
        Error::Data(_) | Error::Format(_) => 4,
        Error::Sequencing(_) | Error::Io(_) => 1,
    }
}
