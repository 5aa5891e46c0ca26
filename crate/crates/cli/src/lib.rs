//! Library side of the `expbench` binary: configuration handling and the
//! subcommands, kept separate from argument parsing so they can be tested.

pub mod commands;
pub mod config;

pub use config::{Overrides, RunConfig, UsageError};

/// Exit code for invalid names or values.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for failed runs (reference not converged, I/O errors).
pub const EXIT_FAILURE: i32 = 1;

/// Maps an error to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    }
}
