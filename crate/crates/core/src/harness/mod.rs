//! The pairwise evaluation protocol.
//!
//! A reference trajectory is computed on a grid of `n` points; every scheme
//! then takes exactly one step per grid interval, starting from the reference
//! state at the interval's left end, and the result is compared with the
//! reference state at the right end. Steps never see each other's output.

mod cache;
mod convergence;
mod grid;
mod output;
mod pairwise;
mod reference;

use std::path::PathBuf;

use thiserror::Error;

use crate::schemes::StepError;

pub use cache::{load_or_build_reference, CACHE_FORMAT_VERSION};
pub use convergence::{convergence_study, fit_slope, order_study_setup, standard_h_list, ConvergenceStudy};
pub use grid::{build_grid, Grid};
pub use output::{summarize, write_csv, write_reference_csv, RunMetadata, SchemeSummary, CSV_HEADER, GRID_NOTE};
pub use pairwise::{run_pairwise, BenchmarkRecord};
pub use reference::{build_reference, ReferenceConfig, ReferenceTrajectory};

/// Version tag written into output metadata and reference caches.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(
        "reference did not converge on [{t0}, {t1}] with {substeps} substeps (delta {delta:e}, tolerance {tolerance:e})"
    )]
    ReferenceNotConverged {
        t0: f64,
        t1: f64,
        substeps: usize,
        delta: f64,
        tolerance: f64,
    },
    #[error("error {error:e} at h = {h:e} is at the rounding floor; use larger steps or a longer span")]
    DegenerateFit { h: f64, error: f64 },
    #[error("invalid convergence study: {0}")]
    InvalidStudy(String),
    #[error("step failed at h = {h:e}: {source}")]
    StepFailed {
        h: f64,
        #[source]
        source: StepError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("reference cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
}
