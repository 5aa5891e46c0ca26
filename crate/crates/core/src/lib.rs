//! Single-step benchmarks of implicit, exponential and classical integrators
//! on stiff ODEs.
//!
//! The crate is organized bottom-up: dense linear algebra ([`linalg`]),
//! matrix functions ([`matfun`]), test problems ([`problems`]), the step
//! functions themselves ([`schemes`]) and the evaluation protocol
//! ([`harness`]).

pub mod harness;
pub mod linalg;
pub mod matfun;
pub mod problems;
pub mod schemes;

pub use harness::{BenchmarkRecord, Grid, HarnessError, ReferenceConfig, ReferenceTrajectory};
pub use linalg::{LinalgError, Matrix, Vector};
pub use matfun::{expm, phi_bundle, phi_functions, MatfunError, PhiBundle};
pub use problems::{GridRule, OdeProblem};
pub use schemes::{
    ConfiguredScheme, Family, NewtonConfig, Scheme, SchemeOptions, SignMode, SingleStep, StepError, StepOutput,
    StepStats,
};
