//! Single-step integration schemes and their registry.
//!
//! Every scheme is a pure map `(t0, y0, h) -> y1`. Nothing is carried between
//! steps: Jacobians, factorizations and matrix functions are rebuilt from the
//! start state each time.

pub mod classical;
pub mod exponential;
pub mod implicit;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Vector;
use crate::matfun::MatfunError;
use crate::problems::OdeProblem;

pub use exponential::SignMode;
pub use implicit::{ButcherTableau, NewtonConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vector,
    },
    #[error("Newton matrix is singular")]
    SingularNewtonMatrix,
    #[error("resolvent matrix is singular")]
    SingularResolvent,
    #[error("matrix function failed: {0}")]
    MatrixFunction(#[from] MatfunError),
    #[error("step produced non-finite values")]
    Diverged,
}

/// Work counters for one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub rhs_evals: usize,
    pub jacobian_evals: usize,
    pub newton_iterations: usize,
    pub matrix_functions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub y: Vector,
    pub stats: StepStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Implicit,
    Exponential,
    Classical,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Implicit => "implicit",
            Family::Exponential => "exponential",
            Family::Classical => "classical",
        })
    }
}

/// Name, family and formal order of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SchemeDescriptor {
    pub name: &'static str,
    pub family: Family,
    pub order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    BackwardEuler,
    Trapezoid,
    Radau3,
    Radau5,
    Rk4,
    IfEuler,
    If2Rk,
    Etd1,
    Etd2Rk,
    Etd4Rk,
    Rkmk2e,
    EtdRdp,
    Epi2,
    Epirk3,
    Etd1Rk4,
    Essprk,
    EssprkPlus,
}

impl Scheme {
    pub const ALL: [Scheme; 17] = [
        Scheme::BackwardEuler,
        Scheme::Trapezoid,
        Scheme::Radau3,
        Scheme::Radau5,
        Scheme::Rk4,
        Scheme::IfEuler,
        Scheme::If2Rk,
        Scheme::Etd1,
        Scheme::Etd2Rk,
        Scheme::Etd4Rk,
        Scheme::Rkmk2e,
        Scheme::EtdRdp,
        Scheme::Epi2,
        Scheme::Epirk3,
        Scheme::Etd1Rk4,
        Scheme::Essprk,
        Scheme::EssprkPlus,
    ];

    pub fn descriptor(self) -> SchemeDescriptor {
        use Family::*;
        let (name, family, order) = match self {
            Scheme::BackwardEuler => ("backward_euler", Implicit, 1),
            Scheme::Trapezoid => ("trapezoid", Implicit, 2),
            Scheme::Radau3 => ("radau3", Implicit, 3),
            Scheme::Radau5 => ("radau5", Implicit, 5),
            Scheme::Rk4 => ("rk4", Classical, 4),
            Scheme::IfEuler => ("if_euler", Exponential, 1),
            Scheme::If2Rk => ("if2rk", Exponential, 2),
            Scheme::Etd1 => ("etd1", Exponential, 1),
            Scheme::Etd2Rk => ("etd2rk", Exponential, 2),
            Scheme::Etd4Rk => ("etd4rk", Exponential, 4),
            Scheme::Rkmk2e => ("rkmk2e", Exponential, 2),
            Scheme::EtdRdp => ("etd_rdp", Exponential, 2),
            Scheme::Epi2 => ("epi2", Exponential, 2),
            Scheme::Epirk3 => ("epirk3", Exponential, 3),
            Scheme::Etd1Rk4 => ("etd1rk4", Exponential, 4),
            Scheme::Essprk => ("essprk", Exponential, 3),
            Scheme::EssprkPlus => ("essprk_plus", Exponential, 3),
        };
        SchemeDescriptor { name, family, order }
    }

    pub fn name(self) -> &'static str {
        self.descriptor().name
    }

    pub fn family(self) -> Family {
        self.descriptor().family
    }

    pub fn order(self) -> u32 {
        self.descriptor().order
    }

    pub fn names() -> Vec<&'static str> {
        Scheme::ALL.iter().map(|s| s.name()).collect()
    }

    pub fn from_name(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scheme `{0}`")]
pub struct UnknownScheme(pub String);

impl FromStr for Scheme {
    type Err = UnknownScheme;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::from_name(s).ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

/// Tunables shared by all schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeOptions {
    pub newton: NewtonConfig,
    pub sign_mode: SignMode,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        SchemeOptions {
            newton: NewtonConfig::default(),
            sign_mode: SignMode::selected(),
        }
    }
}

/// Anything that can take one step of a problem.
pub trait SingleStep: Sync {
    fn label(&self) -> String;
    fn step(&self, problem: &OdeProblem, t0: f64, y0: &Vector, h: f64) -> Result<StepOutput, StepError>;
}

/// A registered scheme bound to its options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfiguredScheme {
    pub scheme: Scheme,
    pub options: SchemeOptions,
}

impl ConfiguredScheme {
    pub fn new(scheme: Scheme, options: SchemeOptions) -> Self {
        ConfiguredScheme { scheme, options }
    }
}

impl From<Scheme> for ConfiguredScheme {
    fn from(scheme: Scheme) -> Self {
        ConfiguredScheme::new(scheme, SchemeOptions::default())
    }
}

impl SingleStep for ConfiguredScheme {
    fn label(&self) -> String {
        self.scheme.name().to_string()
    }

    fn step(&self, problem: &OdeProblem, t0: f64, y0: &Vector, h: f64) -> Result<StepOutput, StepError> {
        step(self.scheme, problem, t0, y0, h, &self.options)
    }
}

/// Takes one step of `scheme`. Non-finite results come back as
/// [`StepError::Diverged`].
pub fn step(
    scheme: Scheme,
    problem: &OdeProblem,
    t0: f64,
    y0: &Vector,
    h: f64,
    options: &SchemeOptions,
) -> Result<StepOutput, StepError> {
    assert!(h > 0.0, "step size must be positive");
    let out = match scheme.family() {
        Family::Implicit => implicit::step(scheme, problem, t0, y0, h, &options.newton)?,
        Family::Classical => classical::step(scheme, problem, t0, y0, h)?,
        Family::Exponential => exponential::step(scheme, problem, t0, y0, h, options.sign_mode)?,
    };
    if !out.y.is_finite() {
        return Err(StepError::Diverged);
    }
    Ok(out)
}
