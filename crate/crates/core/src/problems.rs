//! Benchmark initial value problems.
//!
//! Three stiff models (stiff Van der Pol with mu = 1000, HIRES, Robertson)
//! plus a nonstiff fixture with a closed-form solution for order studies.
//! Every model carries a hand-coded analytic Jacobian.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector};

pub type RhsFn = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(f64, &Vector) -> Matrix + Send + Sync>;
pub type SolutionFn = Arc<dyn Fn(f64) -> Vector + Send + Sync>;

/// How benchmark grids are spaced over the time span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridRule {
    Linear,
    Logarithmic,
}

/// Names accepted by [`by_name`].
pub const MODEL_NAMES: [&str; 4] = ["vanderpol", "hires", "robertson", "smooth"];

pub const DEFAULT_REFERENCE_SUBSTEPS: usize = 100;

/// An autonomous or non-autonomous system `y' = f(t, y)` with its Jacobian.
#[derive(Clone)]
pub struct OdeProblem {
    name: String,
    y0: Vector,
    t_span: (f64, f64),
    grid_rule: GridRule,
    reference_substeps: usize,
    rhs: RhsFn,
    jacobian: JacobianFn,
    exact: Option<SolutionFn>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("y0", &self.y0)
            .field("t_span", &self.t_span)
            .field("grid_rule", &self.grid_rule)
            .finish_non_exhaustive()
    }
}

impl OdeProblem {
    pub fn new(
        name: impl Into<String>,
        y0: Vector,
        t_span: (f64, f64),
        rhs: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
        jacobian: impl Fn(f64, &Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        assert!(!y0.is_empty(), "problem dimension must be positive");
        assert!(t_span.0 < t_span.1, "t_start must precede t_end");
        OdeProblem {
            name: name.into(),
            y0,
            t_span,
            grid_rule: GridRule::Linear,
            reference_substeps: DEFAULT_REFERENCE_SUBSTEPS,
            rhs: Arc::new(rhs),
            jacobian: Arc::new(jacobian),
            exact: None,
        }
    }

    /// `y' = A y`, with the exact flow attached.
    pub fn linear(name: impl Into<String>, a: Matrix, y0: Vector, t_span: (f64, f64)) -> Self {
        let (a_rhs, a_jac, a_exact, y_start) = (a.clone(), a.clone(), a, y0.clone());
        let t_start = t_span.0;
        OdeProblem::new(name, y0, t_span, move |_, y| a_rhs.mul_vec(y), move |_, _| a_jac.clone())
            .with_exact(move |t| {
                crate::matfun::expm(&a_exact.scaled(t - t_start))
                    .expect("exact flow of a linear test problem overflowed")
                    .mul_vec(&y_start)
            })
    }

    pub fn with_grid_rule(mut self, rule: GridRule) -> Self {
        if rule == GridRule::Logarithmic {
            assert!(self.t_span.0 > 0.0, "logarithmic grids need t_start > 0");
        }
        self.grid_rule = rule;
        self
    }

    pub fn with_t_span(mut self, t_span: (f64, f64)) -> Self {
        assert!(t_span.0 < t_span.1, "t_start must precede t_end");
        self.t_span = t_span;
        self
    }

    pub fn with_reference_substeps(mut self, m: usize) -> Self {
        assert!(m >= 1);
        self.reference_substeps = m;
        self
    }

    pub fn with_exact(mut self, exact: impl Fn(f64) -> Vector + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn y0(&self) -> &Vector {
        &self.y0
    }

    pub fn t_span(&self) -> (f64, f64) {
        self.t_span
    }

    pub fn grid_rule(&self) -> GridRule {
        self.grid_rule
    }

    pub fn reference_substeps(&self) -> usize {
        self.reference_substeps
    }

    pub fn f(&self, t: f64, y: &Vector) -> Vector {
        (self.rhs)(t, y)
    }

    pub fn jacobian(&self, t: f64, y: &Vector) -> Matrix {
        (self.jacobian)(t, y)
    }

    /// Closed-form solution, when the problem has one.
    pub fn exact(&self, t: f64) -> Option<Vector> {
        self.exact.as_ref().map(|s| s(t))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }
}

pub const VANDERPOL_MU: f64 = 1000.0;

/// Stiff Van der Pol oscillator in first-order form, mu = 1000:
///
/// ```text
/// x' = y
/// y' = mu y - mu x^2 y - x
/// ```
pub fn vanderpol() -> OdeProblem {
    let mu = VANDERPOL_MU;
    OdeProblem::new(
        "vanderpol",
        Vector::from_slice(&[1.0, 0.0]),
        (0.0, 1300.0),
        move |_, s| {
            let (x, y) = (s[0], s[1]);
            Vector::from_slice(&[y, mu * y - mu * x * x * y - x])
        },
        move |_, s| {
            let (x, y) = (s[0], s[1]);
            Matrix::from_rows(&[&[0.0, 1.0], &[-2.0 * mu * x * y - 1.0, mu - mu * x * x]])
        },
    )
}

/// The eight-species "High Irradiance RESponse" model.
pub fn hires() -> OdeProblem {
    OdeProblem::new(
        "hires",
        Vector::from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0057]),
        (0.0, 321.8122),
        |_, y| {
            let r = 280.0 * y[5] * y[7];
            Vector::from_slice(&[
                -1.71 * y[0] + 0.43 * y[1] + 8.32 * y[2] + 0.0007,
                1.71 * y[0] - 8.75 * y[1],
                -10.03 * y[2] + 0.43 * y[3] + 0.035 * y[4],
                8.32 * y[1] + 1.71 * y[2] - 1.12 * y[3],
                -1.745 * y[4] + 0.43 * y[5] + 0.43 * y[6],
                -r + 0.69 * y[3] + 1.71 * y[4] - 0.43 * y[5] + 0.69 * y[6],
                r - 1.81 * y[6],
                -r + 1.81 * y[6],
            ])
        },
        |_, y| {
            let mut j = Matrix::zeros(8, 8);
            j[(0, 0)] = -1.71;
            j[(0, 1)] = 0.43;
            j[(0, 2)] = 8.32;
            j[(1, 0)] = 1.71;
            j[(1, 1)] = -8.75;
            j[(2, 2)] = -10.03;
            j[(2, 3)] = 0.43;
            j[(2, 4)] = 0.035;
            j[(3, 1)] = 8.32;
            j[(3, 2)] = 1.71;
            j[(3, 3)] = -1.12;
            j[(4, 4)] = -1.745;
            j[(4, 5)] = 0.43;
            j[(4, 6)] = 0.43;
            j[(5, 3)] = 0.69;
            j[(5, 4)] = 1.71;
            j[(5, 5)] = -280.0 * y[7] - 0.43;
            j[(5, 6)] = 0.69;
            j[(5, 7)] = -280.0 * y[5];
            j[(6, 5)] = 280.0 * y[7];
            j[(6, 6)] = -1.81;
            j[(6, 7)] = 280.0 * y[5];
            j[(7, 5)] = -280.0 * y[7];
            j[(7, 6)] = 1.81;
            j[(7, 7)] = -280.0 * y[5];
            j
        },
    )
}

/// Robertson's autocatalytic reaction on `t in [1e-5, 1e7]`, log-spaced.
pub fn robertson() -> OdeProblem {
    OdeProblem::new(
        "robertson",
        Vector::from_slice(&[1.0, 0.0, 0.0]),
        (1e-5, 1e7),
        |_, y| {
            let slow = 0.04 * y[0];
            let mid = 1e4 * y[1] * y[2];
            let fast = 3e7 * y[1] * y[1];
            Vector::from_slice(&[-slow + mid, slow - mid - fast, fast])
        },
        |_, y| {
            Matrix::from_rows(&[
                &[-0.04, 1e4 * y[2], 1e4 * y[1]],
                &[0.04, -1e4 * y[2] - 6e7 * y[1], -1e4 * y[1]],
                &[0.0, 6e7 * y[1], 0.0],
            ])
        },
    )
    .with_grid_rule(GridRule::Logarithmic)
}

/// Nonstiff order-study fixture: a nonlinear rotation
///
/// ```text
/// y' = (y1^2 + y2^2) [-y2, y1],   y(0) = [1, 0]
/// ```
///
/// The radius is invariant, so the solution is `[cos t, sin t]`. The
/// quadratic factor makes `f - J y` nonzero; on a purely linear field every
/// exponential scheme is exact and no order could be observed.
pub fn smooth_test() -> OdeProblem {
    OdeProblem::new(
        "smooth",
        Vector::from_slice(&[1.0, 0.0]),
        (0.0, 1.0),
        |_, y| {
            let r2 = y[0] * y[0] + y[1] * y[1];
            Vector::from_slice(&[-r2 * y[1], r2 * y[0]])
        },
        |_, y| {
            let (a, b) = (y[0], y[1]);
            let r2 = a * a + b * b;
            Matrix::from_rows(&[&[-2.0 * a * b, -r2 - 2.0 * b * b], &[r2 + 2.0 * a * a, 2.0 * a * b]])
        },
    )
    .with_exact(|t| Vector::from_slice(&[t.cos(), t.sin()]))
}

/// Looks a model up by its CLI name.
pub fn by_name(name: &str) -> Option<OdeProblem> {
    match name {
        "vanderpol" => Some(vanderpol()),
        "hires" => Some(hires()),
        "robertson" => Some(robertson()),
        "smooth" | "smooth_test" => Some(smooth_test()),
        _ => None,
    }
}
