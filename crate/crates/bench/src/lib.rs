//! Inputs shared by the benchmarks.

use expbench_core::problems::{hires, robertson, vanderpol};
use expbench_core::{Matrix, OdeProblem, Vector};

/// A model together with a representative state and step size.
pub struct Case {
    pub problem: OdeProblem,
    pub y: Vector,
    pub h: f64,
}

pub fn cases() -> Vec<Case> {
    let vdp = vanderpol();
    let y_vdp = vdp.y0().clone();
    let rob = robertson();
    let y_rob = rob.y0().clone();
    let hi = hires();
    let y_hi = hi.y0().clone();
    vec![
        Case { problem: vdp, y: y_vdp, h: 1e-2 },
        Case { problem: hi, y: y_hi, h: 1e-1 },
        Case { problem: rob, y: y_rob, h: 1.0 },
    ]
}

/// The scaled Jacobian `hJ` of a case: the argument of every matrix function
/// an exponential step evaluates.
pub fn scaled_jacobian(case: &Case) -> Matrix {
    case.problem.jacobian(0.0, &case.y).scaled(case.h)
}
