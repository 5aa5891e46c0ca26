//! Explicit Runge-Kutta baselines: fixed-step RK4 and adaptive
//! Runge-Kutta-Fehlberg 4(5).

use serde::Serialize;
use thiserror::Error;

use super::{Scheme, StepError, StepOutput, StepStats};
use crate::linalg::Vector;
use crate::problems::OdeProblem;

/// Classical four-stage RK4.
pub fn rk4_step(p: &OdeProblem, t0: f64, y0: &Vector, h: f64) -> Result<StepOutput, StepError> {
    let half = 0.5 * h;
    let k1 = p.f(t0, y0);
    let k2 = p.f(t0 + half, &Vector::combine(&[(1.0, y0), (half, &k1)]));
    let k3 = p.f(t0 + half, &Vector::combine(&[(1.0, y0), (half, &k2)]));
    let k4 = p.f(t0 + h, &Vector::combine(&[(1.0, y0), (h, &k3)]));
    let y = Vector::combine(&[(1.0, y0), (h / 6.0, &k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)]);
    Ok(StepOutput {
        y,
        stats: StepStats { rhs_evals: 4, ..Default::default() },
    })
}

pub(crate) fn step(scheme: Scheme, p: &OdeProblem, t0: f64, y0: &Vector, h: f64) -> Result<StepOutput, StepError> {
    match scheme {
        Scheme::Rk4 => rk4_step(p, t0, y0, h),
        other => unreachable!("{other} is not a classical scheme"),
    }
}

// Fehlberg 4(5) coefficients.
const C: [f64; 6] = [0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0];
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AdaptiveStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Every right-hand side call, including those of rejected attempts.
    pub function_evaluations: usize,
    pub final_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &Vector)> {
        Some((*self.times.last()?, self.states.last()?))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptiveError {
    #[error("step size {h:e} fell below the minimum at t = {t}")]
    MinStepReached { t: f64, h: f64, stats: AdaptiveStats },
    #[error("tolerances must be positive")]
    InvalidTolerance,
}

/// One Fehlberg attempt: the fourth-order result and the scaled error
/// estimate `max_i |y5_i - y4_i| / (atol + rtol max(|y0_i|, |y4_i|))`.
pub fn rkf45_attempt(p: &OdeProblem, t: f64, y: &Vector, h: f64, rtol: f64, atol: f64) -> (Vector, f64) {
    let mut k: Vec<Vector> = Vec::with_capacity(6);
    for i in 0..6 {
        let mut yi = y.clone();
        for (j, kj) in k.iter().enumerate() {
            yi.axpy(h * A[i][j], kj);
        }
        k.push(p.f(t + C[i] * h, &yi));
    }
    let mut y4 = y.clone();
    let mut err = Vector::zeros(y.len());
    for i in 0..6 {
        y4.axpy(h * B4[i], &k[i]);
        err.axpy(h * (B5[i] - B4[i]), &k[i]);
    }
    let est = (0..y.len())
        .map(|i| err[i].abs() / (atol + rtol * y[i].abs().max(y4[i].abs())))
        .fold(0.0, f64::max);
    let est = if est.is_nan() { f64::INFINITY } else { est };
    (y4, est)
}

/// Integrates the whole time span with local error control, propagating
/// the fourth-order solution.
pub fn rkf45_integrate(p: &OdeProblem, rtol: f64, atol: f64) -> Result<(Trajectory, AdaptiveStats), AdaptiveError> {
    rkf45_run(p, rtol, atol, true)
}

/// Same as [`rkf45_integrate`] but keeps only the end point, for long runs
/// where only the counters matter.
pub fn rkf45_count(p: &OdeProblem, rtol: f64, atol: f64) -> Result<(Trajectory, AdaptiveStats), AdaptiveError> {
    rkf45_run(p, rtol, atol, false)
}

fn rkf45_run(p: &OdeProblem, rtol: f64, atol: f64, keep: bool) -> Result<(Trajectory, AdaptiveStats), AdaptiveError> {
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(AdaptiveError::InvalidTolerance);
    }
    let (t0, t1) = p.t_span();
    let span = t1 - t0;
    let h_min = 1e-14 * span;
    let mut stats = AdaptiveStats::default();
    let mut traj = Trajectory::default();
    let mut t = t0;
    let mut y = p.y0().clone();
    traj.times.push(t);
    traj.states.push(y.clone());

    // Initial step from the size of the derivative.
    let f0 = p.f(t, &y);
    stats.function_evaluations += 1;
    let scale = (0..y.len())
        .map(|i| f0[i].abs() / (atol + rtol * y[i].abs()))
        .fold(0.0, f64::max);
    let mut h = if scale > 0.0 { 0.01 / scale } else { 0.01 * span };
    h = h.clamp(h_min, span);

    while t < t1 {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let (y_new, est) = rkf45_attempt(p, t, &y, h, rtol, atol);
        stats.function_evaluations += 6;
        if est <= 1.0 {
            stats.accepted_steps += 1;
            t = if last { t1 } else { t + h };
            y = y_new;
            if keep {
                traj.times.push(t);
                traj.states.push(y.clone());
            }
        } else {
            stats.rejected_steps += 1;
        }
        let factor = if est == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * est.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        h *= factor;
        if h < h_min && t < t1 {
            stats.final_time = t;
            return Err(AdaptiveError::MinStepReached { t, h, stats });
        }
    }
    stats.final_time = t;
    if !keep {
        traj.times.push(t);
        traj.states.push(y);
    }
    Ok((traj, stats))
}
