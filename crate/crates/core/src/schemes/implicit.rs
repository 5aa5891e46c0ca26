//! Backward Euler, trapezoid, and Radau IIA (3- and 5th-order) single steps.
//!
//! Stage equations are solved with full Newton: the Jacobian of the residual
//! is re-evaluated and refactored on every iteration. Each step starts its
//! iteration from `y0` (all stages initialized to `y0` for Radau).

use serde::{Deserialize, Serialize};

use super::{Scheme, StepError, StepOutput, StepStats};
use crate::linalg::{lu_factor, Matrix, Vector};
use crate::problems::OdeProblem;

/// Stopping rule for the Newton iteration: stop once
/// `||G(x)||_inf <= abs_tol + rel_tol * ||x||_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_iters: 50,
        }
    }
}

impl NewtonConfig {
    pub fn tolerance(&self, x: &Vector) -> f64 {
        self.abs_tol + self.rel_tol * x.norm_inf()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err("Newton tolerances must be positive".into());
        }
        if self.max_iters == 0 {
            return Err("Newton needs at least one iteration".into());
        }
        Ok(())
    }
}

/// Runge-Kutta coefficients `(A, b, c)` for an `s`-stage method.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub order: u32,
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Two-stage Radau IIA, order 3.
    pub fn radau3() -> Self {
        ButcherTableau {
            name: "radau3",
            order: 3,
            a: Matrix::from_rows(&[&[5.0 / 12.0, -1.0 / 12.0], &[3.0 / 4.0, 1.0 / 4.0]]),
            b: vec![3.0 / 4.0, 1.0 / 4.0],
            c: vec![1.0 / 3.0, 1.0],
        }
    }

    /// Three-stage Radau IIA, order 5.
    pub fn radau5() -> Self {
        let s6 = 6f64.sqrt();
        let b = vec![(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0];
        ButcherTableau {
            name: "radau5",
            order: 5,
            a: Matrix::from_rows(&[
                &[(88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0],
                &[(296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0],
                &b,
            ]),
            c: vec![(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0],
            b,
        }
    }

    /// The last stage equals the step result (`b` is the last row of `A`).
    pub fn is_stiffly_accurate(&self) -> bool {
        let s = self.stages();
        self.a.row(s - 1).iter().zip(&self.b).all(|(a, b)| a == b)
    }
}

/// Smallest step fraction tried by the line search.
const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// Substep counts tried, in order, when seeding Newton from the flow.
const SEED_SUBSTEPS: [usize; 2] = [32, 512];

/// Solves the stage system `G(x) = 0`.
///
/// Damped Newton from `x0` is tried first. If it fails to converge the
/// iteration is repeated undamped, which can step across a nonzero local
/// minimum of `||G||` where any descent method stalls, and then both variants
/// are restarted from `seed(k)`, an approximation of the exact flow built
/// from `k` small backward Euler substeps. The fallbacks only matter on steps
/// that jump across a fast transient: there the implicit equations can lose
/// the root near `x0` and keep only one far away.
fn solve<G, J, S>(
    x0: Vector,
    cfg: &NewtonConfig,
    residual: G,
    jacobian: J,
    seed: S,
    stats: &mut StepStats,
) -> Result<Vector, StepError>
where
    G: Fn(&Vector, &mut StepStats) -> Vector,
    J: Fn(&Vector, &mut StepStats) -> Matrix,
    S: Fn(usize, &mut StepStats) -> Option<Vector>,
{
    let first = match newton(x0.clone(), cfg, true, &residual, &jacobian, stats) {
        Ok(x) => return Ok(x),
        Err(e @ StepError::NonConvergence { .. }) => e,
        Err(e) => return Err(e),
    };
    if let Ok(x) = newton(x0, cfg, false, &residual, &jacobian, stats) {
        return Ok(x);
    }
    for k in SEED_SUBSTEPS {
        let Some(guess) = seed(k, stats) else { continue };
        for damped in [true, false] {
            if let Ok(x) = newton(guess.clone(), cfg, damped, &residual, &jacobian, stats) {
                return Ok(x);
            }
        }
    }
    Err(first)
}

/// States of `k` uniform backward Euler substeps from `(t0, y0)` over `h`,
/// sampled at the step fractions `fracs` (rounded to the nearest substep).
/// Each substep uses plain Newton from the previous state.
#[allow(clippy::too_many_arguments)]
fn flow_seed(
    p: &OdeProblem,
    t0: f64,
    y0: &Vector,
    h: f64,
    k: usize,
    fracs: &[f64],
    cfg: &NewtonConfig,
    stats: &mut StepStats,
) -> Option<Vec<Vector>> {
    let dt = h / k as f64;
    let marks: Vec<usize> = fracs.iter().map(|c| ((c * k as f64).round() as usize).clamp(1, k)).collect();
    let mut out = vec![Vector::zeros(0); fracs.len()];
    let mut y = y0.clone();
    for i in 1..=k {
        let t1 = t0 + i as f64 * dt;
        let prev = y.clone();
        y = newton(
            prev.clone(),
            cfg,
            true,
            &|y: &Vector, st: &mut StepStats| {
                st.rhs_evals += 1;
                let mut r = y - &prev;
                r.axpy(-dt, &p.f(t1, y));
                r
            },
            &|y: &Vector, st: &mut StepStats| {
                st.jacobian_evals += 1;
                let mut m = Matrix::identity(y.len());
                m.add_scaled(-dt, &p.jacobian(t1, y));
                m
            },
            stats,
        )
        .ok()?;
        for (o, &m) in out.iter_mut().zip(&marks) {
            if m == i {
                *o = y.clone();
            }
        }
    }
    Some(out)
}

/// Full Newton on `G(x) = 0`, optionally with a backtracking line search on
/// `||G||_inf`. Near a solution the full step is always accepted.
fn newton<G, J>(
    mut x: Vector,
    cfg: &NewtonConfig,
    damped: bool,
    residual: &G,
    jacobian: &J,
    stats: &mut StepStats,
) -> Result<Vector, StepError>
where
    G: Fn(&Vector, &mut StepStats) -> Vector,
    J: Fn(&Vector, &mut StepStats) -> Matrix,
{
    let mut r = residual(&x, stats);
    for iter in 0..=cfg.max_iters {
        let rnorm = r.norm_inf();
        if !rnorm.is_finite() || !x.is_finite() {
            return Err(StepError::NonConvergence {
                iterations: iter,
                residual: rnorm,
                last_iterate: x,
            });
        }
        if rnorm <= cfg.tolerance(&x) {
            return Ok(x);
        }
        if iter == cfg.max_iters {
            return Err(StepError::NonConvergence {
                iterations: iter,
                residual: rnorm,
                last_iterate: x,
            });
        }
        let lu = lu_factor(&jacobian(&x, stats));
        let dx = lu.solve(&r).map_err(|_| StepError::SingularNewtonMatrix)?;
        let mut lambda = 1.0;
        loop {
            let mut trial = x.clone();
            trial.axpy(-lambda, &dx);
            let rt = residual(&trial, stats);
            let rt_norm = rt.norm_inf();
            if !damped || (rt_norm.is_finite() && rt_norm <= (1.0 - 1e-4 * lambda) * rnorm) || lambda <= MIN_DAMPING {
                x = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
        stats.newton_iterations += 1;
    }
    unreachable!()
}

/// `y1 = y0 + h f(t0 + h, y1)`
pub fn backward_euler_step(
    p: &OdeProblem,
    t0: f64,
    y0: &Vector,
    h: f64,
    cfg: &NewtonConfig,
) -> Result<StepOutput, StepError> {
    let t1 = t0 + h;
    let mut stats = StepStats::default();
    let y = solve(
        y0.clone(),
        cfg,
        |y, st| {
            st.rhs_evals += 1;
            let mut r = y - y0;
            r.axpy(-h, &p.f(t1, y));
            r
        },
        |y, st| {
            st.jacobian_evals += 1;
            let mut m = Matrix::identity(y.len());
            m.add_scaled(-h, &p.jacobian(t1, y));
            m
        },
        |k, st| flow_seed(p, t0, y0, h, k, &[1.0], cfg, st).map(|mut v| v.remove(0)),
        &mut stats,
    )?;
    Ok(StepOutput { y, stats })
}

/// `y1 = y0 + h/2 (f(t0, y0) + f(t0 + h, y1))`
pub fn trapezoid_step(
    p: &OdeProblem,
    t0: f64,
    y0: &Vector,
    h: f64,
    cfg: &NewtonConfig,
) -> Result<StepOutput, StepError> {
    let t1 = t0 + h;
    let mut stats = StepStats { rhs_evals: 1, ..Default::default() };
    let f0 = p.f(t0, y0);
    let y = solve(
        y0.clone(),
        cfg,
        |y, st| {
            st.rhs_evals += 1;
            let mut r = y - y0;
            r.axpy(-0.5 * h, &f0);
            r.axpy(-0.5 * h, &p.f(t1, y));
            r
        },
        |y, st| {
            st.jacobian_evals += 1;
            let mut m = Matrix::identity(y.len());
            m.add_scaled(-0.5 * h, &p.jacobian(t1, y));
            m
        },
        |k, st| flow_seed(p, t0, y0, h, k, &[1.0], cfg, st).map(|mut v| v.remove(0)),
        &mut stats,
    )?;
    Ok(StepOutput { y, stats })
}

/// One step of an implicit Runge-Kutta method given by `tab`.
///
/// Stages are stacked into a single `s*n` unknown and solved with the exact
/// block Jacobian `I - h (a_ij J(t0 + c_j h, Y_j))`. For stiffly accurate
/// tableaus the step result is the last stage, which equals
/// `y0 + h sum_j b_j f(Y_j)` at convergence without amplifying the Newton
/// residual through `h f`.
pub fn radau_step(
    p: &OdeProblem,
    t0: f64,
    y0: &Vector,
    h: f64,
    tab: &ButcherTableau,
    cfg: &NewtonConfig,
) -> Result<StepOutput, StepError> {
    let n = y0.len();
    let s = tab.stages();
    let times: Vec<f64> = tab.c.iter().map(|c| t0 + c * h).collect();
    let stage = |z: &Vector, i: usize| Vector::from_slice(&z[i * n..(i + 1) * n]);

    let mut z0 = Vector::zeros(s * n);
    for i in 0..s {
        z0[i * n..(i + 1) * n].copy_from_slice(y0);
    }

    let mut stats = StepStats::default();
    let z = solve(
        z0,
        cfg,
        |z, st| {
            st.rhs_evals += s;
            let fs: Vec<Vector> = (0..s).map(|j| p.f(times[j], &stage(z, j))).collect();
            let mut r = Vector::zeros(s * n);
            for i in 0..s {
                for k in 0..n {
                    let mut acc = 0.0;
                    for (j, fj) in fs.iter().enumerate() {
                        acc += tab.a[(i, j)] * fj[k];
                    }
                    r[i * n + k] = z[i * n + k] - y0[k] - h * acc;
                }
            }
            r
        },
        |z, st| {
            st.jacobian_evals += s;
            let mut m = Matrix::identity(s * n);
            for j in 0..s {
                let jac = p.jacobian(times[j], &stage(z, j));
                for i in 0..s {
                    m.set_block(i * n, j * n, &{
                        let mut b = jac.scaled(-h * tab.a[(i, j)]);
                        if i == j {
                            b.add_scaled(1.0, &Matrix::identity(n));
                        }
                        b
                    });
                }
            }
            m
        },
        |k, st| {
            let stages = flow_seed(p, t0, y0, h, k, &tab.c, cfg, st)?;
            let mut z = Vector::zeros(s * n);
            for (i, y) in stages.iter().enumerate() {
                z[i * n..(i + 1) * n].copy_from_slice(y);
            }
            Some(z)
        },
        &mut stats,
    )?;

    let y = if tab.is_stiffly_accurate() {
        stage(&z, s - 1)
    } else {
        let mut y = y0.clone();
        for j in 0..s {
            stats.rhs_evals += 1;
            y.axpy(h * tab.b[j], &p.f(times[j], &stage(&z, j)));
        }
        y
    };
    Ok(StepOutput { y, stats })
}

pub(crate) fn step(
    scheme: Scheme,
    p: &OdeProblem,
    t0: f64,
    y0: &Vector,
    h: f64,
    cfg: &NewtonConfig,
) -> Result<StepOutput, StepError> {
    match scheme {
        Scheme::BackwardEuler => backward_euler_step(p, t0, y0, h, cfg),
        Scheme::Trapezoid => trapezoid_step(p, t0, y0, h, cfg),
        Scheme::Radau3 => radau_step(p, t0, y0, h, &ButcherTableau::radau3(), cfg),
        Scheme::Radau5 => radau_step(p, t0, y0, h, &ButcherTableau::radau5(), cfg),
        other => unreachable!("{other} is not an implicit scheme"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(lambda: f64) -> OdeProblem {
        OdeProblem::linear("scalar", Matrix::from_diag(&[lambda]), Vector::from_slice(&[1.0]), (0.0, 10.0))
    }

    fn order_conditions(tab: &ButcherTableau) -> Vec<(String, f64, f64)> {
        let s = tab.stages();
        let (a, b, c) = (&tab.a, &tab.b, &tab.c);
        let mut conds = vec![("sum b".into(), b.iter().sum::<f64>(), 1.0)];
        for i in 0..s {
            conds.push((format!("row {i}"), a.row(i).iter().sum::<f64>(), c[i]));
        }
        // Bushy-tree conditions sum b c^(k-1) = 1/k and the tall tree of
        // order 3, which together pin orders up to 3; the simplifying
        // assumptions B(2s-1), C(s) cover the rest for collocation methods.
        for k in 1..=(2 * s - 1) {
            let lhs: f64 = (0..s).map(|j| b[j] * c[j].powi(k as i32 - 1)).sum();
            conds.push((format!("B({k})"), lhs, 1.0 / k as f64));
        }
        for i in 0..s {
            for k in 1..=s {
                let lhs: f64 = (0..s).map(|j| a[(i, j)] * c[j].powi(k as i32 - 1)).sum();
                conds.push((format!("C({i},{k})"), lhs, c[i].powi(k as i32) / k as f64));
            }
        }
        let tall: f64 = (0..s).flat_map(|i| (0..s).map(move |j| (i, j))).map(|(i, j)| b[i] * a[(i, j)] * c[j]).sum();
        conds.push(("sum b a c".into(), tall, 1.0 / 6.0));
        conds
    }

    #[test]
    fn radau_tableaus_satisfy_order_conditions() {
        for tab in [ButcherTableau::radau3(), ButcherTableau::radau5()] {
            for (label, lhs, rhs) in order_conditions(&tab) {
                let tol = if label == "sum b" || label.starts_with("row") { 1e-14 } else { 1e-12 };
                assert!((lhs - rhs).abs() <= tol, "{} {label}: {lhs} vs {rhs}", tab.name);
            }
            assert!(tab.is_stiffly_accurate());
        }
    }

    #[test]
    fn backward_euler_scalar_closed_form() {
        let p = scalar(-1.0);
        let out = backward_euler_step(&p, 0.0, p.y0(), 0.5, &NewtonConfig::default()).unwrap();
        assert_relative_eq!(out.y[0], 1.0 / 1.5, max_relative = 1e-14);
    }

    #[test]
    fn trapezoid_scalar_closed_form() {
        let p = scalar(-1.0);
        let out = trapezoid_step(&p, 0.0, p.y0(), 0.5, &NewtonConfig::default()).unwrap();
        assert_relative_eq!(out.y[0], 0.6, max_relative = 1e-14);
    }

    #[test]
    fn trapezoid_one_step_on_smooth_test() {
        let p = crate::problems::smooth_test();
        let out = trapezoid_step(&p, 0.0, p.y0(), 0.1, &NewtonConfig::default()).unwrap();
        let err = (&out.y - &p.exact(0.1).unwrap()).norm_inf();
        assert!(err <= 5e-4, "{err}");
    }

    #[test]
    fn backward_euler_robertson_first_step() {
        let p = crate::problems::robertson();
        let h = 1e-5;
        let out = backward_euler_step(&p, 1e-5, p.y0(), h, &NewtonConfig::default()).unwrap();
        let taylor = Vector::from_slice(&[1.0 - 0.04 * h, 0.04 * h, 0.0]);
        assert!((&out.y - &taylor).norm_inf() < 1e-9);
        let f = p.f(2e-5, &out.y);
        let mut r = &out.y - p.y0();
        r.axpy(-h, &f);
        assert!(r.norm_inf() <= 1e-12 + 1e-10 * out.y.norm_inf());
    }

    #[test]
    fn radau5_scalar_step_is_close_to_exact() {
        // R(z) = (1 + 2z/5 + z^2/20) / (1 - 3z/5 + 3z^2/20 - z^3/60)
        let p = scalar(-10.0);
        let out = radau_step(&p, 0.0, p.y0(), 0.1, &ButcherTableau::radau5(), &NewtonConfig::default()).unwrap();
        let z: f64 = -1.0;
        let r = (1.0 + 2.0 * z / 5.0 + z * z / 20.0) / (1.0 - 3.0 * z / 5.0 + 3.0 * z * z / 20.0 - z.powi(3) / 60.0);
        assert!((out.y[0] - r).abs() <= 1e-12);
        assert!((out.y[0] - z.exp()).abs() <= 1e-4);
    }

    #[test]
    fn radau_stability_functions() {
        // R(z) for Radau IIA: (1 + z/3) / (1 - 2z/3 + z^2/6) for s = 2.
        let z: f64 = -2.5;
        let p = scalar(z);
        let out = radau_step(&p, 0.0, p.y0(), 1.0, &ButcherTableau::radau3(), &NewtonConfig::default()).unwrap();
        let r3 = (1.0 + z / 3.0) / (1.0 - 2.0 * z / 3.0 + z * z / 6.0);
        assert_relative_eq!(out.y[0], r3, max_relative = 1e-12);
    }

    #[test]
    fn a_stability_smoke() {
        let cfg = NewtonConfig::default();
        for k in 0..=60 {
            let z = -(10f64.powf(k as f64 / 10.0) - 1.0);
            let p = scalar(z);
            for out in [
                backward_euler_step(&p, 0.0, p.y0(), 1.0, &cfg).unwrap(),
                trapezoid_step(&p, 0.0, p.y0(), 1.0, &cfg).unwrap(),
            ] {
                assert!(out.y[0].abs() <= 1.0 + 1e-12, "z = {z}: {}", out.y[0]);
            }
        }
    }

    #[test]
    fn newton_budget_exhaustion_reports_last_iterate() {
        let p = scalar(-1.0);
        let cfg = NewtonConfig { max_iters: 1, abs_tol: 1e-300, rel_tol: 1e-300 };
        let vdp = crate::problems::vanderpol();
        match backward_euler_step(&vdp, 0.0, vdp.y0(), 0.8, &cfg) {
            Err(StepError::NonConvergence { iterations, last_iterate, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last_iterate.len(), 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        // A linear problem converges after one solve.
        let ok = backward_euler_step(&p, 0.0, p.y0(), 0.5, &NewtonConfig { max_iters: 1, ..Default::default() });
        assert!(ok.is_ok());
    }

    #[test]
    fn singular_newton_matrix_is_reported() {
        // I - h*J = 0 for J = I and h = 1.
        let p = OdeProblem::new(
            "sing",
            Vector::from_slice(&[1.0]),
            (0.0, 1.0),
            |_, y| Vector::from_slice(&[y[0] + 1.0]),
            |_, _| Matrix::identity(1),
        );
        assert_eq!(
            backward_euler_step(&p, 0.0, p.y0(), 1.0, &NewtonConfig::default()),
            Err(StepError::SingularNewtonMatrix)
        );
    }
}
