//! Explicit exponential integrators.
//!
//! Every step linearizes at its own start state: `L = J(t0, y0)` and the
//! remainder is `N(t, y) = f(t, y) - L y`. Quantities of the form
//! `(e^{hL} - I) L^{-1} v` are written as `h phi_1(hL) v` (and similarly for
//! higher powers of `L^{-1}`), so a singular `L` is never a problem.
//!
//! In the formulas below `Z = hL`.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Scheme, StepError, StepOutput, StepStats};
use crate::linalg::{lu_factor, LuFactors, Matrix, Vector};
use crate::matfun::{phi_functions, MatfunError};
use crate::problems::OdeProblem;

/// Sign convention for the ETD-RDP resolvents.
///
/// `PaperVerbatim` uses `(I + c h L)^{-1}` literally, which approximates
/// `e^{-hL}`. `Negated` uses `(I - c h L)^{-1}`, which approximates `e^{hL}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    PaperVerbatim,
    Negated,
}

impl SignMode {
    pub const ALL: [SignMode; 2] = [SignMode::PaperVerbatim, SignMode::Negated];

    pub fn name(self) -> &'static str {
        match self {
            SignMode::PaperVerbatim => "paper_verbatim",
            SignMode::Negated => "negated",
        }
    }

    fn sign(self) -> f64 {
        match self {
            SignMode::PaperVerbatim => 1.0,
            SignMode::Negated => -1.0,
        }
    }

    /// The default mode: whichever gives the better one-step result on
    /// `y' = -y`, `h = 0.1`, compared with `e^{-0.1}`.
    pub fn selected() -> SignMode {
        static SELECTED: OnceLock<SignMode> = OnceLock::new();
        *SELECTED.get_or_init(|| {
            let p = OdeProblem::linear("decay", Matrix::from_diag(&[-1.0]), Vector::from_slice(&[1.0]), (0.0, 1.0));
            let exact = (-0.1f64).exp();
            let err = |mode: SignMode| {
                let lin = Linearization::new(&p, 0.0, p.y0());
                match etd_rdp_step(&lin, 0.1, mode) {
                    Ok(out) => (out.y[0] - exact).abs(),
                    Err(_) => f64::INFINITY,
                }
            };
            let verbatim = err(SignMode::PaperVerbatim);
            let negated = err(SignMode::Negated);
            if negated < verbatim {
                SignMode::Negated
            } else {
                SignMode::PaperVerbatim
            }
        })
    }
}

impl fmt::Display for SignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SignMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SignMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown sign mode `{s}` (expected paper_verbatim or negated)"))
    }
}

/// `L`, `f0` and the remainder `N` at a step's start state.
pub struct Linearization<'a> {
    problem: &'a OdeProblem,
    t0: f64,
    y0: Vector,
    l: Matrix,
    f0: Vector,
    rhs_evals: Cell<usize>,
}

impl<'a> Linearization<'a> {
    /// Linearizes with the problem's own Jacobian.
    pub fn new(problem: &'a OdeProblem, t0: f64, y0: &Vector) -> Self {
        Self::with_matrix(problem, t0, y0, problem.jacobian(t0, y0))
    }

    /// Linearizes around an arbitrary `L`. Used to probe degenerate cases.
    pub fn with_matrix(problem: &'a OdeProblem, t0: f64, y0: &Vector, l: Matrix) -> Self {
        assert_eq!(l.rows(), y0.len(), "linearization has the wrong size");
        Linearization {
            problem,
            t0,
            y0: y0.clone(),
            f0: problem.f(t0, y0),
            l,
            rhs_evals: Cell::new(1),
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn y0(&self) -> &Vector {
        &self.y0
    }

    pub fn matrix(&self) -> &Matrix {
        &self.l
    }

    pub fn f0(&self) -> &Vector {
        &self.f0
    }

    pub fn f(&self, t: f64, y: &Vector) -> Vector {
        self.rhs_evals.set(self.rhs_evals.get() + 1);
        self.problem.f(t, y)
    }

    /// `N(t0, y0) = f0 - L y0`, without a new right-hand side evaluation.
    pub fn n0(&self) -> Vector {
        &self.f0 - &self.l.mul_vec(&self.y0)
    }

    /// `N(t, y) = f(t, y) - L y`.
    pub fn n(&self, t: f64, y: &Vector) -> Vector {
        let mut out = self.f(t, y);
        out -= &self.l.mul_vec(y);
        out
    }

    fn stats(&self, ws: &ExpStepWorkspace) -> StepStats {
        StepStats {
            rhs_evals: self.rhs_evals.get(),
            jacobian_evals: 1,
            newton_iterations: 0,
            matrix_functions: ws.matrix_functions,
        }
    }
}

/// Matrix functions of `c Z` for one step, cached by the scale factor `c`.
pub struct ExpStepWorkspace {
    z: Matrix,
    cache: Vec<(f64, Vec<Matrix>)>,
    matrix_functions: usize,
}

impl ExpStepWorkspace {
    pub fn new(lin: &Linearization, h: f64) -> Self {
        ExpStepWorkspace {
            z: lin.matrix().scaled(h),
            cache: Vec::new(),
            matrix_functions: 0,
        }
    }

    /// Number of augmented exponentials evaluated so far.
    pub fn matrix_functions(&self) -> usize {
        self.matrix_functions
    }

    fn phis(&mut self, c: f64, k: usize) -> Result<&[Matrix], MatfunError> {
        let pos = self.cache.iter().position(|(cc, m)| *cc == c && m.len() > k);
        let idx = match pos {
            Some(i) => i,
            None => {
                let phis = phi_functions(&self.z.scaled(c), k)?;
                self.matrix_functions += 1;
                self.cache.retain(|(cc, _)| *cc != c);
                self.cache.push((c, phis));
                self.cache.len() - 1
            }
        };
        Ok(&self.cache[idx].1)
    }

    /// `phi_k(c Z) v`, with `phi_0 = exp`.
    pub fn apply(&mut self, c: f64, k: usize, v: &Vector) -> Result<Vector, MatfunError> {
        Ok(self.phis(c, k)?[k].mul_vec(v))
    }

    /// Fetches `phi_0..=phi_k` of `c Z` in one evaluation when several are
    /// needed.
    pub fn prefetch(&mut self, c: f64, k: usize) -> Result<(), MatfunError> {
        self.phis(c, k).map(|_| ())
    }
}

type StepResult = Result<StepOutput, StepError>;

fn finish(lin: &Linearization, ws: &ExpStepWorkspace, y: Vector) -> StepResult {
    Ok(StepOutput { y, stats: lin.stats(ws) })
}

/// `y1 = e^Z (y0 + h N0)`
pub fn if_euler_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    let mut u = lin.y0().clone();
    u.axpy(h, &lin.n0());
    let y = ws.apply(1.0, 0, &u)?;
    finish(lin, &ws, y)
}

/// `y1 = e^Z y0 + h/2 [e^Z N0 + N(t0 + h, e^Z (y0 + h N0))]`
pub fn if2rk_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    let y0 = lin.y0();
    let n0 = lin.n0();
    let mut u = y0.clone();
    u.axpy(h, &n0);
    let pred = ws.apply(1.0, 0, &u)?;
    let n1 = lin.n(lin.t0() + h, &pred);
    let mut v = y0.clone();
    v.axpy(0.5 * h, &n0);
    let mut y = ws.apply(1.0, 0, &v)?;
    y.axpy(0.5 * h, &n1);
    finish(lin, &ws, y)
}

fn etd1_value(lin: &Linearization, ws: &mut ExpStepWorkspace, h: f64, n0: &Vector) -> Result<Vector, MatfunError> {
    let mut y = ws.apply(1.0, 0, lin.y0())?;
    y.axpy(h, &ws.apply(1.0, 1, n0)?);
    Ok(y)
}

/// `y1 = e^Z y0 + h phi_1(Z) N0`
pub fn etd1_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    let y = etd1_value(lin, &mut ws, h, &lin.n0())?;
    finish(lin, &ws, y)
}

/// ETD1 predictor `a`, then `y1 = a + h phi_2(Z) (N(t0 + h, a) - N0)`.
pub fn etd2rk_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    ws.prefetch(1.0, 2)?;
    let n0 = lin.n0();
    let a = etd1_value(lin, &mut ws, h, &n0)?;
    let dn = &lin.n(lin.t0() + h, &a) - &n0;
    let mut y = a;
    y.axpy(h, &ws.apply(1.0, 2, &dn)?);
    finish(lin, &ws, y)
}

/// Fourth-order ETD Runge-Kutta. The final combination
///
/// ```text
/// y1 = e^Z y0 + h [ (phi1 - 3 phi2 + 4 phi3) N0
///                 + 2 (phi2 - 2 phi3) (Na + Nb)
///                 + (4 phi3 - phi2) Nc ]
/// ```
///
/// is the `(T1 + T2 + T3) / (h^2 L^3)` form rewritten in phi-functions.
pub fn etd4rk_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    ws.prefetch(0.5, 1)?;
    ws.prefetch(1.0, 3)?;
    let (t0, y0) = (lin.t0(), lin.y0());
    let half = 0.5 * h;
    let n0 = lin.n0();
    let ey = ws.apply(0.5, 0, y0)?;

    let mut a = ey.clone();
    a.axpy(half, &ws.apply(0.5, 1, &n0)?);
    let na = lin.n(t0 + half, &a);

    let mut b = ey;
    b.axpy(half, &ws.apply(0.5, 1, &na)?);
    let nb = lin.n(t0 + half, &b);

    let mut c = ws.apply(0.5, 0, &a)?;
    let w = Vector::combine(&[(2.0, &nb), (-1.0, &n0)]);
    c.axpy(half, &ws.apply(0.5, 1, &w)?);
    let nc = lin.n(t0 + h, &c);

    let nab = &na + &nb;
    let g2 = Vector::combine(&[(-3.0, &n0), (2.0, &nab), (-1.0, &nc)]);
    let g3 = Vector::combine(&[(4.0, &n0), (-4.0, &nab), (4.0, &nc)]);
    let mut y = ws.apply(1.0, 0, y0)?;
    y.axpy(h, &ws.apply(1.0, 1, &n0)?);
    y.axpy(h, &ws.apply(1.0, 2, &g2)?);
    y.axpy(h, &ws.apply(1.0, 3, &g3)?);
    finish(lin, &ws, y)
}

/// Predictor `a = e^Z y0 + h phi_1(Z) N0`, then
/// `y1 = e^Z y0 + h phi_1(Z) (N(t0 + h, a) + N0) / 2`.
pub fn rkmk2e_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    ws.prefetch(1.0, 1)?;
    let n0 = lin.n0();
    let ey = ws.apply(1.0, 0, lin.y0())?;
    let mut a = ey.clone();
    a.axpy(h, &ws.apply(1.0, 1, &n0)?);
    let avg = Vector::combine(&[(0.5, &lin.n(lin.t0() + h, &a)), (0.5, &n0)]);
    let mut y = ey;
    y.axpy(h, &ws.apply(1.0, 1, &avg)?);
    finish(lin, &ws, y)
}

fn resolvent(z: &Matrix, c: f64) -> Result<LuFactors, StepError> {
    let mut m = Matrix::identity(z.rows());
    m.add_scaled(c, z);
    let lu = lu_factor(&m);
    if lu.is_singular() {
        Err(StepError::SingularResolvent)
    } else {
        Ok(lu)
    }
}

/// ETD with the rational approximation `9/(1 + z/3) - 8/(1 + z/4)`:
///
/// ```text
/// y*  = R_1 (y0 + h N0)
/// y1  = R_{1/3} (9 y0 + 2h N0 + h N(t0 + h, y*))
///     + R_{1/4} (-8 y0 - 3h/2 N0 - h/2 N(t0 + h, y*))
/// ```
///
/// with `R_c = (I + s c Z)^{-1}` and `s` set by the sign mode. Only linear
/// solves, no matrix exponential.
pub fn etd_rdp_step(lin: &Linearization, h: f64, mode: SignMode) -> StepResult {
    let z = lin.matrix().scaled(h * mode.sign());
    let solve = |lu: &LuFactors, v: &Vector| lu.solve(v).map_err(|_| StepError::SingularResolvent);
    let r1 = resolvent(&z, 1.0)?;
    let r3 = resolvent(&z, 1.0 / 3.0)?;
    let r4 = resolvent(&z, 0.25)?;

    let y0 = lin.y0();
    let n0 = lin.n0();
    let mut u = y0.clone();
    u.axpy(h, &n0);
    let ystar = solve(&r1, &u)?;
    let ns = lin.n(lin.t0() + h, &ystar);

    let p = Vector::combine(&[(9.0, y0), (2.0 * h, &n0), (h, &ns)]);
    let q = Vector::combine(&[(-8.0, y0), (-1.5 * h, &n0), (-0.5 * h, &ns)]);
    let y = &solve(&r3, &p)? + &solve(&r4, &q)?;
    Ok(StepOutput {
        y,
        stats: StepStats {
            rhs_evals: lin.rhs_evals.get(),
            jacobian_evals: 1,
            ..Default::default()
        },
    })
}

/// `y1 = y0 + h phi_1(Z) f0`
pub fn epi2_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    let mut y = lin.y0().clone();
    y.axpy(h, &ws.apply(1.0, 1, lin.f0())?);
    finish(lin, &ws, y)
}

/// Weight of the `h phi_2(Z) R(r1)` correction in EPIRK3.
///
/// The stage `r1 = y0 + h phi_1(Z/2) f0` agrees with `y0 + h f0` to first
/// order, and the third-order condition for a stage at node `c` is
/// `weight = 2 / (3 c^2)`, i.e. 2/3 here. A weight of 1/3 leaves the
/// `f''(f, f)` term unmatched and the method is only second order.
pub const EPIRK3_WEIGHT: f64 = 2.0 / 3.0;

/// ```text
/// r1 = y0 + h phi_1(Z/2) f0
/// y1 = y0 + h phi_1(Z) f0 + w h phi_2(Z) R(r1),   w = EPIRK3_WEIGHT
/// R(y) = f(y) - f0 - L (y - y0)
/// ```
pub fn epirk3_step(lin: &Linearization, h: f64) -> StepResult {
    epirk_step(lin, h, EPIRK3_WEIGHT)
}

fn epirk_step(lin: &Linearization, h: f64, weight: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    ws.prefetch(1.0, 2)?;
    let (t0, y0, f0) = (lin.t0(), lin.y0(), lin.f0());
    let mut r1 = y0.clone();
    r1.axpy(h, &ws.apply(0.5, 1, f0)?);
    let mut rem = lin.f(t0 + 0.5 * h, &r1);
    rem -= f0;
    rem -= &lin.matrix().mul_vec(&(&r1 - y0));
    let mut y = y0.clone();
    y.axpy(h, &ws.apply(1.0, 1, f0)?);
    y.axpy(weight * h, &ws.apply(1.0, 2, &rem)?);
    finish(lin, &ws, y)
}

/// ETD1 combined with RK4 corrections:
///
/// ```text
/// a = e^{Z/2} y0 + (h/2) phi_1(Z/2) N0      b = e^Z y0 + h phi_1(Z) N0
/// c = a + (h/2) (Na - N0)                   d = b + h e^{Z/2} (Nc - N0)
/// y1 = b + (h/3) e^{Z/2} (Na + Nc - 2 N0) + (h/6) (Nd - N0)
/// ```
pub fn etd1rk4_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    ws.prefetch(0.5, 1)?;
    ws.prefetch(1.0, 1)?;
    let (t0, y0) = (lin.t0(), lin.y0());
    let half = 0.5 * h;
    let n0 = lin.n0();

    let mut a = ws.apply(0.5, 0, y0)?;
    a.axpy(half, &ws.apply(0.5, 1, &n0)?);
    let mut b = ws.apply(1.0, 0, y0)?;
    b.axpy(h, &ws.apply(1.0, 1, &n0)?);

    let na = lin.n(t0 + half, &a);
    let mut c = a;
    c.axpy(half, &(&na - &n0));
    let nc = lin.n(t0 + half, &c);

    let mut d = b.clone();
    d.axpy(h, &ws.apply(0.5, 0, &(&nc - &n0))?);
    let nd = lin.n(t0 + h, &d);

    let w = Vector::combine(&[(1.0, &na), (1.0, &nc), (-2.0, &n0)]);
    let mut y = b;
    y.axpy(h / 3.0, &ws.apply(0.5, 0, &w)?);
    y.axpy(h / 6.0, &(&nd - &n0));
    finish(lin, &ws, y)
}

/// Exponential SSP RK3. All remainder evaluations use `t0`.
///
/// ```text
/// u1 = e^Z (y0 + h N(u=y0))
/// u2 = 3/4 e^{Z/2} y0 + 1/4 e^{-Z/2} (u1 + h N(u1))
/// y1 = 1/3 e^Z y0 + 2/3 e^{Z/2} (u2 + h N(u2))
/// ```
///
/// `e^{-Z/2}` is its own exponential; on stiff decay it overflows and the
/// step fails.
pub fn essprk_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    let (t0, y0) = (lin.t0(), lin.y0());

    let mut u1 = y0.clone();
    u1.axpy(h, &lin.n0());
    let u1 = ws.apply(1.0, 0, &u1)?;

    let mut v = u1.clone();
    v.axpy(h, &lin.n(t0, &u1));
    let mut u2 = ws.apply(0.5, 0, y0)?.scaled(0.75);
    u2.axpy(0.25, &ws.apply(-0.5, 0, &v)?);

    let mut w = u2.clone();
    w.axpy(h, &lin.n(t0, &u2));
    let mut y = ws.apply(1.0, 0, y0)?.scaled(1.0 / 3.0);
    y.axpy(2.0 / 3.0, &ws.apply(0.5, 0, &w)?);
    finish(lin, &ws, y)
}

/// Exponential SSP RK with nondecreasing abscissas `c = (0, 2/3, 2/3)`. All
/// remainder evaluations use `t0`.
///
/// ```text
/// u1 = e^{2Z/3} (1/2 y0 + 1/2 (y0 + 4/3 h N(y0)))
/// u2 = 2/3 e^{2Z/3} y0 + 1/3 (u1 + 4/3 h N(u1))
/// y1 = e^Z (59/128 y0 + 15/128 (y0 + 4/3 h N(y0)))
///    + 27/64 e^{Z/3} (u2 + 4/3 h N(u2))
/// ```
///
/// `u1` already sits at abscissa 2/3, so only the `y0` term of `u2` is
/// propagated. Applying `e^{2Z/3}` to the whole bracket instead
/// propagates `u1` twice and the method loses consistency
/// for any nonzero `L`.
pub fn essprk_plus_step(lin: &Linearization, h: f64) -> StepResult {
    let mut ws = ExpStepWorkspace::new(lin, h);
    let (t0, y0) = (lin.t0(), lin.y0());
    let k = 4.0 / 3.0 * h;

    let mut e0 = y0.clone();
    e0.axpy(k, &lin.n0());

    let u1 = ws.apply(2.0 / 3.0, 0, &Vector::combine(&[(0.5, y0), (0.5, &e0)]))?;
    let mut e1 = u1.clone();
    e1.axpy(k, &lin.n(t0, &u1));

    let mut u2 = ws.apply(2.0 / 3.0, 0, y0)?.scaled(2.0 / 3.0);
    u2.axpy(1.0 / 3.0, &e1);
    let mut e2 = u2.clone();
    e2.axpy(k, &lin.n(t0, &u2));

    let mut y = ws.apply(1.0, 0, &Vector::combine(&[(59.0 / 128.0, y0), (15.0 / 128.0, &e0)]))?;
    y.axpy(27.0 / 64.0, &ws.apply(1.0 / 3.0, 0, &e2)?);
    finish(lin, &ws, y)
}

/// Runs `scheme` from a given linearization.
pub fn step_with(scheme: Scheme, lin: &Linearization, h: f64, mode: SignMode) -> StepResult {
    match scheme {
        Scheme::IfEuler => if_euler_step(lin, h),
        Scheme::If2Rk => if2rk_step(lin, h),
        Scheme::Etd1 => etd1_step(lin, h),
        Scheme::Etd2Rk => etd2rk_step(lin, h),
        Scheme::Etd4Rk => etd4rk_step(lin, h),
        Scheme::Rkmk2e => rkmk2e_step(lin, h),
        Scheme::EtdRdp => etd_rdp_step(lin, h, mode),
        Scheme::Epi2 => epi2_step(lin, h),
        Scheme::Epirk3 => epirk3_step(lin, h),
        Scheme::Etd1Rk4 => etd1rk4_step(lin, h),
        Scheme::Essprk => essprk_step(lin, h),
        Scheme::EssprkPlus => essprk_plus_step(lin, h),
        other => unreachable!("{other} is not an exponential scheme"),
    }
}

pub(crate) fn step(scheme: Scheme, p: &OdeProblem, t0: f64, y0: &Vector, h: f64, mode: SignMode) -> StepResult {
    let lin = Linearization::new(p, t0, y0);
    step_with(scheme, &lin, h, mode)
}
