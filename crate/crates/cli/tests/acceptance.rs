//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. References are built from scratch (no cache) so the
//! runtime bounds include them.

use std::collections::{BTreeMap, HashMap};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use expbench_core::harness::{
    build_grid, build_reference, convergence_study, order_study_setup, run_pairwise, summarize, ReferenceConfig, SchemeSummary,
};
use expbench_core::problems::{by_name, hires, smooth_test, OdeProblem};
use expbench_core::schemes::classical::rkf45_count;
use expbench_core::schemes::exponential::{step_with, Linearization};
use expbench_core::{expm, phi_functions, ConfiguredScheme, Family, Matrix, Scheme, SchemeOptions, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            details: Vec::new(),
        }
    }

    /// Records a check; a false `ok` fails the criterion.
    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn within(&mut self, elapsed: Duration, limit_secs: f64) {
        let s = elapsed.as_secs_f64();
        self.check(s < limit_secs, format!("runtime {s:.1} s (limit {limit_secs} s)"));
    }
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(20240611)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Matrix {
    Matrix::new(n, n, (0..n * n).map(|_| rng.gen_range(-bound..bound)).collect())
}

fn diff_rel(a: &Matrix, b: &Matrix) -> f64 {
    let mut d = a.clone();
    d.add_scaled(-1.0, b);
    d.norm_inf() / b.norm_inf().max(f64::MIN_POSITIVE)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn phi_series(a: &Matrix, k: usize) -> Matrix {
    let mut term = Matrix::identity(a.rows()).scaled(1.0 / factorial(k));
    let mut sum = term.clone();
    for j in 1..40 {
        term = a.matmul(&term).scaled(1.0 / (j + k) as f64);
        sum.add_scaled(1.0, &term);
    }
    sum
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let mut rng = rng();
    let mut worst_series: f64 = 0.0;
    let mut worst_recurrence: f64 = 0.0;
    for i in 0..100 {
        let n = 1 + i % 8;
        let mut a = random_matrix(&mut rng, n, 1.0);
        let s = a.norm_inf();
        if s > 1.0 {
            a = a.scaled(rng.gen_range(0.05..1.0) / s);
        }
        worst_series = worst_series.max(diff_rel(&expm(&a).unwrap(), &phi_series(&a, 0)));
        for (k, phi) in phi_functions(&a, 3).unwrap().iter().enumerate() {
            worst_series = worst_series.max(diff_rel(phi, &phi_series(&a, k)));
        }

        let b = random_matrix(&mut rng, n, 4.0);
        let phis = phi_functions(&b, 3).unwrap();
        for k in 0..3 {
            let mut rhs = b.matmul(&phis[k + 1]);
            rhs.add_scaled(1.0 / factorial(k), &Matrix::identity(n));
            let scale = phis[k].norm_inf().max(rhs.norm_inf()).max(1.0);
            let mut d = phis[k].clone();
            d.add_scaled(-1.0, &rhs);
            worst_recurrence = worst_recurrence.max(d.norm_inf() / scale);
        }
    }
    o.check(worst_series <= 1e-12, format!("expm, phi_1..3 vs series, ||A|| <= 1: worst relative error {worst_series:.2e} (<= 1e-12)"));
    o.check(
        worst_recurrence <= 1e-11,
        format!("phi_k = I/k! + A phi_(k+1) on 100 random matrices: worst {worst_recurrence:.2e} (<= 1e-11)"),
    );
    o.within(start.elapsed(), 5.0);
    o
}

// Classical counterparts on y' = f used by the degeneration check.
fn euler(p: &OdeProblem, y: &Vector, h: f64) -> Vector {
    y + &p.f(0.0, y).scaled(h)
}

fn heun(p: &OdeProblem, y: &Vector, h: f64) -> Vector {
    let k1 = p.f(0.0, y);
    let k2 = p.f(h, &(y + &k1.scaled(h)));
    y + &(&k1 + &k2).scaled(h / 2.0)
}

fn rk4(p: &OdeProblem, y: &Vector, h: f64) -> Vector {
    let k1 = p.f(0.0, y);
    let k2 = p.f(h / 2.0, &(y + &k1.scaled(h / 2.0)));
    let k3 = p.f(h / 2.0, &(y + &k2.scaled(h / 2.0)));
    let k4 = p.f(h, &(y + &k3.scaled(h)));
    y + &Vector::combine(&[(h / 6.0, &k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)])
}

fn ssprk3(p: &OdeProblem, y: &Vector, h: f64) -> Vector {
    let u1 = y + &p.f(0.0, y).scaled(h);
    let u2 = Vector::combine(&[(0.75, y), (0.25, &(&u1 + &p.f(0.0, &u1).scaled(h)))]);
    Vector::combine(&[(1.0 / 3.0, y), (2.0 / 3.0, &(&u2 + &p.f(0.0, &u2).scaled(h)))])
}

/// Three-stage SSP method with abscissas (0, 2/3, 2/3).
fn ssprk3_plus(p: &OdeProblem, y: &Vector, h: f64) -> Vector {
    let k1 = p.f(0.0, y);
    let k2 = p.f(0.0, &(y + &k1.scaled(2.0 / 3.0 * h)));
    let k3 = p.f(0.0, &(y + &Vector::combine(&[(2.0 / 9.0 * h, &k1), (4.0 / 9.0 * h, &k2)])));
    y + &Vector::combine(&[(h / 4.0, &k1), (3.0 * h / 16.0, &k2), (9.0 * h / 16.0, &k3)])
}

/// EPIRK3 with L = 0: a two-stage explicit RK method.
fn epirk3_rk(p: &OdeProblem, y: &Vector, h: f64) -> Vector {
    let f0 = p.f(0.0, y);
    let f1 = p.f(h / 2.0, &(y + &f0.scaled(h)));
    y + &Vector::combine(&[(2.0 * h / 3.0, &f0), (h / 3.0, &f1)])
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let mut rng = rng();
    let problems = [smooth_test(), hires()];
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for _ in 0..20 {
        for p in &problems {
            let y = Vector::from_slice(&(0..p.dim()).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<_>>());
            let h = rng.gen_range(0.01..0.3);
            let lin = Linearization::with_matrix(p, 0.0, &y, Matrix::zeros(p.dim(), p.dim()));
            for s in exponential() {
                let oracle = match s {
                    Scheme::IfEuler | Scheme::Etd1 | Scheme::Epi2 => euler(p, &y, h),
                    Scheme::If2Rk | Scheme::Etd2Rk | Scheme::Rkmk2e | Scheme::EtdRdp => heun(p, &y, h),
                    Scheme::Etd4Rk | Scheme::Etd1Rk4 => rk4(p, &y, h),
                    Scheme::Essprk => ssprk3(p, &y, h),
                    Scheme::EssprkPlus => ssprk3_plus(p, &y, h),
                    Scheme::Epirk3 => epirk3_rk(p, &y, h),
                    _ => unreachable!(),
                };
                let got = step_with(s, &lin, h, SchemeOptions::default().sign_mode).unwrap().y;
                let err = (&got - &oracle).norm_inf() / oracle.norm_inf().max(1.0);
                let w = worst.entry(s.name()).or_insert(0.0);
                *w = w.max(err);
            }
        }
    }
    for (name, err) in worst {
        o.check(err <= 1e-12, format!("{name:<12} with L = 0 vs classical counterpart: {err:.2e}"));
    }
    o.within(start.elapsed(), 1.0);
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let expected = [
        (Scheme::BackwardEuler, 1.0),
        (Scheme::Trapezoid, 2.0),
        (Scheme::Radau3, 3.0),
        (Scheme::Radau5, 5.0),
        (Scheme::Rk4, 4.0),
        (Scheme::IfEuler, 1.0),
        (Scheme::Etd1, 1.0),
        (Scheme::Etd2Rk, 2.0),
        (Scheme::Rkmk2e, 2.0),
        (Scheme::Epi2, 2.0),
        (Scheme::If2Rk, 2.0),
        (Scheme::EtdRdp, 2.0),
        (Scheme::Epirk3, 3.0),
        (Scheme::Etd4Rk, 4.0),
    ];
    let base = smooth_test();
    for (s, order) in expected {
        let (t_end, h) = order_study_setup(s.order());
        let p = base.clone().with_t_span((0.0, t_end));
        match convergence_study(&p, &ConfiguredScheme::from(s), &h) {
            Ok(study) => o.check(
                (study.slope - order).abs() <= 0.3,
                format!("{:<15} slope {:.3} (expected {order} +- 0.3)", s.name(), study.slope),
            ),
            Err(e) => o.check(false, format!("{:<15} study failed: {e}", s.name())),
        }
    }
    o.within(start.elapsed(), 30.0);
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    // f(y) = A (y - y*): y* is an equilibrium and N = -A y* is a nonzero constant.
    let a = Matrix::from_rows(&[&[-1.0, 0.4], &[0.2, -1.5]]);
    let ystar = Vector::from_slice(&[2.0, -1.0]);
    let (a2, ys) = (a.clone(), ystar.clone());
    let p = OdeProblem::new("affine", ystar.clone(), (0.0, 1.0), move |_, y| a2.mul_vec(&(y - &ys)), move |_, _| a.clone());
    let h = 1.0 / p.jacobian(0.0, &ystar).norm_inf();
    let lin = Linearization::new(&p, 0.0, &ystar);
    let mode = SchemeOptions::default().sign_mode;
    let drift = |s: Scheme| (&step_with(s, &lin, h, mode).unwrap().y - &ystar).norm_inf();
    for s in [Scheme::Etd1, Scheme::Etd2Rk, Scheme::Etd4Rk, Scheme::Rkmk2e, Scheme::Etd1Rk4, Scheme::Epi2, Scheme::Epirk3] {
        let d = drift(s);
        o.check(d <= 1e-11, format!("{:<10} keeps the equilibrium: drift {d:.2e} (<= 1e-11)", s.name()));
    }
    for s in [Scheme::IfEuler, Scheme::If2Rk] {
        let d = drift(s);
        o.check(d > 1e-6, format!("{:<10} moves off the equilibrium: drift {d:.2e} (> 1e-6)", s.name()));
    }
    o
}

/// Builds the reference and runs `schemes`; returns summaries and the time taken.
fn benchmark(model: &str, n: usize, schemes: &[Scheme]) -> (HashMap<Scheme, SchemeSummary>, Duration) {
    let start = Instant::now();
    let p = by_name(model).unwrap();
    let grid = build_grid(&p, n).unwrap();
    let reference = build_reference(&p, &grid, &ReferenceConfig::default()).expect("reference converges");
    let summaries = schemes
        .iter()
        .map(|&s| (s, summarize(&run_pairwise(&p, &reference, &ConfiguredScheme::from(s))).unwrap()))
        .collect();
    (summaries, start.elapsed())
}

fn exponential() -> impl Iterator<Item = Scheme> {
    Scheme::ALL.into_iter().filter(|s| s.family() == Family::Exponential)
}

fn describe(s: &SchemeSummary) -> String {
    format!("{:<15} diverged {:>5}, max {:.2e}, median {:.2e}", s.scheme, s.diverged, s.max_error, s.median_error)
}

fn unstable(s: &SchemeSummary) -> bool {
    s.diverged > 0 || s.max_error > 1e2
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let (sums, elapsed) = benchmark("vanderpol", 1555, &Scheme::ALL);
    for s in [Scheme::Rk4, Scheme::Etd4Rk, Scheme::Essprk] {
        o.check(unstable(&sums[&s]), format!("unstable: {}", describe(&sums[&s])));
    }
    for s in [Scheme::BackwardEuler, Scheme::IfEuler, Scheme::Etd2Rk, Scheme::Rkmk2e] {
        let x = &sums[&s];
        o.check(x.diverged == 0 && x.max_error < 10.0, format!("bounded (< 10): {}", describe(x)));
    }
    let radau5 = sums[&Scheme::Radau5].max_error;
    for s in exponential() {
        let x = &sums[&s];
        o.check(
            radau5 * 1e2 <= x.max_error,
            format!("radau5 max {radau5:.2e} at least 100x below {} max {:.2e}", s.name(), x.max_error),
        );
    }
    o.within(elapsed, 120.0);
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let set = [Scheme::Etd1, Scheme::IfEuler, Scheme::Etd2Rk, Scheme::Rkmk2e, Scheme::Epirk3];
    let mut schemes = vec![Scheme::BackwardEuler];
    schemes.extend(set);
    let (sums, elapsed) = benchmark("hires", 54785, &schemes);
    let be = sums[&Scheme::BackwardEuler].median_error;
    o.details.push(format!("     {}", describe(&sums[&Scheme::BackwardEuler])));
    for s in set {
        let x = &sums[&s];
        o.check(
            x.median_error >= 1e2 * be,
            format!("median ratio to backward_euler {:.2e} (>= 1e2): {}", x.median_error / be, describe(x)),
        );
    }
    o.within(elapsed, 300.0);
    o
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let (sums, elapsed) = benchmark("robertson", 21009, &Scheme::ALL);
    for (s, target) in [
        (Scheme::BackwardEuler, 1e-8),
        (Scheme::Trapezoid, 1e-12),
        (Scheme::Radau3, 1e-14),
        (Scheme::Radau5, 1e-14),
    ] {
        let x = &sums[&s];
        o.check(
            x.max_error >= target / 10.0 && x.max_error <= target * 10.0,
            format!("max within 10x of {target:.0e}: {}", describe(x)),
        );
    }
    let be = sums[&Scheme::BackwardEuler].max_error;
    o.check(be < 1e-7, format!("backward_euler max {be:.2e} below 1e-7"));
    for s in exponential() {
        let x = &sums[&s];
        if x.diverged > 0 {
            o.details.push(format!("     skipped (diverged): {}", describe(x)));
            continue;
        }
        o.check(
            x.max_error > 1e-6 && x.max_error <= 1e-2,
            format!("{} saturates in (1e-6, 1e-2] (1e-4 within two orders): max {:.2e}", s.name(), x.max_error),
        );
    }
    o.within(elapsed, 300.0);
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let schemes = [Scheme::EtdRdp, Scheme::Essprk, Scheme::EssprkPlus, Scheme::Rk4, Scheme::Etd4Rk];
    let (sums, _) = benchmark("robertson", 1314, &schemes);
    let rdp = &sums[&Scheme::EtdRdp];
    o.check(
        rdp.diverged == 0,
        format!("stable with sign mode {}: {}", SchemeOptions::default().sign_mode, describe(rdp)),
    );
    for s in &schemes[1..] {
        o.check(unstable(&sums[s]), format!("unstable: {}", describe(&sums[s])));
    }
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    match rkf45_count(&by_name("vanderpol").unwrap(), 1e-3, 1e-6) {
        Ok((_, stats)) => o.check(
            stats.accepted_steps > 100_000,
            format!(
                "rkf45 accepted {} steps (> 1e5), rejected {}, {} evaluations",
                stats.accepted_steps, stats.rejected_steps, stats.function_evaluations
            ),
        ),
        Err(e) => o.check(false, format!("rkf45 failed: {e}")),
    }
    o.within(start.elapsed(), 120.0);
    o
}

fn criterion_10() -> Outcome {
    let mut o = Outcome::new();
    let root = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = std::fs::remove_dir_all(&root);
    let mut outputs = Vec::new();
    for jobs in ["1", "3", "0"] {
        let out = root.join(format!("jobs{jobs}"));
        let status = Command::new(env!("CARGO_BIN_EXE_expbench"))
            .args(["bench", "--model", "robertson", "--n", "1314", "--jobs", jobs, "--out", out.to_str().unwrap()])
            .output()
            .expect("binary runs");
        o.check(status.status.success(), format!("bench --jobs {jobs} exits 0"));
        outputs.push(std::fs::read(out.join("robertson_n1314.csv")).unwrap_or_default());
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
    o.check(same, format!("CSV bytes identical across --jobs 1, 3, 0 ({} bytes)", outputs[0].len()));
    let _ = std::fs::remove_dir_all(&root);
    o
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("matrix functions vs series and recurrence", criterion_1),
        ("exponential schemes degenerate at L = 0", criterion_2),
        ("convergence orders on the smooth fixture", criterion_3),
        ("fixed points: ETD/EPI keep them, IF drifts", criterion_4),
        ("van der pol n=1555 qualitative behaviour", criterion_5),
        ("hires n=54785 saturation ordering", criterion_6),
        ("robertson n=21009 error levels", criterion_7),
        ("robertson n=1314 large-step stability", criterion_8),
        ("rkf45 step count on stiff van der pol", criterion_9),
        ("bench output independent of --jobs", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        for d in &outcome.details {
            println!("    {d}");
        }
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2}: {verdict}  {name} ({:.1} s)", i + 1, start.elapsed().as_secs_f64());
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
