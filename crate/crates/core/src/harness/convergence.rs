use serde::Serialize;

use super::HarnessError;
use crate::problems::OdeProblem;
use crate::schemes::SingleStep;

/// Errors below this are treated as rounding noise.
const ERROR_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub scheme: String,
    /// Step sizes actually used (the span divided into whole steps).
    pub h_values: Vec<f64>,
    /// Max-norm global error at the end of the span.
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Step sizes `2^-1, ..., 2^-8`: eight values over a little more than two
/// decades.
pub fn standard_h_list() -> Vec<f64> {
    (1..=8).map(|k| 0.5f64.powi(k)).collect()
}

/// End time and step sizes for an order study of a scheme with the given
/// formal order on the smooth fixture. Fifth-order errors fall to the
/// rounding floor within two decades of `h` on the unit interval, so those
/// use a longer span and larger steps. First- and second-order errors stay
/// far above it, so those use `2^-3, ..., 2^-10` to keep the large-step
/// transient (visible for rational exponential approximations) out of the fit.
pub fn order_study_setup(order: u32) -> (f64, Vec<f64>) {
    match order {
        0..=2 => (1.0, (3..=10).map(|k| 0.5f64.powi(k)).collect()),
        3 | 4 => (1.0, standard_h_list()),
        _ => (10.0, (0..8).map(|k| 0.5f64.powi(k)).collect()),
    }
}

/// Least-squares slope of `log(errors)` against `log(h)`.
pub fn fit_slope(h: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(h.len(), errors.len());
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Integrates the problem's whole span with each fixed step size and fits
/// the observed global order against the closed-form solution.
pub fn convergence_study(p: &OdeProblem, stepper: &dyn SingleStep, h_list: &[f64]) -> Result<ConvergenceStudy, HarnessError> {
    let (t0, t1) = p.t_span();
    let span = t1 - t0;
    let exact = p
        .exact(t1)
        .ok_or_else(|| HarnessError::InvalidStudy(format!("{} has no closed-form solution", p.name())))?;
    if h_list.len() < 4 {
        return Err(HarnessError::InvalidStudy("need at least 4 step sizes".into()));
    }
    let (lo, hi) = h_list.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &h| (lo.min(h), hi.max(h)));
    if !(lo > 0.0) || hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(HarnessError::InvalidStudy("step sizes must be positive and span two decades".into()));
    }
    if hi > span {
        return Err(HarnessError::InvalidStudy(format!("step {hi} is longer than the span {span}")));
    }

    let mut h_values = Vec::with_capacity(h_list.len());
    let mut errors = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let steps = (span / h).round().max(1.0) as usize;
        let h_eff = span / steps as f64;
        let mut y = p.y0().clone();
        for k in 0..steps {
            let t = t0 + k as f64 * h_eff;
            y = stepper
                .step(p, t, &y, h_eff)
                .map_err(|source| HarnessError::StepFailed { h: h_eff, source })?
                .y;
        }
        let err = (&y - &exact).norm_inf();
        if err < ERROR_FLOOR {
            return Err(HarnessError::DegenerateFit { h: h_eff, error: err });
        }
        h_values.push(h_eff);
        errors.push(err);
    }
    Ok(ConvergenceStudy {
        scheme: stepper.label(),
        slope: fit_slope(&h_values, &errors),
        h_values,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::smooth_test;
    use crate::schemes::{ConfiguredScheme, Scheme};

    #[test]
    fn slope_of_exact_power_law() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powi(3)).collect();
        assert!((fit_slope(&h, &e) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rk4_and_backward_euler_orders() {
        let p = smooth_test();
        let rk4 = convergence_study(&p, &ConfiguredScheme::from(Scheme::Rk4), &standard_h_list()).unwrap();
        assert!((rk4.slope - 4.0).abs() <= 0.3, "{rk4:?}");
        let be = convergence_study(&p, &ConfiguredScheme::from(Scheme::BackwardEuler), &standard_h_list()).unwrap();
        assert!((be.slope - 1.0).abs() <= 0.3, "{be:?}");
        let ife = convergence_study(&p, &ConfiguredScheme::from(Scheme::IfEuler), &standard_h_list()).unwrap();
        assert!((ife.slope - 1.0).abs() <= 0.3, "{ife:?}");
    }

    #[test]
    fn study_preconditions() {
        let p = smooth_test();
        let s = ConfiguredScheme::from(Scheme::Rk4);
        assert!(matches!(convergence_study(&p, &s, &[0.1, 0.05, 0.025]), Err(HarnessError::InvalidStudy(_))));
        assert!(matches!(
            convergence_study(&p, &s, &[0.1, 0.05, 0.025, 0.0125]),
            Err(HarnessError::InvalidStudy(_))
        ));
        let tiny = [1e-2, 5e-3, 2.5e-3, 1e-4];
        assert!(matches!(
            convergence_study(&p, &ConfiguredScheme::from(Scheme::Radau5), &tiny),
            Err(HarnessError::DegenerateFit { .. })
        ));
    }
}
