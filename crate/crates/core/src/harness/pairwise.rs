use rayon::prelude::*;
use serde::Serialize;

use super::ReferenceTrajectory;
use crate::problems::OdeProblem;
use crate::schemes::{SingleStep, StepStats};

/// Outcome of one scheme step across one grid interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRecord {
    pub model: String,
    pub scheme: String,
    pub n: usize,
    pub t0: f64,
    pub t1: f64,
    pub h: f64,
    /// `|y1 - reference(t1)|` per component; `+inf` when diverged.
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub diverged: bool,
    pub stats: StepStats,
    /// Why the step failed, if it did.
    pub failure: Option<String>,
}

/// Steps `stepper` once across every grid interval, always starting from the
/// reference state. Failed or non-finite steps are recorded as diverged.
/// Pairs run in parallel on the current rayon pool; the result is in grid
/// order and does not depend on the pool size.
pub fn run_pairwise(p: &OdeProblem, reference: &ReferenceTrajectory, stepper: &dyn SingleStep) -> Vec<BenchmarkRecord> {
    let pts = reference.grid.points();
    let label = stepper.label();
    let n = reference.n();
    (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let (t0, t1) = (pts[i], pts[i + 1]);
            let h = t1 - t0;
            let target = &reference.states[i + 1];
            let (errors, stats, failure) = match stepper.step(p, t0, &reference.states[i], h) {
                Ok(out) if out.y.is_finite() => {
                    let e = out.y.abs_diff(target).into_vec();
                    (e, out.stats, None)
                }
                Ok(out) => (vec![f64::INFINITY; target.len()], out.stats, Some("non-finite result".to_string())),
                Err(err) => (vec![f64::INFINITY; target.len()], StepStats::default(), Some(err.to_string())),
            };
            let diverged = failure.is_some();
            BenchmarkRecord {
                model: p.name().to_string(),
                scheme: label.clone(),
                n,
                t0,
                t1,
                h,
                max_error: errors.iter().copied().fold(0.0, f64::max),
                errors,
                diverged,
                stats,
                failure,
            }
        })
        .collect()
}
