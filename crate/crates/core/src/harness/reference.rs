use serde::{Deserialize, Serialize};

use super::{Grid, HarnessError};
use crate::linalg::Vector;
use crate::problems::OdeProblem;
use crate::schemes::implicit::{radau_step, ButcherTableau, NewtonConfig};
use crate::schemes::StepError;

/// Settings for the fixed-substep Radau5 reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    /// Radau5 substeps per grid interval before any refinement.
    pub substeps: usize,
    /// Accept an interval once the `m` and `2m` results differ by at most
    /// `tolerance * (1 + max |y|)`.
    pub tolerance: f64,
    /// How many times an interval may double its substep count.
    pub max_refinements: u32,
    pub newton: NewtonConfig,
}

impl ReferenceConfig {
    pub fn with_substeps(substeps: usize) -> Self {
        ReferenceConfig {
            substeps,
            ..Default::default()
        }
    }
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            substeps: crate::problems::DEFAULT_REFERENCE_SUBSTEPS,
            tolerance: 1e-10,
            max_refinements: 10,
            newton: NewtonConfig {
                abs_tol: 1e-14,
                rel_tol: 1e-13,
                max_iters: 50,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub grid: Grid,
    pub states: Vec<Vector>,
    /// Base substep count `m`.
    pub substeps: usize,
    /// Largest substep count any interval needed (the finer of the two
    /// compared runs).
    pub max_substeps_used: usize,
    /// Number of intervals that needed more than `m` substeps.
    pub refined_intervals: usize,
    /// Largest accepted discrepancy between the `m` and `2m` runs.
    pub verification_delta: f64,
}

impl ReferenceTrajectory {
    pub fn n(&self) -> usize {
        self.grid.n()
    }
}

fn advance(p: &OdeProblem, t0: f64, t1: f64, y0: &Vector, m: usize, tab: &ButcherTableau, cfg: &NewtonConfig) -> Result<Vector, StepError> {
    let h = (t1 - t0) / m as f64;
    let mut y = y0.clone();
    for k in 0..m {
        let t = t0 + k as f64 * h;
        let h_k = if k + 1 == m { t1 - t } else { h };
        y = radau_step(p, t, &y, h_k, tab, cfg)?.y;
        if !y.is_finite() {
            return Err(StepError::Diverged);
        }
    }
    Ok(y)
}

/// Integrates each grid interval with `m` and `2m` Radau5 substeps from the
/// previous reference state and keeps the `2m` result.
///
/// An interval whose two results disagree by more than the tolerance (or
/// whose Newton iterations fail) is retried with the substep count doubled,
/// up to `max_refinements` times. Refinement is per interval, so the stiff
/// transients of one region do not make the whole trajectory expensive.
pub fn build_reference(p: &OdeProblem, grid: &Grid, cfg: &ReferenceConfig) -> Result<ReferenceTrajectory, HarnessError> {
    if cfg.substeps < 2 {
        return Err(HarnessError::InvalidGrid(format!("reference needs at least 2 substeps, got {}", cfg.substeps)));
    }
    let tab = ButcherTableau::radau5();
    let mut states = Vec::with_capacity(grid.n());
    states.push(p.y0().clone());
    let mut delta_max: f64 = 0.0;
    let mut max_used = 2 * cfg.substeps;
    let mut refined = 0;

    for (t0, t1) in grid.pairs() {
        let y0 = states.last().unwrap().clone();
        let mut m = cfg.substeps;
        let mut attempt = 0;
        let accepted = loop {
            let (coarse, fine) = rayon::join(
                || advance(p, t0, t1, &y0, m, &tab, &cfg.newton),
                || advance(p, t0, t1, &y0, 2 * m, &tab, &cfg.newton),
            );
            let (delta, tolerance, fine) = match (coarse, fine) {
                (Ok(c), Ok(f)) => {
                    let scale = 1.0 + y0.norm_inf().max(f.norm_inf());
                    ((&c - &f).norm_inf(), cfg.tolerance * scale, Some(f))
                }
                _ => (f64::INFINITY, cfg.tolerance, None),
            };
            if delta <= tolerance {
                delta_max = delta_max.max(delta);
                break fine.unwrap();
            }
            if attempt == cfg.max_refinements {
                return Err(HarnessError::ReferenceNotConverged {
                    t0,
                    t1,
                    substeps: m,
                    delta,
                    tolerance,
                });
            }
            attempt += 1;
            m *= 2;
        };
        if attempt > 0 {
            refined += 1;
        }
        max_used = max_used.max(2 * m);
        states.push(accepted);
    }

    Ok(ReferenceTrajectory {
        grid: grid.clone(),
        states,
        substeps: cfg.substeps,
        max_substeps_used: max_used,
        refined_intervals: refined,
        verification_delta: delta_max,
    })
}
