use serde::Serialize;

use super::HarnessError;
use crate::problems::{GridRule, OdeProblem};

/// Strictly increasing time points covering a problem's span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    model: String,
    rule: GridRule,
    points: Vec<f64>,
}

/// `n` points from `t_start` to `t_end`, uniform for linear rules and
/// geometric for logarithmic ones. Both endpoints are exact.
pub fn build_grid(p: &OdeProblem, n: usize) -> Result<Grid, HarnessError> {
    if n < 2 {
        return Err(HarnessError::InvalidGrid(format!("need at least 2 points, got {n}")));
    }
    let (a, b) = p.t_span();
    let last = (n - 1) as f64;
    let mut points: Vec<f64> = match p.grid_rule() {
        GridRule::Linear => (0..n).map(|i| a + (b - a) * (i as f64 / last)).collect(),
        GridRule::Logarithmic => {
            if a <= 0.0 {
                return Err(HarnessError::InvalidGrid("logarithmic grid needs a positive start".into()));
            }
            let (la, lb) = (a.ln(), b.ln());
            (0..n).map(|i| (la + (lb - la) * (i as f64 / last)).exp()).collect()
        }
    };
    points[0] = a;
    points[n - 1] = b;
    Grid::from_points(p.name(), p.grid_rule(), points)
}

impl Grid {
    pub fn from_points(model: &str, rule: GridRule, points: Vec<f64>) -> Result<Grid, HarnessError> {
        if points.len() < 2 {
            return Err(HarnessError::InvalidGrid("need at least 2 points".into()));
        }
        if !points.windows(2).all(|w| w[0] < w[1]) || !points.iter().all(|t| t.is_finite()) {
            return Err(HarnessError::InvalidGrid("points must be finite and strictly increasing".into()));
        }
        Ok(Grid {
            model: model.to_string(),
            rule,
            points,
        })
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn rule(&self) -> GridRule {
        self.rule
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Consecutive `(t0, t1)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// Drops every other point, keeping both ends. Needs an odd `n`.
    pub fn halve(&self) -> Result<Grid, HarnessError> {
        if self.n() % 2 == 0 || self.n() < 3 {
            return Err(HarnessError::InvalidGrid(format!("cannot halve a grid of {} points", self.n())));
        }
        let points = self.points.iter().step_by(2).copied().collect();
        Grid::from_points(&self.model, self.rule, points)
    }

    /// Inserts a midpoint into every interval (geometric midpoints on
    /// logarithmic grids).
    pub fn double(&self) -> Grid {
        let mut points = Vec::with_capacity(2 * self.n() - 1);
        for (a, b) in self.pairs() {
            points.push(a);
            points.push(match self.rule {
                GridRule::Linear => 0.5 * (a + b),
                GridRule::Logarithmic => (a * b).sqrt(),
            });
        }
        points.push(*self.points.last().unwrap());
        Grid::from_points(&self.model, self.rule, points).expect("midpoints keep the grid increasing")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{hires, robertson, smooth_test, vanderpol};

    #[test]
    fn small_grids() {
        assert_eq!(build_grid(&vanderpol(), 3).unwrap().points(), &[0.0, 650.0, 1300.0]);
        let r = build_grid(&robertson(), 3).unwrap();
        assert_eq!(r.points()[0], 1e-5);
        assert_eq!(r.points()[2], 1e7);
        assert!((r.points()[1] - 10.0).abs() < 1e-12);
        assert!(build_grid(&vanderpol(), 1).is_err());
    }

    #[test]
    fn halving_and_doubling_are_inverse() {
        for p in [vanderpol(), robertson(), smooth_test()] {
            let g = build_grid(&p, 9).unwrap();
            let d = g.double();
            assert_eq!(d.n(), 17);
            assert_eq!(d.halve().unwrap(), g);
            let h = g.halve().unwrap();
            assert_eq!(h.n(), 5);
            let fine = build_grid(&p, 17).unwrap();
            for (x, y) in d.points().iter().zip(fine.points()) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} vs {y}");
            }
        }
        assert!(build_grid(&vanderpol(), 4).unwrap().halve().is_err());
    }

    #[test]
    fn grid_sizes_used_in_the_benchmarks() {
        for (p, sizes) in [
            (vanderpol(), vec![1555, 24849]),
            (hires(), vec![56, 857, 54785]),
            (robertson(), vec![1314, 5253, 21009]),
        ] {
            for n in sizes {
                let g = build_grid(&p, n).unwrap();
                assert_eq!(g.n(), n);
                assert_eq!(g.points()[0], p.t_span().0);
                assert_eq!(*g.points().last().unwrap(), p.t_span().1);
                assert!(g.points().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
