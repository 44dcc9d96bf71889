//! Uniform time grids and the flooring map `t -> [t/h] h`.

use crate::error::{Error, Result};

/// Uniform partition of `[0, T]` into `n` steps of size `h = T / n`.
///
/// Grids are always specified by `(T, n)`, never by a raw step size, so the
/// step always divides the horizon. `node(n)` returns `T` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    step: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::invalid("step count must be at least 1"));
        }
        Ok(TimeGrid { horizon, steps, step: horizon / steps as f64 })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Node `k h` for `k = 0..=n`, with the endpoint pinned to `T`.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.steps);
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.step
        }
    }

    /// Index of the floored node: largest `k` with `node(k) <= t`.
    pub fn floor_index(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        if t >= self.horizon {
            return Ok(self.steps);
        }
        let mut k = ((t / self.step) as usize).min(self.steps - 1);
        // one-step correction for rounding in t / h
        while k + 1 <= self.steps && self.node(k + 1) <= t {
            k += 1;
        }
        while k > 0 && self.node(k) > t {
            k -= 1;
        }
        Ok(k)
    }

    /// The flooring map `t_h = [t/h] h`; by convention `floor_time(T) = T`.
    pub fn floor_time(&self, t: f64) -> Result<f64> {
        Ok(self.node(self.floor_index(t)?))
    }

    /// Grid with the same horizon and `n / factor` steps.
    pub fn coarsen(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::invalid(format!(
                "factor {factor} does not divide step count {}",
                self.steps
            )));
        }
        TimeGrid::new(self.horizon, self.steps / factor)
    }

    /// Refinement stride of `self` with respect to a coarser grid sharing the
    /// horizon, if the node sets nest.
    pub fn stride_over(&self, coarser: &TimeGrid) -> Option<usize> {
        if self.horizon == coarser.horizon && self.steps % coarser.steps == 0 {
            Some(self.steps / coarser.steps)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn make_grid_basic() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.step(), 0.25);
        let nodes: Vec<f64> = (0..=4).map(|k| g.node(k)).collect();
        assert_eq!(nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);

        let g = TimeGrid::new(2.0, 1).unwrap();
        assert_eq!(g.step(), 2.0);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(1), 2.0);
    }

    #[test]
    fn make_grid_rejects_bad_arguments() {
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(-1.0, 4).is_err());
    }

    #[test]
    fn floor_time_examples() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.floor_time(0.3).unwrap(), 0.25);
        assert_eq!(g.floor_time(0.25).unwrap(), 0.25);
        assert_eq!(g.floor_time(1.0).unwrap(), 1.0);
        assert_eq!(g.floor_time(0.0).unwrap(), 0.0);
        assert!(g.floor_time(1.5).is_err());
        assert!(g.floor_time(-0.1).is_err());
    }

    #[test]
    fn step_times_count_recovers_horizon() {
        for (t, n) in [(1.0, 49), (0.7, 13), (3.5, 1000)] {
            let g = TimeGrid::new(t, n).unwrap();
            let err = (g.step() * n as f64 - t).abs();
            assert!(err <= t * f64::EPSILON, "T={t} n={n} err={err}");
            assert_eq!(g.node(n), t);
        }
    }

    proptest! {
        #[test]
        fn nodes_are_fixed_points(t in 0.01f64..100.0, n in 1usize..2000, kf in 0.0f64..1.0) {
            let g = TimeGrid::new(t, n).unwrap();
            let k = ((kf * n as f64) as usize).min(n);
            let node = g.node(k);
            prop_assert_eq!(g.floor_time(node).unwrap(), node);
        }

        #[test]
        fn floor_is_left_neighbor(t in 0.01f64..100.0, n in 1usize..2000, frac in 0.0f64..1.0) {
            let g = TimeGrid::new(t, n).unwrap();
            let s = frac * t;
            let k = g.floor_index(s).unwrap();
            prop_assert!(g.node(k) <= s || k == n);
            if k < n {
                prop_assert!(g.node(k + 1) > s || (k + 1 == n && g.node(n) <= s));
            }
        }
    }
}
