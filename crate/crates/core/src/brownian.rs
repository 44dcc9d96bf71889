//! Brownian increments on a time grid, with exact coarsening for coupled
//! multi-resolution experiments.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::stream::StreamKey;

/// A `d`-dimensional Brownian path sampled on a grid: per-step Gaussian
/// increments with variance `h` per coordinate, plus the running cumulative
/// sums (the values of `W` at the nodes).
///
/// Coarsening keeps the underlying `W`: the coarse cumulative array is a
/// subsample of the fine one, so shared-node values agree bit for bit, and
/// the coarse increments are left-to-right block sums of the fine ones.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    grid: TimeGrid,
    dim: usize,
    /// row-major `n x d`
    increments: Vec<f64>,
    /// row-major `(n+1) x d`, row `k` is `W` at node `k`
    cumulative: Vec<f64>,
    source: u64,
}

impl BrownianPath {
    /// Sample a path; fully determined by `key`.
    pub fn sample(grid: TimeGrid, dim: usize, key: &StreamKey) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let n = grid.steps();
        let sd = grid.step().sqrt();
        let mut rng = key.rng();
        let mut increments = vec![0.0; n * dim];
        for v in increments.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = z * sd;
        }
        let mut cumulative = vec![0.0; (n + 1) * dim];
        for k in 0..n {
            for c in 0..dim {
                cumulative[(k + 1) * dim + c] = cumulative[k * dim + c] + increments[k * dim + c];
            }
        }
        Ok(BrownianPath { grid, dim, increments, cumulative, source: key.fingerprint() })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.grid_ref()
    }

    fn grid_ref(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fingerprint of the key that generated the underlying `W`; preserved by
    /// coarsening, used to verify that ensembles are coupled.
    pub fn source(&self) -> u64 {
        self.source
    }

    /// Increment over step `k` (from node `k` to node `k+1`).
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    /// Value of `W` at node `k` (`W(0) = 0`).
    pub fn cumulative(&self, k: usize) -> &[f64] {
        &self.cumulative[k * self.dim..(k + 1) * self.dim]
    }

    /// Block-sum coarsening onto the grid with `n / factor` steps.
    ///
    /// Shared-node cumulative sums are inherited exactly; increments are
    /// left-to-right block sums of the fine increments.
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        let grid = self.grid.coarsen(factor)?;
        let n = grid.steps();
        let d = self.dim;
        let mut increments = vec![0.0; n * d];
        for k in 0..n {
            for j in 0..factor {
                let fine = k * factor + j;
                for c in 0..d {
                    increments[k * d + c] += self.increments[fine * d + c];
                }
            }
        }
        let mut cumulative = vec![0.0; (n + 1) * d];
        for k in 0..=n {
            cumulative[k * d..(k + 1) * d]
                .copy_from_slice(self.cumulative(k * factor));
        }
        Ok(BrownianPath { grid, dim: d, increments, cumulative, source: self.source })
    }

    /// `W(t_b) - W(t_a)` written into `out`, node indices of this path's grid.
    pub fn increment_between(&self, a: usize, b: usize, out: &mut [f64]) {
        let ca = self.cumulative(a);
        let cb = self.cumulative(b);
        for c in 0..self.dim {
            out[c] = cb[c] - ca[c];
        }
    }

    #[cfg(test)]
    pub(crate) fn from_raw(grid: TimeGrid, dim: usize, increments: Vec<f64>) -> Self {
        let n = grid.steps();
        assert_eq!(increments.len(), n * dim);
        let mut cumulative = vec![0.0; (n + 1) * dim];
        for k in 0..n {
            for c in 0..dim {
                cumulative[(k + 1) * dim + c] = cumulative[k * dim + c] + increments[k * dim + c];
            }
        }
        BrownianPath { grid, dim, increments, cumulative, source: 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::pairwise_sum;
    use proptest::prelude::*;

    fn key() -> StreamKey {
        StreamKey::new(2024).child("bm", 0)
    }

    #[test]
    fn determinism_and_independence() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let a = BrownianPath::sample(grid, 2, &key()).unwrap();
        let b = BrownianPath::sample(grid, 2, &key()).unwrap();
        assert_eq!(a.increments, b.increments);
        let c = BrownianPath::sample(grid, 2, &StreamKey::new(2024).child("bm", 1)).unwrap();
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn coarsen_block_sums() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let p = BrownianPath::from_raw(grid, 1, vec![0.1, -0.2, 0.3, 0.05]);
        let c = p.coarsen(2).unwrap();
        assert_eq!(c.increments, vec![0.1 + (-0.2), 0.3 + 0.05]);
        let id = p.coarsen(1).unwrap();
        assert_eq!(id.increments, p.increments);
        assert!(p.coarsen(3).is_err());
    }

    #[test]
    fn pooled_increment_statistics() {
        // 10^5 pooled increments at h = 0.01: mean within the 4-sigma CLT band,
        // variance within 2 percent.
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let master = StreamKey::new(31415);
        let mut pool = Vec::with_capacity(100_000);
        for r in 0..1000 {
            let p = BrownianPath::sample(grid, 1, &master.child("rep", r)).unwrap();
            pool.extend_from_slice(&p.increments);
        }
        assert_eq!(pool.len(), 100_000);
        let n = pool.len() as f64;
        let mean = pairwise_sum(&pool) / n;
        let var = pairwise_sum(&pool.iter().map(|x| (x - mean) * (x - mean)).collect::<Vec<_>>())
            / (n - 1.0);
        let band = 4.0 * 0.1 / n.sqrt();
        assert!(mean.abs() < band, "mean {mean} outside 4-sigma band {band}");
        assert!((var - 0.01).abs() < 0.0002, "variance {var} not within 2% of 0.01");
    }

    proptest! {
        #[test]
        fn coarsening_consistency(seed in 0u64..1_000_000, log2n in 2u32..8, fpick in 0usize..3) {
            let n = 1usize << log2n;
            let factor = [2usize, 4, 1 << (log2n.min(3))][fpick];
            let grid = TimeGrid::new(1.0, n).unwrap();
            let p = BrownianPath::sample(grid, 2, &StreamKey::new(seed)).unwrap();
            let c = p.coarsen(factor).unwrap();
            // shared-node cumulative sums agree exactly
            for k in 0..=c.grid.steps() {
                prop_assert_eq!(c.cumulative(k), p.cumulative(k * factor));
            }
            // coarse increments are block sums
            for k in 0..c.grid.steps() {
                for ccoord in 0..2 {
                    let mut s = 0.0;
                    for j in 0..factor {
                        s += p.increment(k * factor + j)[ccoord];
                    }
                    prop_assert_eq!(c.increment(k)[ccoord], s);
                }
            }
        }
    }
}
