//! Euler-Maruyama stepping for classical SDEs, the continuous Euler
//! interpolation, and the variance-exact Ornstein-Uhlenbeck oracle.

use crate::brownian::BrownianPath;
use crate::coeffs::{DiffusionField, DriftField};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::numeric::{all_finite, matvec};

/// Node states of one path: `(n+1) x d` stored flat.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize, initial: &[f64], node_capacity: usize) -> Self {
        debug_assert_eq!(initial.len(), dim);
        let mut data = Vec::with_capacity(node_capacity * dim);
        data.extend_from_slice(initial);
        Trajectory { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.node(self.nodes() - 1)
    }

    pub fn push(&mut self, state: &[f64]) {
        debug_assert_eq!(state.len(), self.dim);
        self.data.extend_from_slice(state);
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

/// Euler path on a grid, together with the fingerprint of the Brownian
/// driver for coupling checks.
#[derive(Debug, Clone)]
pub struct EulerPath {
    pub grid: TimeGrid,
    pub states: Trajectory,
    pub driver: u64,
}

/// Scratch for one Euler step (drift vector and diffusion matrix).
#[derive(Debug, Default, Clone)]
pub struct StepScratch {
    b: Vec<f64>,
    s: Vec<f64>,
}

/// One explicit step: `out = x + b(t, x) h + sigma(t, x) dW`.
pub fn euler_step<B, S>(
    b: &B,
    sigma: &S,
    t: f64,
    x: &[f64],
    h: f64,
    dw: &[f64],
    scratch: &mut StepScratch,
    out: &mut [f64],
) -> std::result::Result<(), String>
where
    B: DriftField + ?Sized,
    S: DiffusionField + ?Sized,
{
    let d = x.len();
    scratch.b.resize(d, 0.0);
    scratch.s.resize(d * d, 0.0);
    b.eval(t, x, &mut scratch.b);
    if !all_finite(&scratch.b) {
        return Err(format!("drift not finite at x = {x:?}"));
    }
    sigma.eval(t, x, &mut scratch.s);
    if !all_finite(&scratch.s) {
        return Err(format!("diffusion not finite at x = {x:?}"));
    }
    matvec(&scratch.s, dw, out);
    for c in 0..d {
        out[c] += x[c] + scratch.b[c] * h;
    }
    if !all_finite(out) {
        return Err(format!("state not finite after step from x = {x:?}"));
    }
    Ok(())
}

/// Iterate [`euler_step`] over the grid; deterministic given `(x0, bm)`.
pub fn simulate_euler<B, S>(
    b: &B,
    sigma: &S,
    x0: &[f64],
    grid: TimeGrid,
    bm: &BrownianPath,
) -> Result<EulerPath>
where
    B: DriftField + ?Sized,
    S: DiffusionField + ?Sized,
{
    let d = x0.len();
    if bm.grid() != &grid {
        return Err(Error::invalid("Brownian path grid does not match simulation grid"));
    }
    if bm.dim() != d || b.dim() != d || sigma.dim() != d {
        return Err(Error::invalid("dimension mismatch"));
    }
    let n = grid.steps();
    let h = grid.step();
    let mut states = Trajectory::new(d, x0, n + 1);
    let mut scratch = StepScratch::default();
    let mut next = vec![0.0; d];
    for k in 0..n {
        let t = grid.node(k);
        let x = states.node(k).to_vec();
        euler_step(b, sigma, t, &x, h, bm.increment(k), &mut scratch, &mut next)
            .map_err(|detail| Error::NumericFailure { step: k, t, detail })?;
        states.push(&next);
    }
    Ok(EulerPath { grid, states, driver: bm.source() })
}

/// The continuous Euler interpolation
/// `X_t = X_{t_h} + b(t_h, X_{t_h})(t - t_h) + sigma(t_h, X_{t_h})(W_t - W_{t_h})`
/// evaluated at a node `t` of the finer Brownian path.
///
/// No intra-node randomness is invented: `t` must be a node of `bm`'s grid,
/// which must refine the path's grid and carry the same underlying `W`.
pub fn interpolate<B, S>(
    path: &EulerPath,
    b: &B,
    sigma: &S,
    bm: &BrownianPath,
    t: f64,
) -> Result<Vec<f64>>
where
    B: DriftField + ?Sized,
    S: DiffusionField + ?Sized,
{
    let stride = bm
        .grid()
        .stride_over(&path.grid)
        .ok_or_else(|| Error::invalid("Brownian grid does not refine the path grid"))?;
    if bm.source() != path.driver {
        return Err(Error::invalid("Brownian path does not drive this Euler path"));
    }
    let fine_idx = bm.grid().floor_index(t)?;
    if bm.grid().node(fine_idx) != t {
        return Err(Error::invalid(format!("t = {t} is not a node of the fine grid")));
    }
    let k = path.grid.floor_index(t)?;
    let t_h = path.grid.node(k);
    let d = path.states.dim();
    let x = path.states.node(k);
    let mut bv = vec![0.0; d];
    let mut sm = vec![0.0; d * d];
    let mut dw = vec![0.0; d];
    b.eval(t_h, x, &mut bv);
    sigma.eval(t_h, x, &mut sm);
    bm.increment_between(k * stride, fine_idx, &mut dw);
    let mut out = vec![0.0; d];
    matvec(&sm, &dw, &mut out);
    for c in 0..d {
        out[c] += x[c] + bv[c] * (t - t_h);
    }
    Ok(out)
}

/// Exact-in-law Ornstein-Uhlenbeck path sharing the driving increments:
/// `X_{k+1} = e^{-theta h} X_k + sigma0 sqrt((1 - e^{-2 theta h})/(2 theta h)) dW_k`.
///
/// The noise factor makes each one-step transition variance-exact, so the
/// path is a coupled exact solution adequate for rate regression. At
/// `theta = 0` the factor reduces to 1 and the path is driven Brownian.
pub fn exact_ou(
    theta: f64,
    sigma0: &[f64],
    x0: &[f64],
    grid: TimeGrid,
    bm: &BrownianPath,
) -> Result<EulerPath> {
    let d = x0.len();
    if sigma0.len() != d * d {
        return Err(Error::invalid("sigma0 must be d x d"));
    }
    if bm.grid() != &grid || bm.dim() != d {
        return Err(Error::invalid("Brownian path does not match grid/dimension"));
    }
    let h = grid.step();
    let decay = (-theta * h).exp();
    let noise_scale = if theta == 0.0 {
        1.0
    } else {
        (-(-2.0 * theta * h).exp_m1() / (2.0 * theta * h)).sqrt()
    };
    let n = grid.steps();
    let mut states = Trajectory::new(d, x0, n + 1);
    let mut next = vec![0.0; d];
    for k in 0..n {
        let x = states.node(k).to_vec();
        matvec(sigma0, bm.increment(k), &mut next);
        for c in 0..d {
            next[c] = decay * x[c] + noise_scale * next[c];
        }
        states.push(&next);
    }
    Ok(EulerPath { grid, states, driver: bm.source() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::catalog::{ConstantDiffusion, ConstantDrift, IdentityDiffusion, OuDrift};
    use crate::coeffs::FnDrift;
    use crate::stream::StreamKey;
    use approx::assert_relative_eq;

    fn bm(grid: TimeGrid, dim: usize, seed: u64) -> BrownianPath {
        BrownianPath::sample(grid, dim, &StreamKey::new(seed).child("bm", 0)).unwrap()
    }

    #[test]
    fn euler_step_examples() {
        let mut scratch = StepScratch::default();
        let mut out = [0.0];
        // b = 0, sigma = 1, x = 0, dW = 0.7 -> 0.7
        euler_step(
            &ConstantDrift::new(vec![0.0]),
            &IdentityDiffusion::new(1),
            0.0,
            &[0.0],
            0.1,
            &[0.7],
            &mut scratch,
            &mut out,
        )
        .unwrap();
        assert_eq!(out[0], 0.7);
        // OU b(x) = -x, sigma = 1, x = 1, h = 0.5, dW = 0 -> 0.5
        euler_step(
            &OuDrift::new(1, 1.0),
            &IdentityDiffusion::new(1),
            0.0,
            &[1.0],
            0.5,
            &[0.0],
            &mut scratch,
            &mut out,
        )
        .unwrap();
        assert_eq!(out[0], 0.5);
        // b = 1, sigma = 0, x = 0, h = 0.25 -> 0.25
        euler_step(
            &ConstantDrift::new(vec![1.0]),
            &ConstantDiffusion::new(1, vec![0.0]).unwrap(),
            0.0,
            &[0.0],
            0.25,
            &[0.9],
            &mut scratch,
            &mut out,
        )
        .unwrap();
        assert_eq!(out[0], 0.25);
    }

    #[test]
    fn euler_step_reports_nonfinite() {
        let mut scratch = StepScratch::default();
        let mut out = [0.0];
        let bad = FnDrift::new(1, |_, _, out: &mut [f64]| out[0] = f64::NAN);
        let err = euler_step(
            &bad,
            &IdentityDiffusion::new(1),
            0.0,
            &[0.0],
            0.1,
            &[0.0],
            &mut scratch,
            &mut out,
        );
        assert!(err.is_err());
    }

    #[test]
    fn driftless_identity_is_random_walk() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let w = bm(grid, 2, 7);
        let p = simulate_euler(
            &ConstantDrift::new(vec![0.0, 0.0]),
            &IdentityDiffusion::new(2),
            &[0.0, 0.0],
            grid,
            &w,
        )
        .unwrap();
        for k in 0..=32 {
            assert_eq!(p.states.node(k), w.cumulative(k));
        }
    }

    #[test]
    fn zero_diffusion_zero_drift_is_constant() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let w = bm(grid, 1, 8);
        let p = simulate_euler(
            &ConstantDrift::new(vec![0.0]),
            &ConstantDiffusion::new(1, vec![0.0]).unwrap(),
            &[1.25],
            grid,
            &w,
        )
        .unwrap();
        for k in 0..=16 {
            assert_eq!(p.states.node(k), &[1.25]);
        }
    }

    #[test]
    fn replay_is_bit_exact() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let w = bm(grid, 1, 99);
        let b = OuDrift::new(1, 1.0);
        let s = IdentityDiffusion::new(1);
        let p1 = simulate_euler(&b, &s, &[1.0], grid, &w).unwrap();
        let p2 = simulate_euler(&b, &s, &[1.0], grid, &w).unwrap();
        assert_eq!(p1.states.raw(), p2.states.raw());
    }

    #[test]
    fn affine_exactness() {
        // constant coefficients: states(k) = x0 + b0 k h + sigma0 W(kh), 1e-12 relative
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let b0 = [0.5, -0.25];
        let s0 = [1.0, 0.3, -0.2, 0.8];
        let x0 = [1.0, -1.0];
        for seed in 0..20 {
            let w = bm(grid, 2, seed);
            let p = simulate_euler(
                &ConstantDrift::new(b0.to_vec()),
                &ConstantDiffusion::new(2, s0.to_vec()).unwrap(),
                &x0,
                grid,
                &w,
            )
            .unwrap();
            for k in 0..=256 {
                let t = grid.node(k);
                let wk = w.cumulative(k);
                let mut sw = [0.0; 2];
                matvec(&s0, wk, &mut sw);
                for c in 0..2 {
                    let exact = x0[c] + b0[c] * t + sw[c];
                    let got = p.states.node(k)[c];
                    let scale = exact.abs().max(1.0);
                    assert!(
                        (got - exact).abs() <= 1e-12 * scale,
                        "node {k} comp {c}: {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn interpolation_consistency() {
        let fine_grid = TimeGrid::new(1.0, 64).unwrap();
        let w_fine = bm(fine_grid, 1, 5);
        let w = w_fine.coarsen(8).unwrap();
        let grid = *w.grid();
        let b = ConstantDrift::new(vec![0.0]);
        let s = IdentityDiffusion::new(1);
        let p = simulate_euler(&b, &s, &[0.0], grid, &w).unwrap();
        // at coarse nodes: the node value
        let v = interpolate(&p, &b, &s, &w_fine, grid.node(3)).unwrap();
        assert_eq!(v, p.states.node(3));
        // b=0, sigma=1: interpolation equals W_t (reassociation rounding only)
        for k in 0..=64 {
            let t = fine_grid.node(k);
            let v = interpolate(&p, &b, &s, &w_fine, t).unwrap();
            assert!((v[0] - w_fine.cumulative(k)[0]).abs() < 1e-14, "t = {t}");
        }
        // off-node t is rejected
        let t_mid = 0.5 * (fine_grid.node(1) + fine_grid.node(2));
        assert!(interpolate(&p, &b, &s, &w_fine, t_mid).is_err());
    }

    #[test]
    fn exact_ou_limits() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let w = bm(grid, 1, 11);
        // theta = 0, sigma = 1: Brownian cumulative sums
        let p = exact_ou(0.0, &[1.0], &[0.0], grid, &w).unwrap();
        for k in 0..=32 {
            assert_eq!(p.states.node(k)[0], w.cumulative(k)[0]);
        }
        // sigma = 0: deterministic decay x0 e^{-theta t}
        let theta = 1.7;
        let p = exact_ou(theta, &[0.0], &[2.0], grid, &w).unwrap();
        for k in 0..=32 {
            let t = grid.node(k);
            assert_relative_eq!(
                p.states.node(k)[0],
                2.0 * (-theta * t).exp(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn euler_to_exact_ou_same_grid_order_one() {
        // nodewise comparison on a shared grid: additive noise makes the
        // coupled Euler/exact gap shrink with slope ~ 1 in log-log
        use crate::diagnostics::fit_rate;
        let master = StreamKey::new(4242);
        let reps = 400;
        let theta = 1.0;
        let mut pts = Vec::new();
        for k in [4u32, 5, 6, 7, 8, 9] {
            let n = 1usize << k;
            let grid = TimeGrid::new(1.0, n).unwrap();
            let mut sups = Vec::with_capacity(reps);
            for r in 0..reps as u64 {
                let w = BrownianPath::sample(grid, 1, &master.child("rep", r)).unwrap();
                let pe = simulate_euler(
                    &OuDrift::new(1, theta),
                    &IdentityDiffusion::new(1),
                    &[1.0],
                    grid,
                    &w,
                )
                .unwrap();
                let px = exact_ou(theta, &[1.0], &[1.0], grid, &w).unwrap();
                let mut sup: f64 = 0.0;
                for j in 0..=n {
                    sup = sup.max((pe.states.node(j)[0] - px.states.node(j)[0]).powi(2));
                }
                sups.push(sup);
            }
            let rms = (crate::numeric::pairwise_sum(&sups) / reps as f64).sqrt();
            pts.push((grid.step(), rms));
        }
        let fit = fit_rate(&pts).unwrap();
        assert!(
            (0.8..=1.2).contains(&fit.slope),
            "expected slope near 1, got {} (points {pts:?})",
            fit.slope
        );
    }
}
