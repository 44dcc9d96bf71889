//! Discretized Ito processes with adapted random coefficients:
//! `xi_k = xi_{k-1} + b_{k-1}/N + sigma_{k-1} dW_{k-1}`, with the per-step
//! coefficient trace recorded for bound audits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::brownian::BrownianPath;
use crate::coeffs::CoefficientBounds;
use crate::error::{Error, Result};
use crate::euler::Trajectory;
use crate::measure::AtomsView;
use crate::numeric::{all_finite, gram_det, hs_norm, matvec, norm2};
use crate::stream::StreamKey;

/// Per-step auxiliary randomness for adapted rules.
///
/// The generator is keyed by `(path key, "aux", step)` and created lazily on
/// first use, so rules that never draw pay nothing, and a rule replayed at
/// step `j` sees exactly the randomness it saw during simulation.
pub struct AuxStream {
    key: StreamKey,
    rng: Option<ChaCha8Rng>,
}

impl AuxStream {
    pub fn new(key: StreamKey) -> Self {
        AuxStream { key, rng: None }
    }

    fn rng(&mut self) -> &mut ChaCha8Rng {
        if self.rng.is_none() {
            self.rng = Some(self.key.rng());
        }
        self.rng.as_mut().unwrap()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng().sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng().gen_range(0.0..1.0)
    }
}

/// Adapted coefficient rule: at step `j` it sees only the path history
/// `xi_0..xi_j` and auxiliary randomness labeled by `j`, so adaptedness holds
/// by construction.
pub trait AdaptedRule: Send + Sync {
    fn dim(&self) -> usize;
    fn bounds(&self) -> &CoefficientBounds;
    fn coefficients(
        &self,
        step: usize,
        history: AtomsView<'_>,
        aux: &mut AuxStream,
        b_out: &mut [f64],
        sigma_out: &mut [f64],
    );
}

/// Discretized Ito path: values `xi_0..xi_N` plus the coefficient trace
/// actually used at each step.
#[derive(Debug, Clone)]
pub struct DiscretizedItoPath {
    pub values: Trajectory,
    /// `N x d`, drift used at each step
    pub trace_b: Vec<f64>,
    /// `N x d^2`, diffusion used at each step
    pub trace_sigma: Vec<f64>,
    pub driver: u64,
}

impl DiscretizedItoPath {
    pub fn steps(&self) -> usize {
        self.values.nodes() - 1
    }

    pub fn dim(&self) -> usize {
        self.values.dim()
    }

    pub fn trace_at(&self, j: usize) -> (&[f64], &[f64]) {
        let d = self.dim();
        (&self.trace_b[j * d..(j + 1) * d], &self.trace_sigma[j * d * d..(j + 1) * d * d])
    }
}

fn check_bounds(b: &[f64], sigma: &[f64], d: usize, bounds: &CoefficientBounds, step: usize) -> Result<()> {
    let slack = 1.0 + 1e-12;
    let nb = norm2(b);
    if nb > bounds.kappa0 * slack {
        return Err(Error::BoundViolation {
            step,
            detail: format!("|b| = {nb} exceeds kappa0 = {}", bounds.kappa0),
        });
    }
    let ns = hs_norm(sigma);
    if ns > bounds.kappa0 * slack {
        return Err(Error::BoundViolation {
            step,
            detail: format!("||sigma|| = {ns} exceeds kappa0 = {}", bounds.kappa0),
        });
    }
    let det = gram_det(sigma, d);
    if det < bounds.kappa1 / slack {
        return Err(Error::BoundViolation {
            step,
            detail: format!("det(sigma sigma*) = {det} below kappa1 = {}", bounds.kappa1),
        });
    }
    Ok(())
}

/// Run the recursion for `N` steps on the unit horizon.
///
/// `bm` must be a path on the grid `(T = 1, n = N)`. Every step's
/// coefficients are audited against the rule's declared kappa bounds; a
/// violation aborts the run.
pub fn simulate_discretized_ito<R: AdaptedRule + ?Sized>(
    rule: &R,
    xi0: &[f64],
    steps: usize,
    bm: &BrownianPath,
    aux_key: &StreamKey,
) -> Result<DiscretizedItoPath> {
    let d = rule.dim();
    if xi0.len() != d || bm.dim() != d {
        return Err(Error::invalid("dimension mismatch"));
    }
    if bm.grid().steps() != steps || bm.grid().horizon() != 1.0 {
        return Err(Error::invalid(format!(
            "need a Brownian path with {steps} steps on [0, 1], got {} on [0, {}]",
            bm.grid().steps(),
            bm.grid().horizon()
        )));
    }
    let h = bm.grid().step();
    let bounds = rule.bounds();
    let mut values = Trajectory::new(d, xi0, steps + 1);
    let mut trace_b = Vec::with_capacity(steps * d);
    let mut trace_sigma = Vec::with_capacity(steps * d * d);
    let mut b = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    let mut next = vec![0.0; d];
    for j in 0..steps {
        let mut aux = AuxStream::new(aux_key.child("aux", j as u64));
        rule.coefficients(j, AtomsView::new(d, values.raw()), &mut aux, &mut b, &mut sigma);
        if !all_finite(&b) || !all_finite(&sigma) {
            return Err(Error::NumericFailure {
                step: j,
                t: bm.grid().node(j),
                detail: "rule produced non-finite coefficients".into(),
            });
        }
        check_bounds(&b, &sigma, d, bounds, j)?;
        matvec(&sigma, bm.increment(j), &mut next);
        let x = values.node(j);
        for c in 0..d {
            next[c] += x[c] + b[c] * h;
        }
        trace_b.extend_from_slice(&b);
        trace_sigma.extend_from_slice(&sigma);
        values.push(&next);
    }
    Ok(DiscretizedItoPath { values, trace_b, trace_sigma, driver: bm.source() })
}

/// Re-audit a stored path from its trace: `|b_j| <= kappa0`,
/// `||sigma_j|| <= kappa0`, `det(sigma_j sigma_j^T) >= kappa1` for all `j`.
pub fn audit_trace(path: &DiscretizedItoPath, bounds: &CoefficientBounds) -> Result<()> {
    let d = path.dim();
    for j in 0..path.steps() {
        let (b, s) = path.trace_at(j);
        check_bounds(b, s, d, bounds, j)?;
    }
    Ok(())
}

/// Re-run the rule at each step against the truncated history and compare to
/// the recorded trace bit for bit; detects rules that peek past step `j`.
pub fn replay_matches_trace<R: AdaptedRule + ?Sized>(
    rule: &R,
    path: &DiscretizedItoPath,
    aux_key: &StreamKey,
) -> bool {
    let d = path.dim();
    let mut b = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    for j in 0..path.steps() {
        let mut aux = AuxStream::new(aux_key.child("aux", j as u64));
        let truncated = &path.values.raw()[..(j + 1) * d];
        rule.coefficients(j, AtomsView::new(d, truncated), &mut aux, &mut b, &mut sigma);
        let (tb, ts) = path.trace_at(j);
        if b != tb || sigma != ts {
            return false;
        }
    }
    true
}

/// Rule with constant `(b0, sigma0)`.
pub struct ConstantRule {
    b0: Vec<f64>,
    sigma0: Vec<f64>,
    bounds: CoefficientBounds,
}

impl ConstantRule {
    pub fn new(b0: Vec<f64>, sigma0: Vec<f64>) -> Result<Self> {
        let d = b0.len();
        if sigma0.len() != d * d {
            return Err(Error::invalid("sigma0 must be d x d"));
        }
        let kappa0 = norm2(&b0).max(hs_norm(&sigma0)).max(1e-6);
        let kappa1 = gram_det(&sigma0, d).max(1e-12);
        let bounds = CoefficientBounds::new(kappa0, kappa1, kappa0.max(1.0), kappa1, 2.0)?;
        Ok(ConstantRule { b0, sigma0, bounds })
    }
}

impl AdaptedRule for ConstantRule {
    fn dim(&self) -> usize {
        self.b0.len()
    }
    fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }
    fn coefficients(
        &self,
        _step: usize,
        _history: AtomsView<'_>,
        _aux: &mut AuxStream,
        b_out: &mut [f64],
        sigma_out: &mut [f64],
    ) {
        b_out.copy_from_slice(&self.b0);
        sigma_out.copy_from_slice(&self.sigma0);
    }
}

/// Driftless rule with identity diffusion: `xi` is the driving Brownian
/// motion started at `xi_0`.
pub struct BrownianRule {
    dim: usize,
    bounds: CoefficientBounds,
}

impl BrownianRule {
    pub fn new(dim: usize) -> Self {
        let kappa0 = (dim as f64).sqrt();
        let bounds = CoefficientBounds::new(kappa0, 1.0, 1.0, 1.0, 2.0).unwrap();
        BrownianRule { dim, bounds }
    }
}

impl AdaptedRule for BrownianRule {
    fn dim(&self) -> usize {
        self.dim
    }
    fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }
    fn coefficients(
        &self,
        _step: usize,
        _history: AtomsView<'_>,
        _aux: &mut AuxStream,
        b_out: &mut [f64],
        sigma_out: &mut [f64],
    ) {
        b_out.iter_mut().for_each(|v| *v = 0.0);
        sigma_out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            sigma_out[i * self.dim + i] = 1.0;
        }
    }
}

/// State-dependent bounded rule:
/// `b_j = clamp(sin(xi_j . e1), +-1) e1`,
/// `sigma_j = (1 + 1/2 1_{xi_j . e1 > 0}) I`.
///
/// In d = 1 this satisfies the kappa audit with `kappa0 = 1.5`, `kappa1 = 1`.
pub struct BoundedStateRule {
    dim: usize,
    bounds: CoefficientBounds,
}

impl BoundedStateRule {
    pub fn new(dim: usize) -> Self {
        let kappa0 = (1.5 * (dim as f64).sqrt()).max(1.0);
        let bounds = CoefficientBounds::new(kappa0, 1.0, 2.0, 1.0, 2.0).unwrap();
        BoundedStateRule { dim, bounds }
    }
}

impl AdaptedRule for BoundedStateRule {
    fn dim(&self) -> usize {
        self.dim
    }
    fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }
    fn coefficients(
        &self,
        step: usize,
        history: AtomsView<'_>,
        _aux: &mut AuxStream,
        b_out: &mut [f64],
        sigma_out: &mut [f64],
    ) {
        let xi = history.atom(step);
        b_out.iter_mut().for_each(|v| *v = 0.0);
        b_out[0] = xi[0].sin().clamp(-1.0, 1.0);
        let scale = if xi[0] > 0.0 { 1.5 } else { 1.0 };
        sigma_out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            sigma_out[i * self.dim + i] = scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    fn unit_bm(n: usize, seed: u64) -> BrownianPath {
        let grid = TimeGrid::new(1.0, n).unwrap();
        BrownianPath::sample(grid, 1, &StreamKey::new(seed).child("bm", 0)).unwrap()
    }

    #[test]
    fn brownian_rule_reproduces_w() {
        let bm = unit_bm(64, 3);
        let key = StreamKey::new(3);
        // from the origin the recursion accumulates exactly like the cumulative sums
        let p = simulate_discretized_ito(&BrownianRule::new(1), &[0.0], 64, &bm, &key).unwrap();
        for k in 0..=64 {
            assert_eq!(p.values.node(k)[0], bm.cumulative(k)[0]);
        }
        // shifted start: xi_k = xi_0 + W(k/N) up to reassociation rounding
        let p = simulate_discretized_ito(&BrownianRule::new(1), &[0.5], 64, &bm, &key).unwrap();
        for k in 0..=64 {
            let expect = 0.5 + bm.cumulative(k)[0];
            assert!((p.values.node(k)[0] - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_rule_affine() {
        let bm = unit_bm(32, 4);
        let key = StreamKey::new(4);
        let rule = ConstantRule::new(vec![2.0], vec![1.0]).unwrap();
        let p = simulate_discretized_ito(&rule, &[0.0], 32, &bm, &key).unwrap();
        for k in 0..=32 {
            let expect = 2.0 * k as f64 / 32.0 + bm.cumulative(k)[0];
            assert!((p.values.node(k)[0] - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn bounded_state_rule_passes_audit() {
        let bm = unit_bm(256, 5);
        let key = StreamKey::new(5);
        let rule = BoundedStateRule::new(1);
        let p = simulate_discretized_ito(&rule, &[0.0], 256, &bm, &key).unwrap();
        assert_eq!(rule.bounds().kappa0, 1.5);
        audit_trace(&p, rule.bounds()).unwrap();
        // every recorded sigma is one of the two branch values
        for j in 0..p.steps() {
            let (_, s) = p.trace_at(j);
            assert!(s[0] == 1.0 || s[0] == 1.5);
        }
    }

    #[test]
    fn bound_violation_aborts() {
        struct TooBig(CoefficientBounds);
        impl AdaptedRule for TooBig {
            fn dim(&self) -> usize {
                1
            }
            fn bounds(&self) -> &CoefficientBounds {
                &self.0
            }
            fn coefficients(
                &self,
                _: usize,
                _: AtomsView<'_>,
                _: &mut AuxStream,
                b: &mut [f64],
                s: &mut [f64],
            ) {
                b[0] = 5.0; // exceeds kappa0
                s[0] = 1.0;
            }
        }
        let rule = TooBig(CoefficientBounds::new(1.0, 1.0, 1.0, 1.0, 2.0).unwrap());
        let bm = unit_bm(8, 6);
        let err = simulate_discretized_ito(&rule, &[0.0], 8, &bm, &StreamKey::new(6));
        assert!(matches!(err, Err(Error::BoundViolation { step: 0, .. })));
    }

    #[test]
    fn grid_convention_enforced() {
        let grid = TimeGrid::new(2.0, 8).unwrap();
        let bm = BrownianPath::sample(grid, 1, &StreamKey::new(7)).unwrap();
        assert!(simulate_discretized_ito(&BrownianRule::new(1), &[0.0], 8, &bm, &StreamKey::new(7))
            .is_err());
    }

    #[test]
    fn adaptedness_replay() {
        let bm = unit_bm(128, 8);
        let key = StreamKey::new(8);
        let rule = BoundedStateRule::new(1);
        let p = simulate_discretized_ito(&rule, &[0.1], 128, &bm, &key).unwrap();
        assert!(replay_matches_trace(&rule, &p, &key));

        // a rule that draws from its aux stream still replays exactly
        struct NoisyRule(CoefficientBounds);
        impl AdaptedRule for NoisyRule {
            fn dim(&self) -> usize {
                1
            }
            fn bounds(&self) -> &CoefficientBounds {
                &self.0
            }
            fn coefficients(
                &self,
                _: usize,
                _: AtomsView<'_>,
                aux: &mut AuxStream,
                b: &mut [f64],
                s: &mut [f64],
            ) {
                b[0] = 0.5 * aux.normal().clamp(-1.0, 1.0);
                s[0] = 1.0;
            }
        }
        let rule = NoisyRule(CoefficientBounds::new(1.0, 1.0, 1.0, 1.0, 2.0).unwrap());
        let p = simulate_discretized_ito(&rule, &[0.0], 128, &bm, &key).unwrap();
        assert!(replay_matches_trace(&rule, &p, &key));
    }
}
