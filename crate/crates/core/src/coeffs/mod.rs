//! Measurable coefficient fields, interaction kernels, and the mollifier and
//! cutoff combinators.
//!
//! Fields are opaque pure evaluators plus declared bounds. No continuity is
//! assumed anywhere; measurability is not verifiable, so only growth and
//! nondegeneracy are spot-checked by sampling (see [`audit_kernel_growth`]).

pub mod catalog;

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{hs_norm, norm2, smoothstep_down};
use crate::stream::StreamKey;

/// Declared bounds for coefficient evaluators.
///
/// `kappa0` bounds `|b|` and the Hilbert-Schmidt norm of `sigma` for
/// discretized Ito coefficients, `kappa1` bounds `det(sigma sigma^T)` from
/// below; `c0` is the linear-growth constant and `c1` the nondegeneracy
/// constant of mean-field coefficients; `beta` is the moment order the
/// coefficients are used with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub kappa0: f64,
    pub kappa1: f64,
    pub c0: f64,
    pub c1: f64,
    pub beta: f64,
}

impl CoefficientBounds {
    pub fn new(kappa0: f64, kappa1: f64, c0: f64, c1: f64, beta: f64) -> Result<Self> {
        if !(kappa0 > 0.0 && kappa1 > 0.0 && c0 > 0.0 && c1 > 0.0) {
            return Err(Error::invalid("bounds must be positive"));
        }
        if beta < 1.0 {
            return Err(Error::invalid("moment order beta must be at least 1"));
        }
        Ok(CoefficientBounds { kappa0, kappa1, c0, c1, beta })
    }

    /// Bounds for a linear-growth kernel; the kappa slots mirror (c0, c1).
    pub fn linear_growth(c0: f64, c1: f64, beta: f64) -> Result<Self> {
        Self::new(c0, c1, c0, c1, beta)
    }
}

/// Drift field `b : (t, x) -> R^d`. Deterministic, side-effect free,
/// no continuity assumed.
pub trait DriftField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);
}

/// Diffusion field `sigma : (t, x) -> R^{d x d}` (row-major output).
pub trait DiffusionField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);
}

/// Two-point interaction kernel `(bbar, sigmabar)` whose average against a
/// measure yields mean-field coefficients.
pub trait InteractionKernel: Send + Sync {
    fn dim(&self) -> usize;
    fn bounds(&self) -> &CoefficientBounds;
    fn drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]);
    fn diffusion(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]);

    /// True when `drift` never reads `x`. Engines may then hoist the atom
    /// average out of the per-particle loop; the hoisted value is computed by
    /// the same summation tree, so results are bit-identical.
    fn drift_ignores_x(&self) -> bool {
        false
    }

    /// Same as [`InteractionKernel::drift_ignores_x`], for the diffusion part.
    fn diffusion_ignores_x(&self) -> bool {
        false
    }
}

impl<K: InteractionKernel + ?Sized> InteractionKernel for Arc<K> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn bounds(&self) -> &CoefficientBounds {
        (**self).bounds()
    }
    fn drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).drift(t, x, y, out)
    }
    fn diffusion(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).diffusion(t, x, y, out)
    }
    fn drift_ignores_x(&self) -> bool {
        (**self).drift_ignores_x()
    }
    fn diffusion_ignores_x(&self) -> bool {
        (**self).diffusion_ignores_x()
    }
}

/// Drift field built from closures, for ad-hoc models.
pub struct FnDrift<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Send + Sync> FnDrift<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnDrift { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Send + Sync> DriftField for FnDrift<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.f)(t, x, out)
    }
}

/// Diffusion field built from closures.
pub struct FnDiffusion<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Send + Sync> FnDiffusion<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnDiffusion { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Send + Sync> DiffusionField for FnDiffusion<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.f)(t, x, out)
    }
}

/// Interaction kernel built from closures.
pub struct FnKernel<B, S> {
    dim: usize,
    bounds: CoefficientBounds,
    drift: B,
    diffusion: S,
}

impl<B, S> FnKernel<B, S>
where
    B: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
    S: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, bounds: CoefficientBounds, drift: B, diffusion: S) -> Self {
        FnKernel { dim, bounds, drift, diffusion }
    }
}

impl<B, S> InteractionKernel for FnKernel<B, S>
where
    B: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
    S: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }
    fn drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, y, out)
    }
    fn diffusion(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, y, out)
    }
}

/// Gaussian transition density `(2 pi t)^{-d/2} exp(-|y|^2 / (2t))`, the
/// closed-form oracle behind the occupation checks.
pub fn gaussian_density(t: f64, y: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    let d = y.len() as f64;
    let q = norm2(y);
    Ok((2.0 * std::f64::consts::PI * t).powf(-d / 2.0) * (-q * q / (2.0 * t)).exp())
}

/// Smooth radial cutoff weight: 1 for `|x| <= radius`, 0 for
/// `|x| >= radius + 1`, quintic smoothstep in between.
pub fn chi(r: f64, radius: f64) -> f64 {
    smoothstep_down(r - radius)
}

/// Drift field scaled by the cutoff weight `chi(|x|)`.
pub struct CutoffDrift<B> {
    inner: B,
    radius: f64,
}

impl<B: DriftField> CutoffDrift<B> {
    pub fn new(inner: B, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("cutoff radius must be positive"));
        }
        Ok(CutoffDrift { inner, radius })
    }
}

impl<B: DriftField> DriftField for CutoffDrift<B> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.inner.eval(t, x, out);
        let w = chi(norm2(x), self.radius);
        for v in out.iter_mut() {
            *v *= w;
        }
    }
}

/// Diffusion field scaled by the cutoff weight `chi(|x|)`.
pub struct CutoffDiffusion<S> {
    inner: S,
    radius: f64,
}

impl<S: DiffusionField> CutoffDiffusion<S> {
    pub fn new(inner: S, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("cutoff radius must be positive"));
        }
        Ok(CutoffDiffusion { inner, radius })
    }
}

impl<S: DiffusionField> DiffusionField for CutoffDiffusion<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.inner.eval(t, x, out);
        let w = chi(norm2(x), self.radius);
        for v in out.iter_mut() {
            *v *= w;
        }
    }
}

/// Compactly supported bump mollifier `rho_eps(x) ~ exp(-1 / (1 - |x/eps|^2))`
/// on `|x| < eps`, realized as a fixed midpoint tensor-product quadrature with
/// numerically normalized weights.
#[derive(Debug, Clone)]
pub struct Mollifier {
    epsilon: f64,
    node_count: usize,
}

/// Quadrature realization of a mollifier in a given dimension: `m` offset
/// nodes (flattened `m x d`) with weights summing to 1.
#[derive(Debug, Clone)]
pub struct MollifierQuadrature {
    pub dim: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Mollifier {
    pub const DEFAULT_NODE_COUNT: usize = 9;

    pub fn new(epsilon: f64, node_count: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid("mollifier support radius must be positive"));
        }
        if node_count == 0 {
            return Err(Error::invalid("mollifier node count must be at least 1"));
        }
        Ok(Mollifier { epsilon, node_count })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn bump(&self, r2_over_eps2: f64) -> f64 {
        if r2_over_eps2 < 1.0 {
            (-1.0 / (1.0 - r2_over_eps2)).exp()
        } else {
            0.0
        }
    }

    /// Tensor-product midpoint quadrature over the support cube, with weights
    /// proportional to the bump and normalized to unit mass.
    pub fn quadrature(&self, dim: usize) -> MollifierQuadrature {
        let nc = self.node_count;
        let width = 2.0 * self.epsilon / nc as f64;
        let axis: Vec<f64> =
            (0..nc).map(|i| -self.epsilon + (i as f64 + 0.5) * width).collect();
        let m = nc.pow(dim as u32);
        let mut nodes = vec![0.0; m * dim];
        let mut weights = vec![0.0; m];
        for i in 0..m {
            let mut rest = i;
            let mut r2 = 0.0;
            for c in 0..dim {
                let v = axis[rest % nc];
                rest /= nc;
                nodes[i * dim + c] = v;
                r2 += v * v;
            }
            weights[i] = self.bump(r2 / (self.epsilon * self.epsilon));
        }
        let total = crate::numeric::pairwise_sum(&weights);
        for w in weights.iter_mut() {
            *w /= total;
        }
        MollifierQuadrature { dim, nodes, weights }
    }
}

/// Kernel convolved with a product mollifier in both arguments.
pub struct MollifiedKernel<K> {
    inner: K,
    quad: MollifierQuadrature,
    bounds: CoefficientBounds,
}

/// Convolve an interaction kernel with `rho_eps` in `(x, y)`; smooth in both
/// arguments and equal to the input wherever the input is constant on an
/// `eps`-ball.
pub fn mollify<K: InteractionKernel>(kernel: K, moll: &Mollifier) -> MollifiedKernel<K> {
    let quad = moll.quadrature(kernel.dim());
    let b = *kernel.bounds();
    // |bbar(x-u, y-v)| <= c0 (1 + |x| + eps + |y| + eps)
    let grow = 1.0 + 2.0 * moll.epsilon();
    let bounds = CoefficientBounds {
        c0: b.c0 * grow,
        kappa0: b.kappa0 * grow,
        ..b
    };
    MollifiedKernel { inner: kernel, quad, bounds }
}

impl<K: InteractionKernel> MollifiedKernel<K> {
    fn convolve(
        &self,
        t: f64,
        x: &[f64],
        y: &[f64],
        comps: usize,
        eval: impl Fn(f64, &[f64], &[f64], &mut [f64]),
        out: &mut [f64],
    ) {
        let d = self.quad.dim;
        let m = self.quad.weights.len();
        let mut xs = vec![0.0; d];
        let mut ys = vec![0.0; d];
        let mut tmp = vec![0.0; comps];
        out.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..m {
            let ua = &self.quad.nodes[a * d..(a + 1) * d];
            for c in 0..d {
                xs[c] = x[c] - ua[c];
            }
            for b in 0..m {
                let ub = &self.quad.nodes[b * d..(b + 1) * d];
                for c in 0..d {
                    ys[c] = y[c] - ub[c];
                }
                let w = self.quad.weights[a] * self.quad.weights[b];
                eval(t, &xs, &ys, &mut tmp);
                for (o, v) in out.iter_mut().zip(&tmp) {
                    *o += w * v;
                }
            }
        }
    }
}

impl<K: InteractionKernel> InteractionKernel for MollifiedKernel<K> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }
    fn drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        self.convolve(t, x, y, d, |t, a, b, o| self.inner.drift(t, a, b, o), out);
    }
    fn diffusion(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        self.convolve(t, x, y, d * d, |t, a, b, o| self.inner.diffusion(t, a, b, o), out);
    }
    fn drift_ignores_x(&self) -> bool {
        self.inner.drift_ignores_x()
    }
    fn diffusion_ignores_x(&self) -> bool {
        self.inner.diffusion_ignores_x()
    }
}

/// Spot-check the linear-growth bound `|bbar| + ||sigmabar|| <= c0 (1+|x|+|y|)`
/// on uniform random probes in the box of the given radius.
pub fn audit_kernel_growth<K: InteractionKernel + ?Sized>(
    kernel: &K,
    probes: usize,
    box_radius: f64,
    key: &StreamKey,
) -> Result<()> {
    let d = kernel.dim();
    let c0 = kernel.bounds().c0;
    let mut rng = key.rng();
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut s = vec![0.0; d * d];
    for i in 0..probes {
        for v in x.iter_mut().chain(y.iter_mut()) {
            *v = rng.gen_range(-box_radius..box_radius);
        }
        kernel.drift(0.0, &x, &y, &mut b);
        kernel.diffusion(0.0, &x, &y, &mut s);
        let lhs = norm2(&b) + hs_norm(&s);
        let rhs = c0 * (1.0 + norm2(&x) + norm2(&y));
        if lhs > rhs * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "growth bound violated at probe {i}: {lhs} > {rhs}"
            )));
        }
    }
    Ok(())
}

/// Spot-check `det(sigma sigma^T) >= c1` for a diffusion field on random
/// probes in the box of the given radius.
pub fn audit_nondegeneracy<S: DiffusionField + ?Sized>(
    field: &S,
    c1: f64,
    probes: usize,
    box_radius: f64,
    key: &StreamKey,
) -> Result<()> {
    let d = field.dim();
    let mut rng = key.rng();
    let mut x = vec![0.0; d];
    let mut s = vec![0.0; d * d];
    for i in 0..probes {
        for v in x.iter_mut() {
            *v = rng.gen_range(-box_radius..box_radius);
        }
        let t = rng.gen_range(0.0..1.0);
        field.eval(t, &x, &mut s);
        let det = crate::numeric::gram_det(&s, d);
        if det < c1 * (1.0 - 1e-12) {
            return Err(Error::invalid(format!(
                "nondegeneracy violated at probe {i}: det {det} < {c1}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_density_values() {
        let v = gaussian_density(1.0, &[0.0]).unwrap();
        assert_relative_eq!(v, 1.0 / (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(v, 0.398942, max_relative = 1e-5);
        let v2 = gaussian_density(1.0, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(v2, 1.0 / (2.0 * std::f64::consts::PI), max_relative = 1e-15);
        assert!(gaussian_density(0.0, &[0.0]).is_err());
        assert!(gaussian_density(-1.0, &[0.0]).is_err());
    }

    #[test]
    fn gaussian_density_normalizes() {
        // midpoint quadrature over [-8, 8], d = 1
        let n = 4000;
        let w = 16.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let x = -8.0 + (i as f64 + 0.5) * w;
            total += gaussian_density(1.0, &[x]).unwrap() * w;
        }
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
    }

    #[test]
    fn cutoff_regions() {
        let radius = 2.0;
        let field = CutoffDrift::new(
            FnDrift::new(1, |_, _, out: &mut [f64]| out[0] = 3.0),
            radius,
        )
        .unwrap();
        let mut out = [0.0];
        field.eval(0.0, &[1.0], &mut out);
        assert_eq!(out[0], 3.0); // |x| = R/2: unchanged
        field.eval(0.0, &[4.0], &mut out);
        assert_eq!(out[0], 0.0); // |x| = R+2: zero
        field.eval(0.0, &[2.5], &mut out);
        assert!(out[0] > 0.0 && out[0] < 3.0); // transition band
        // monotone in |x| on the band
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let x = radius + i as f64 / 20.0;
            field.eval(0.0, &[x], &mut out);
            assert!(out[0] <= prev + 1e-15);
            prev = out[0];
        }
        // sandwich: 0 <= chi <= 1 everywhere
        for i in 0..200 {
            let r = i as f64 * 0.05;
            let w = chi(r, radius);
            assert!((0.0..=1.0).contains(&w));
        }
    }

    #[test]
    fn mollifier_weights_normalized() {
        for eps in [1.0, 0.1, 0.01] {
            for d in [1usize, 2] {
                let q = Mollifier::new(eps, 9).unwrap().quadrature(d);
                let total = crate::numeric::pairwise_sum(&q.weights);
                assert!((total - 1.0).abs() < 1e-10, "eps={eps} d={d} sum={total}");
                assert!(q.weights.iter().all(|&w| w >= 0.0));
                // support inside the eps-ball
                for i in 0..q.weights.len() {
                    let node = &q.nodes[i * d..(i + 1) * d];
                    if q.weights[i] > 0.0 {
                        assert!(norm2(node) < eps);
                    }
                }
            }
        }
    }

    #[test]
    fn mollify_constant_and_sign() {
        let bounds = CoefficientBounds::linear_growth(6.0, 1.0, 4.0).unwrap();
        let kernel = FnKernel::new(
            1,
            bounds,
            |_, x: &[f64], _: &[f64], out: &mut [f64]| out[0] = sgn(x[0]),
            |_, _: &[f64], _: &[f64], out: &mut [f64]| out[0] = 5.0,
        );
        let eps = 0.5;
        let moll = Mollifier::new(eps, 9).unwrap();
        let m = mollify(kernel, &moll);
        let mut out = [0.0];
        // constant input stays constant
        m.diffusion(0.0, &[0.3], &[std::f64::consts::E], &mut out);
        assert_relative_eq!(out[0], 5.0, max_relative = 1e-12);
        // odd symmetry of rho: mollified sign vanishes at 0
        m.drift(0.0, &[0.0], &[0.0], &mut out);
        assert!(out[0].abs() < 1e-12, "mollified sign at 0: {}", out[0]);
        // outside the support band the input is recovered
        m.drift(0.0, &[2.0 * eps], &[0.0], &mut out);
        assert_relative_eq!(out[0], 1.0, max_relative = 1e-12);
        m.drift(0.0, &[-2.0 * eps], &[0.0], &mut out);
        assert_relative_eq!(out[0], -1.0, max_relative = 1e-12);
    }

    #[test]
    fn catalog_growth_audits() {
        let key = StreamKey::new(555);
        audit_kernel_growth(&MeanKernel::new(1), 10_000, 10.0, &key).unwrap();
        audit_kernel_growth(&MeanKernel::new(2), 10_000, 10.0, &key).unwrap();
        audit_kernel_growth(&SignKernel::new(), 10_000, 10.0, &key).unwrap();
        let moll = Mollifier::new(0.25, 5).unwrap();
        audit_kernel_growth(&mollify(MeanKernel::new(1), &moll), 2_000, 10.0, &key).unwrap();
    }

    #[test]
    fn catalog_nondegeneracy_audits() {
        let key = StreamKey::new(556);
        audit_nondegeneracy(&IdentityDiffusion::new(2), 1.0, 5_000, 10.0, &key).unwrap();
        audit_nondegeneracy(&SignDiscDiffusion::new(), 1.0, 5_000, 10.0, &key).unwrap();
        let sigma0 = ConstantDiffusion::new(2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        audit_nondegeneracy(&sigma0, 1.0, 5_000, 10.0, &key).unwrap();
        // a degenerate field fails the audit
        let zero = ConstantDiffusion::new(1, vec![0.0]).unwrap();
        assert!(audit_nondegeneracy(&zero, 1.0, 10, 1.0, &key).is_err());
    }
}
