//! Builtin test models: constant fields, Ornstein-Uhlenbeck, discontinuous
//! sign drift, and the mean / sign interaction kernels.

use crate::error::{Error, Result};

use super::{CoefficientBounds, DiffusionField, DriftField, InteractionKernel};

/// Sign with the mathematical convention `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn write_identity(out: &mut [f64], d: usize, scale: f64) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..d {
        out[i * d + i] = scale;
    }
}

/// `b = b0` constant.
pub struct ConstantDrift {
    b0: Vec<f64>,
}

impl ConstantDrift {
    pub fn new(b0: Vec<f64>) -> Self {
        ConstantDrift { b0 }
    }
}

impl DriftField for ConstantDrift {
    fn dim(&self) -> usize {
        self.b0.len()
    }
    fn eval(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b0);
    }
}

/// `sigma = sigma0` constant (row-major `d x d`).
pub struct ConstantDiffusion {
    dim: usize,
    sigma0: Vec<f64>,
}

impl ConstantDiffusion {
    pub fn new(dim: usize, sigma0: Vec<f64>) -> Result<Self> {
        if sigma0.len() != dim * dim {
            return Err(Error::invalid("sigma0 must be a d x d matrix"));
        }
        Ok(ConstantDiffusion { dim, sigma0 })
    }

    pub fn isotropic(dim: usize, scale: f64) -> Self {
        let mut sigma0 = vec![0.0; dim * dim];
        for i in 0..dim {
            sigma0[i * dim + i] = scale;
        }
        ConstantDiffusion { dim, sigma0 }
    }
}

impl DiffusionField for ConstantDiffusion {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.sigma0);
    }
}

/// Identity diffusion.
pub struct IdentityDiffusion {
    dim: usize,
}

impl IdentityDiffusion {
    pub fn new(dim: usize) -> Self {
        IdentityDiffusion { dim }
    }
}

impl DiffusionField for IdentityDiffusion {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        write_identity(out, self.dim, 1.0);
    }
}

/// Ornstein-Uhlenbeck drift `b(x) = -theta x`.
pub struct OuDrift {
    dim: usize,
    theta: f64,
}

impl OuDrift {
    pub fn new(dim: usize, theta: f64) -> Self {
        OuDrift { dim, theta }
    }
}

impl DriftField for OuDrift {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = -self.theta * v;
        }
    }
}

/// Discontinuous bounded drift `b(x) = -a sgn(x)` in d = 1.
pub struct SignDrift {
    a: f64,
}

impl SignDrift {
    pub fn new(a: f64) -> Self {
        SignDrift { a }
    }
}

impl DriftField for SignDrift {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = -self.a * sgn(x[0]);
    }
}

/// Discontinuous diffusion `sigma(x) = 1 + 1/2 1_{x > 0}` in d = 1.
pub struct SignDiscDiffusion;

impl SignDiscDiffusion {
    #[allow(clippy::new_without_default)]
    pub fn new() -> Self {
        SignDiscDiffusion
    }
}

impl DiffusionField for SignDiscDiffusion {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = if x[0] > 0.0 { 1.5 } else { 1.0 };
    }
}

/// Mean interaction kernel: `bbar(x, y) = y`, `sigmabar = I`.
///
/// The mean-field coefficient is the measure mean, so the particle mean obeys
/// the explicit Euler recursion for `m' = m`; both kernel parts ignore `x`.
pub struct MeanKernel {
    dim: usize,
    bounds: CoefficientBounds,
}

impl MeanKernel {
    pub fn new(dim: usize) -> Self {
        let c0 = 1.0 + (dim as f64).sqrt();
        let bounds = CoefficientBounds::linear_growth(c0, 1.0, 4.0).unwrap();
        MeanKernel { dim, bounds }
    }
}

impl InteractionKernel for MeanKernel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }
    fn drift(&self, _t: f64, _x: &[f64], y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
    fn diffusion(&self, _t: f64, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        write_identity(out, self.dim, 1.0);
    }
    fn drift_ignores_x(&self) -> bool {
        true
    }
    fn diffusion_ignores_x(&self) -> bool {
        true
    }
}

/// Bounded discontinuous kernel in d = 1:
/// `bbar(x, y) = sgn(x - y)`, `sigmabar(y) = (1 + 1/2 1_{|y| < 1}) I`.
pub struct SignKernel {
    bounds: CoefficientBounds,
}

impl SignKernel {
    #[allow(clippy::new_without_default)]
    pub fn new() -> Self {
        let bounds = CoefficientBounds::linear_growth(2.5, 1.0, 4.0).unwrap();
        SignKernel { bounds }
    }
}

impl InteractionKernel for SignKernel {
    fn dim(&self) -> usize {
        1
    }
    fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }
    fn drift(&self, _t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = sgn(x[0] - y[0]);
    }
    fn diffusion(&self, _t: f64, _x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = if y[0].abs() < 1.0 { 1.5 } else { 1.0 };
    }
    fn diffusion_ignores_x(&self) -> bool {
        true
    }
}

/// Kernel with no dependence on the second argument; the mean-field dynamics
/// reduces to the classical SDE `(b, sigma)`. Used to test coupling
/// integrity.
pub struct NoInteractionKernel<B, S> {
    drift: B,
    diffusion: S,
    bounds: CoefficientBounds,
}

impl<B: DriftField, S: DiffusionField> NoInteractionKernel<B, S> {
    pub fn new(drift: B, diffusion: S, bounds: CoefficientBounds) -> Self {
        NoInteractionKernel { drift, diffusion, bounds }
    }
}

impl<B: DriftField, S: DiffusionField> InteractionKernel for NoInteractionKernel<B, S> {
    fn dim(&self) -> usize {
        self.drift.dim()
    }
    fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }
    fn drift(&self, t: f64, x: &[f64], _y: &[f64], out: &mut [f64]) {
        self.drift.eval(t, x, out);
    }
    fn diffusion(&self, t: f64, x: &[f64], _y: &[f64], out: &mut [f64]) {
        self.diffusion.eval(t, x, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgn_convention() {
        assert_eq!(sgn(2.0), 1.0);
        assert_eq!(sgn(-0.5), -1.0);
        assert_eq!(sgn(0.0), 0.0);
    }

    #[test]
    fn ou_drift_values() {
        let b = OuDrift::new(2, 1.5);
        let mut out = [0.0; 2];
        b.eval(0.0, &[2.0, -1.0], &mut out);
        assert_eq!(out, [-3.0, 1.5]);
    }

    #[test]
    fn sign_models() {
        let b = SignDrift::new(2.0);
        let mut out = [0.0];
        b.eval(0.0, &[0.3], &mut out);
        assert_eq!(out[0], -2.0);
        b.eval(0.0, &[-0.3], &mut out);
        assert_eq!(out[0], 2.0);
        let s = SignDiscDiffusion::new();
        s.eval(0.0, &[0.1], &mut out);
        assert_eq!(out[0], 1.5);
        s.eval(0.0, &[-0.1], &mut out);
        assert_eq!(out[0], 1.0);
        s.eval(0.0, &[0.0], &mut out);
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn kernels_evaluate() {
        let mk = MeanKernel::new(2);
        let mut b = [0.0; 2];
        let mut s = [0.0; 4];
        mk.drift(0.0, &[9.0, 9.0], &[1.0, 2.0], &mut b);
        assert_eq!(b, [1.0, 2.0]);
        mk.diffusion(0.0, &[0.0; 2], &[0.0; 2], &mut s);
        assert_eq!(s, [1.0, 0.0, 0.0, 1.0]);
        assert!(mk.drift_ignores_x() && mk.diffusion_ignores_x());

        let sk = SignKernel::new();
        let mut b1 = [0.0];
        sk.drift(0.0, &[1.0], &[0.5], &mut b1);
        assert_eq!(b1[0], 1.0);
        sk.drift(0.0, &[0.5], &[1.0], &mut b1);
        assert_eq!(b1[0], -1.0);
        sk.diffusion(0.0, &[0.0], &[0.5], &mut b1);
        assert_eq!(b1[0], 1.5);
        sk.diffusion(0.0, &[0.0], &[1.5], &mut b1);
        assert_eq!(b1[0], 1.0);
        assert!(!sk.drift_ignores_x());
    }
}
