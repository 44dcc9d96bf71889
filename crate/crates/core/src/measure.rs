//! Empirical measures, kernel averaging, and Wasserstein distances.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::coeffs::InteractionKernel;
use crate::error::{Error, Result};
use crate::numeric::{norm2, pairwise_sum};
use crate::stream::StreamKey;

/// Borrowed view of `n` points of dimension `d` stored flat.
#[derive(Debug, Clone, Copy)]
pub struct AtomsView<'a> {
    dim: usize,
    data: &'a [f64],
}

impl<'a> AtomsView<'a> {
    pub fn new(dim: usize, data: &'a [f64]) -> Self {
        debug_assert_eq!(data.len() % dim, 0);
        AtomsView { dim, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Atomic probability measure: `n x d` atoms with nonnegative weights
/// summing to one (uniform `1/n` by default).
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    uniform: bool,
}

impl EmpiricalMeasure {
    /// Uniform-weight measure on the given flat `n x d` positions.
    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || atoms.len() % dim != 0 {
            return Err(Error::invalid("need at least one atom of positive dimension"));
        }
        let n = atoms.len() / dim;
        Ok(EmpiricalMeasure { dim, atoms, weights: vec![1.0 / n as f64; n], uniform: true })
    }

    /// Measure with explicit weights; they must sum to 1 within 1e-12.
    pub fn weighted(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || atoms.len() % dim != 0 {
            return Err(Error::invalid("need at least one atom of positive dimension"));
        }
        if weights.len() != atoms.len() / dim {
            return Err(Error::invalid("one weight per atom required"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        let total = pairwise_sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(EmpiricalMeasure { dim, atoms, weights, uniform: false })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atoms(&self) -> AtomsView<'_> {
        AtomsView::new(self.dim, &self.atoms)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// `mu(|.|^beta)^{1/beta}`, the beta-moment of the measure.
    pub fn moment(&self, beta: f64) -> Result<f64> {
        if beta < 1.0 {
            return Err(Error::invalid("moment order must be at least 1"));
        }
        let v = self.atoms();
        let s = pairwise_sum(
            &(0..v.len())
                .map(|i| self.weights[i] * norm2(v.atom(i)).powf(beta))
                .collect::<Vec<_>>(),
        );
        Ok(s.powf(1.0 / beta))
    }
}

/// Scratch buffers for kernel averaging; reuse across calls to avoid
/// per-step allocation in the particle loops.
#[derive(Debug, Default, Clone)]
pub struct KernelWorkspace {
    col: Vec<f64>,
    tmp: Vec<f64>,
}

fn average_components<E>(
    comps: usize,
    atoms: AtomsView<'_>,
    weights: Option<&[f64]>,
    ws: &mut KernelWorkspace,
    mut eval: E,
    out: &mut [f64],
) where
    E: FnMut(&[f64], &mut [f64]),
{
    let m = atoms.len();
    ws.col.resize(comps * m, 0.0);
    ws.tmp.resize(comps, 0.0);
    for i in 0..m {
        let (col, tmp) = (&mut ws.col, &mut ws.tmp);
        eval(atoms.atom(i), tmp);
        let w = weights.map_or(1.0, |ws| ws[i] * m as f64);
        for c in 0..comps {
            // store column-major so each component reduces over a contiguous run
            col[c * m + i] = if weights.is_some() { w * tmp[c] } else { tmp[c] };
        }
    }
    for c in 0..comps {
        out[c] = pairwise_sum(&ws.col[c * m..(c + 1) * m]) / m as f64;
    }
}

/// Average of `bbar(t, x, .)` over the atoms, in ascending atom order with
/// pairwise summation: `(1/n) sum_i w_i n bbar(t, x, y_i)`.
///
/// For uniform weights this is exactly `pairwise_sum(values) / n`, the same
/// arithmetic the particle engines use.
pub fn kernel_drift_average<K: InteractionKernel + ?Sized>(
    kernel: &K,
    t: f64,
    x: &[f64],
    atoms: AtomsView<'_>,
    weights: Option<&[f64]>,
    ws: &mut KernelWorkspace,
    out: &mut [f64],
) {
    let d = kernel.dim();
    average_components(d, atoms, weights, ws, |y, tmp| kernel.drift(t, x, y, tmp), out);
}

/// Average of `sigmabar(t, x, .)` over the atoms; see
/// [`kernel_drift_average`].
pub fn kernel_diffusion_average<K: InteractionKernel + ?Sized>(
    kernel: &K,
    t: f64,
    x: &[f64],
    atoms: AtomsView<'_>,
    weights: Option<&[f64]>,
    ws: &mut KernelWorkspace,
    out: &mut [f64],
) {
    let d = kernel.dim();
    average_components(d * d, atoms, weights, ws, |y, tmp| kernel.diffusion(t, x, y, tmp), out);
}

type MeasureFn = dyn Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync;

/// Measure-dependent coefficient `(b, sigma)(t, x, mu)`, evaluated on atomic
/// measures.
pub struct MeasureCoefficient {
    dim: usize,
    drift: Arc<MeasureFn>,
    diffusion: Arc<MeasureFn>,
}

impl MeasureCoefficient {
    /// User-supplied evaluators (general measure dependence).
    pub fn from_fns(
        dim: usize,
        drift: Arc<MeasureFn>,
        diffusion: Arc<MeasureFn>,
    ) -> Self {
        MeasureCoefficient { dim, drift, diffusion }
    }

    /// Coefficients obtained by averaging an interaction kernel against the
    /// measure. On a uniform atomic measure the result is bit-identical to
    /// the plain arithmetic mean of kernel evaluations in atom order.
    pub fn from_kernel<K: InteractionKernel + 'static>(kernel: K) -> Self {
        let dim = kernel.dim();
        let kernel = Arc::new(kernel);
        let kd = kernel.clone();
        let drift = Arc::new(move |t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]| {
            let mut ws = KernelWorkspace::default();
            let weights = if mu.is_uniform() { None } else { Some(mu.weights()) };
            kernel_drift_average(kd.as_ref(), t, x, mu.atoms(), weights, &mut ws, out);
        });
        let ks = kernel;
        let diffusion =
            Arc::new(move |t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]| {
                let mut ws = KernelWorkspace::default();
                let weights = if mu.is_uniform() { None } else { Some(mu.weights()) };
                kernel_diffusion_average(ks.as_ref(), t, x, mu.atoms(), weights, &mut ws, out);
            });
        MeasureCoefficient { dim, drift, diffusion }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) -> Result<()> {
        if mu.is_empty() {
            return Err(Error::invalid("empty measure"));
        }
        (self.drift)(t, x, mu, out);
        Ok(())
    }

    pub fn diffusion(
        &self,
        t: f64,
        x: &[f64],
        mu: &EmpiricalMeasure,
        out: &mut [f64],
    ) -> Result<()> {
        if mu.is_empty() {
            return Err(Error::invalid("empty measure"));
        }
        (self.diffusion)(t, x, mu, out);
        Ok(())
    }
}

/// Wasserstein order, 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WassersteinOrder {
    One,
    Two,
}

impl WassersteinOrder {
    fn p(self) -> f64 {
        match self {
            WassersteinOrder::One => 1.0,
            WassersteinOrder::Two => 2.0,
        }
    }
}

/// `W_p(mu, nu)`: exact quantile coupling in d = 1, sliced estimate with 64
/// fixed key-derived projections in higher dimension.
pub fn wasserstein(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    order: WassersteinOrder,
) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    if mu.dim() == 1 {
        let xs: Vec<f64> = mu.atoms().data.to_vec();
        let ys: Vec<f64> = nu.atoms().data.to_vec();
        wasserstein_1d(&xs, mu.weights(), mu.is_uniform(), &ys, nu.weights(), nu.is_uniform(), order)
    } else {
        sliced_wasserstein(mu, nu, order, SLICED_PROJECTIONS, &StreamKey::new(SLICED_SEED))
    }
}

const SLICED_PROJECTIONS: usize = 64;
const SLICED_SEED: u64 = 0x5743_u64; // fixed: projections must not depend on config

fn wasserstein_1d(
    xs: &[f64],
    wx: &[f64],
    ux: bool,
    ys: &[f64],
    wy: &[f64],
    uy: bool,
    order: WassersteinOrder,
) -> Result<f64> {
    if !(ux && uy) && xs.len() != ys.len() {
        return Err(Error::Unsupported(
            "d=1 exact mode requires uniform weights or equal atom counts".into(),
        ));
    }
    let p = order.p();
    if ux && uy && xs.len() == ys.len() {
        // sorted coupling
        let mut a = xs.to_vec();
        let mut b = ys.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let n = a.len();
        let s = pairwise_sum(
            &(0..n).map(|i| (a[i] - b[i]).abs().powf(p)).collect::<Vec<_>>(),
        ) / n as f64;
        return Ok(s.powf(1.0 / p));
    }
    // general quantile coupling: merge the two weighted CDFs
    let mut a: Vec<(f64, f64)> = xs.iter().copied().zip(wx.iter().copied()).collect();
    let mut b: Vec<(f64, f64)> = ys.iter().copied().zip(wy.iter().copied()).collect();
    a.sort_by(|u, v| u.0.total_cmp(&v.0));
    b.sort_by(|u, v| u.0.total_cmp(&v.0));
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut acc = 0.0;
    loop {
        let step = ra.min(rb);
        acc += step * (a[i].0 - b[j].0).abs().powf(p);
        ra -= step;
        rb -= step;
        if ra <= 1e-15 {
            i += 1;
            if i >= a.len() {
                break;
            }
            ra = a[i].1;
        }
        if rb <= 1e-15 {
            j += 1;
            if j >= b.len() {
                break;
            }
            rb = b[j].1;
        }
    }
    Ok(acc.powf(1.0 / p))
}

/// Sliced Wasserstein estimate: average of the 1-d distance over random
/// unit directions derived from `key`. Reported as an estimate only.
pub fn sliced_wasserstein(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    order: WassersteinOrder,
    projections: usize,
    key: &StreamKey,
) -> Result<f64> {
    let d = mu.dim();
    let p = order.p();
    let mut acc = Vec::with_capacity(projections);
    for k in 0..projections {
        let mut rng = key.child("proj", k as u64).rng();
        let mut dir = vec![0.0; d];
        loop {
            for v in dir.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let n = norm2(&dir);
            if n > 1e-12 {
                dir.iter_mut().for_each(|v| *v /= n);
                break;
            }
        }
        let proj = |m: &EmpiricalMeasure| -> Vec<f64> {
            let v = m.atoms();
            (0..v.len()).map(|i| crate::numeric::dot(v.atom(i), &dir)).collect()
        };
        let xs = proj(mu);
        let ys = proj(nu);
        let w = wasserstein_1d(
            &xs,
            mu.weights(),
            mu.is_uniform(),
            &ys,
            nu.weights(),
            nu.is_uniform(),
            order,
        )?;
        acc.push(w.powf(p));
    }
    Ok((pairwise_sum(&acc) / projections as f64).powf(1.0 / p))
}
