//! Statistical checks of the discretized occupation estimates: averages
//! `(1/N) sum_k E f_k(xi_k)` of discretized Ito paths against discrete
//! `L^p` norms of the test family.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ito::DiscretizedItoPath;
use crate::numeric::{ball_volume, pairwise_sum};
use crate::stats::{mc_estimate, Estimate};

type PointFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// How a member's `L^p` norm is obtained.
#[derive(Clone)]
pub enum NormProvider {
    /// Closed form `p -> ||f||_{L^p}` with a tag describing the formula.
    ClosedForm { func: Arc<dyn Fn(f64) -> f64 + Send + Sync>, tag: String },
    /// Midpoint-rule quadrature over the box `[lo, hi]^d`.
    Quadrature { lo: f64, hi: f64, per_axis: usize },
    /// No provider; `lp_seq_norm` reports unsupported.
    None,
}

/// One nonnegative test function with its norm provider.
#[derive(Clone)]
pub struct GridFunction {
    pub eval: Arc<PointFn>,
    pub norm: NormProvider,
}

/// Family `f_1..f_N`, one member per time step of the path it is paired
/// with.
#[derive(Clone)]
pub struct GridFunctionFamily {
    dim: usize,
    members: Vec<GridFunction>,
    /// all members are the same function (time-independent family)
    uniform: bool,
}

impl GridFunctionFamily {
    pub fn new(dim: usize, members: Vec<GridFunction>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("family must not be empty"));
        }
        Ok(GridFunctionFamily { dim, members, uniform: false })
    }

    /// Family with every member equal to `f` (the time-independent case of
    /// the estimate, where the normalizer reduces to `||f||_{L^p}`).
    pub fn constant(dim: usize, count: usize, f: GridFunction) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("family must not be empty"));
        }
        Ok(GridFunctionFamily { dim, members: vec![f; count], uniform: true })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn member(&self, k: usize) -> &GridFunction {
        &self.members[k]
    }
}

/// Indicator of the centered ball of radius `r`, with the closed-form norm
/// `vol(B_r)^{1/p}`, replicated `count` times.
pub fn ball_indicator_family(r: f64, dim: usize, count: usize) -> Result<GridFunctionFamily> {
    if !(r > 0.0) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    let eval: Arc<PointFn> = Arc::new(move |x: &[f64]| {
        let q: f64 = x.iter().map(|v| v * v).sum();
        if q.sqrt() <= r {
            1.0
        } else {
            0.0
        }
    });
    let norm = NormProvider::ClosedForm {
        func: Arc::new(move |p| ball_volume(r, dim).powf(1.0 / p)),
        tag: format!("vol(B_{r})^(1/p), d={dim}"),
    };
    GridFunctionFamily::constant(dim, count, GridFunction { eval, norm })
}

/// Per-path occupation functional `(1/N) sum_{k=1..N} f_k(xi_k)`;
/// `xi_0` is excluded, matching the sum's range.
pub fn occupation_value(path: &DiscretizedItoPath, family: &GridFunctionFamily) -> Result<f64> {
    let n = path.steps();
    if family.len() != n {
        return Err(Error::invalid(format!(
            "family size {} does not match path step count {n}",
            family.len()
        )));
    }
    if family.dim() != path.dim() {
        return Err(Error::invalid("family dimension mismatch"));
    }
    let s = crate::numeric::pairwise_sum_by(n, |k| (family.member(k).eval)(path.values.node(k + 1)));
    Ok(s / n as f64)
}

/// MC estimate of the occupation average over replications.
pub fn occupation_average(
    paths: &[DiscretizedItoPath],
    family: &GridFunctionFamily,
) -> Result<Estimate> {
    if paths.is_empty() {
        return Err(Error::invalid("need at least one replication"));
    }
    let vals = paths.iter().map(|p| occupation_value(p, family)).collect::<Result<Vec<_>>>()?;
    Ok(mc_estimate(&vals))
}

fn member_norm(f: &GridFunction, p: f64, dim: usize) -> Result<f64> {
    match &f.norm {
        NormProvider::ClosedForm { func, .. } => Ok(func(p)),
        NormProvider::Quadrature { lo, hi, per_axis } => {
            let nc = *per_axis;
            let width = (hi - lo) / nc as f64;
            let cells = nc.pow(dim as u32);
            let cell_vol = width.powi(dim as i32);
            let mut x = vec![0.0; dim];
            let s = crate::numeric::pairwise_sum_by(cells, |i| {
                let mut rest = i;
                for c in 0..dim {
                    x[c] = lo + (rest % nc) as f64 * width + 0.5 * width;
                    rest /= nc;
                }
                (f.eval)(&x).abs().powf(p) * cell_vol
            });
            Ok(s.powf(1.0 / p))
        }
        NormProvider::None => {
            Err(Error::Unsupported("family member has no norm provider".into()))
        }
    }
}

/// The discrete normalizer `((1/N) sum_k ||f_k||_{L^p}^p)^{1/p}`.
pub fn lp_seq_norm(family: &GridFunctionFamily, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::invalid("p must exceed 1"));
    }
    let n = family.len();
    let mut powers = Vec::with_capacity(n);
    for k in 0..n {
        powers.push(member_norm(family.member(k), p, family.dim())?.powf(p));
    }
    Ok((pairwise_sum(&powers) / n as f64).powf(1.0 / p))
}

/// Occupation average divided by the discrete `L^p` normalizer, with the MC
/// error propagated (the denominator is deterministic). For a uniform
/// (time-independent) family this equals the single-norm variant.
pub fn krylov_ratio(
    paths: &[DiscretizedItoPath],
    family: &GridFunctionFamily,
    p: f64,
) -> Result<Estimate> {
    let denom = if family.is_uniform() {
        member_norm(family.member(0), p, family.dim())?
    } else {
        lp_seq_norm(family, p)?
    };
    if denom == 0.0 {
        return Err(Error::DegenerateFamily("zero L^p normalizer".into()));
    }
    let occ = occupation_average(paths, family)?;
    Ok(Estimate {
        value: occ.value / denom,
        stderr: occ.stderr / denom,
        replications: occ.replications,
    })
}
