//! Error functionals and statistical checks: strong sup-error under
//! coupling, weak occupation error, moment and Hölder bounds, mean-field
//! kernel-average deviation, and log-log rate regression.
//!
//! The sup over `[0, T]` is taken over the finest node set available to a
//! comparison: when grids differ, both paths are evaluated at the union of
//! their nodes, each by its most recent own node (floored extension). No
//! intra-node interpolation randomness is invented.

use std::sync::Arc;

use crate::coeffs::InteractionKernel;
use crate::error::{Error, Result};
use crate::euler::{EulerPath, Trajectory};
use crate::grid::TimeGrid;
use crate::measure::AtomsView;
use crate::numeric::pairwise_sum;
use crate::particles::{IidEnsemble, ParticleEnsemble};
use crate::stats::{combined_stderr, mc_estimate, Estimate};

/// Borrowed view of an ensemble of trajectories on one grid, with one
/// driver fingerprint per replication for coupling checks.
pub struct PathSample<'a> {
    pub grid: TimeGrid,
    pub dim: usize,
    pub paths: Vec<&'a Trajectory>,
    pub drivers: Vec<u64>,
}

impl<'a> PathSample<'a> {
    pub fn from_euler(paths: &'a [EulerPath]) -> Result<Self> {
        let first = paths.first().ok_or_else(|| Error::invalid("empty ensemble"))?;
        let grid = first.grid;
        if paths.iter().any(|p| p.grid != grid) {
            return Err(Error::invalid("paths live on different grids"));
        }
        Ok(PathSample {
            grid,
            dim: first.states.dim(),
            paths: paths.iter().map(|p| &p.states).collect(),
            drivers: paths.iter().map(|p| p.driver).collect(),
        })
    }

    pub fn from_parts(grid: TimeGrid, paths: Vec<&'a Trajectory>, drivers: Vec<u64>) -> Result<Self> {
        let first = paths.first().ok_or_else(|| Error::invalid("empty ensemble"))?;
        if drivers.len() != paths.len() {
            return Err(Error::invalid("one driver fingerprint per path required"));
        }
        Ok(PathSample { grid, dim: first.dim(), paths, drivers })
    }

    fn replications(&self) -> usize {
        self.paths.len()
    }
}

fn sup_sq_diff(
    a: &Trajectory,
    b: &Trajectory,
    stride_a: usize,
    stride_b: usize,
    union_nodes: usize,
) -> f64 {
    let d = a.dim();
    let mut sup = 0.0f64;
    for k in 0..=union_nodes {
        let xa = a.node(k / stride_a);
        let xb = b.node(k / stride_b);
        let mut q = 0.0;
        for c in 0..d {
            let diff = xa[c] - xb[c];
            q += diff * diff;
        }
        sup = sup.max(q);
    }
    sup
}

fn union_strides(ga: &TimeGrid, gb: &TimeGrid) -> Result<(usize, usize, usize)> {
    // returns (stride_a, stride_b, union step count): strides map union node
    // index to each path's own floored node index
    if ga.steps() >= gb.steps() {
        let s = ga
            .stride_over(gb)
            .ok_or_else(|| Error::invalid("grids do not nest"))?;
        Ok((1, s, ga.steps()))
    } else {
        let s = gb
            .stride_over(ga)
            .ok_or_else(|| Error::invalid("grids do not nest"))?;
        Ok((s, 1, gb.steps()))
    }
}

/// `sup_t |A - B|^2` for one coupled pair of paths, evaluated on the union
/// of their node sets with floored extension.
pub fn strong_sup_sq(a: &EulerPath, b: &EulerPath) -> Result<f64> {
    if a.driver != b.driver {
        return Err(Error::invalid("paths are not coupled (different drivers)"));
    }
    if a.states.dim() != b.states.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    let (sa, sb, union_nodes) = union_strides(&a.grid, &b.grid)?;
    Ok(sup_sq_diff(&a.states, &b.states, sa, sb, union_nodes))
}

/// `E sup_t |A - B|^2` for coupled ensembles, the per-replication sup taken
/// before averaging. Ensembles must be driven by the same keys.
pub fn strong_error(a: &PathSample<'_>, b: &PathSample<'_>) -> Result<Estimate> {
    if a.replications() != b.replications() {
        return Err(Error::invalid("replication counts differ"));
    }
    if a.dim != b.dim {
        return Err(Error::invalid("dimension mismatch"));
    }
    if a.drivers != b.drivers {
        return Err(Error::invalid(
            "ensembles are not coupled (different master keys); the strong error is meaningless",
        ));
    }
    let (sa, sb, union_nodes) = union_strides(&a.grid, &b.grid)?;
    let sups: Vec<f64> = a
        .paths
        .iter()
        .zip(&b.paths)
        .map(|(pa, pb)| sup_sq_diff(pa, pb, sa, sb, union_nodes))
        .collect();
    Ok(mc_estimate(&sups))
}

/// Per-particle `sup_t |X^{N,j} - Xbar^j|^2` for one synchronized pair.
pub fn chaos_sup_sq_per_particle(
    sys: &ParticleEnsemble,
    iid: &IidEnsemble,
) -> Result<Vec<f64>> {
    if sys.coupling != iid.coupling {
        return Err(Error::invalid("ensembles are not synchronized (different master keys)"));
    }
    if sys.grid != iid.grid || sys.n_particles() != iid.n_tracked() {
        return Err(Error::invalid("ensemble shapes differ"));
    }
    let nodes = sys.grid.steps();
    Ok((0..sys.n_particles())
        .map(|j| sup_sq_diff(&sys.trajectories[j], &iid.tracked[j], 1, 1, nodes))
        .collect())
}

/// Propagation-of-chaos error: for each tracked index `j`, the MC estimate
/// over replications of `sup_t |X^{N,j} - Xbar^j|^2`, then the max over `j`.
pub fn chaos_sup_error(pairs: &[(&ParticleEnsemble, &IidEnsemble)]) -> Result<Estimate> {
    let (first_sys, first_iid) = pairs.first().ok_or_else(|| Error::invalid("empty ensemble"))?;
    let n_j = first_sys.n_particles();
    if first_iid.n_tracked() != n_j {
        return Err(Error::invalid("tracked count must equal particle count"));
    }
    for (sys, iid) in pairs {
        if sys.coupling != iid.coupling {
            return Err(Error::invalid(
                "ensembles are not synchronized (different master keys)",
            ));
        }
        if sys.grid != iid.grid || sys.n_particles() != n_j || iid.n_tracked() != n_j {
            return Err(Error::invalid("ensemble shapes differ across replications"));
        }
    }
    let nodes = first_sys.grid.steps();
    let mut worst: Option<Estimate> = None;
    let mut sups = vec![0.0; pairs.len()];
    for j in 0..n_j {
        for (r, (sys, iid)) in pairs.iter().enumerate() {
            sups[r] = sup_sq_diff(&sys.trajectories[j], &iid.tracked[j], 1, 1, nodes);
        }
        let est = mc_estimate(&sups);
        if worst.as_ref().is_none_or(|w| est.value > w.value) {
            worst = Some(est);
        }
    }
    Ok(worst.unwrap())
}

/// Bounded measurable test function with its declared bound.
#[derive(Clone)]
pub struct BoundedFn {
    pub eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub bound: f64,
    pub name: String,
}

impl BoundedFn {
    pub fn indicator_halfline() -> Self {
        BoundedFn {
            eval: Arc::new(|x: &[f64]| if x[0] >= 0.0 { 1.0 } else { 0.0 }),
            bound: 1.0,
            name: "1_{x1 >= 0}".into(),
        }
    }
}

fn occupation_functional(sample: &PathSample<'_>, f: &BoundedFn) -> Vec<f64> {
    // h * sum_{k=0}^{n-1} f(X at node k): the floored-time occupation integral
    let h = sample.grid.step();
    let n = sample.grid.steps();
    sample
        .paths
        .iter()
        .map(|p| h * crate::numeric::pairwise_sum_by(n, |k| (f.eval)(p.node(k))))
        .collect()
}

/// `|E int_0^T f(X^h_{t_h}) dt - same on the reference|` with combined
/// standard error. Requires a declared finite bound on `f`.
pub fn weak_occupation_error(
    sample: &PathSample<'_>,
    f: &BoundedFn,
    reference: &PathSample<'_>,
) -> Result<Estimate> {
    if !f.bound.is_finite() {
        return Err(Error::Unsupported(format!(
            "function {} does not declare a finite bound",
            f.name
        )));
    }
    let a = mc_estimate(&occupation_functional(sample, f));
    let b = mc_estimate(&occupation_functional(reference, f));
    Ok(Estimate {
        value: (a.value - b.value).abs(),
        stderr: combined_stderr(a.stderr, b.stderr),
        replications: a.replications.min(b.replications),
    })
}

/// MC estimate of `E sup_t |X|^beta` over the sample's nodes.
pub fn sup_moment(sample: &PathSample<'_>, beta: f64) -> Result<Estimate> {
    if beta < 2.0 {
        return Err(Error::invalid("moment order must be at least 2"));
    }
    let d = sample.dim;
    let vals: Vec<f64> = sample
        .paths
        .iter()
        .map(|p| {
            let mut sup = 0.0f64;
            for k in 0..p.nodes() {
                let x = p.node(k);
                let mut q = 0.0;
                for c in 0..d {
                    q += x[c] * x[c];
                }
                sup = sup.max(q);
            }
            sup.sqrt().powf(beta)
        })
        .collect();
    Ok(mc_estimate(&vals))
}

/// `max_{s != t} E|X_s - X_t|^beta / |s - t|^{beta/2}` over node pairs.
pub fn holder_ratio(sample: &PathSample<'_>, beta: f64) -> Result<f64> {
    if beta < 2.0 {
        return Err(Error::invalid("moment order must be at least 2"));
    }
    let n = sample.grid.steps();
    if n < 1 {
        return Err(Error::invalid("need at least two nodes"));
    }
    let d = sample.dim;
    let r = sample.paths.len();
    let mut vals = vec![0.0; r];
    let mut best = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..=n {
            for (ri, p) in sample.paths.iter().enumerate() {
                let xi = p.node(i);
                let xj = p.node(j);
                let mut q = 0.0;
                for c in 0..d {
                    let diff = xi[c] - xj[c];
                    q += diff * diff;
                }
                vals[ri] = q.sqrt().powf(beta);
            }
            let mean = pairwise_sum(&vals) / r as f64;
            let gap = sample.grid.node(j) - sample.grid.node(i);
            best = best.max(mean / gap.powf(beta / 2.0));
        }
    }
    Ok(best)
}

/// Mean-field drift evaluator `(t, x) -> b_t(x, mu)` for the law the tracked
/// copies follow; closed form supplied by the caller.
pub type MeanFieldDrift<'a> = dyn Fn(f64, &[f64], &mut [f64]) + 'a;

/// One replication of the `j = 1` kernel-average deviation:
/// `|(1/N) sum_i (b_t(Xbar^1, mu) - bbar_t(Xbar^1, Xbar^i))|^2` at the node.
pub fn kernel_average_deviation_value<K: InteractionKernel + ?Sized>(
    rep: &IidEnsemble,
    kernel: &K,
    mean_field_drift: &MeanFieldDrift<'_>,
    node: usize,
) -> Result<f64> {
    let d = kernel.dim();
    if node >= rep.grid.steps() + 1 {
        return Err(Error::invalid("node index out of range"));
    }
    let t = rep.grid.node(node);
    let n_tracked = rep.n_tracked();
    let x1 = rep.tracked[0].node(node);
    let mut bfield = vec![0.0; d];
    mean_field_drift(t, x1, &mut bfield);
    // atoms at the node in tracked order
    let mut atoms = vec![0.0; n_tracked * d];
    for (i, traj) in rep.tracked.iter().enumerate() {
        atoms[i * d..(i + 1) * d].copy_from_slice(traj.node(node));
    }
    let view = AtomsView::new(d, &atoms);
    let mut bk = vec![0.0; d];
    let mut q = 0.0;
    for c in 0..d {
        let mean_diff = crate::numeric::pairwise_sum_by(n_tracked, |i| {
            kernel.drift(t, x1, view.atom(i), &mut bk);
            bfield[c] - bk[c]
        }) / n_tracked as f64;
        q += mean_diff * mean_diff;
    }
    Ok(q)
}

/// MC estimate over replications of the `j = 1` kernel-average deviation.
pub fn kernel_average_deviation<K: InteractionKernel + ?Sized>(
    reps: &[IidEnsemble],
    kernel: &K,
    mean_field_drift: &MeanFieldDrift<'_>,
    node: usize,
) -> Result<Estimate> {
    if reps.is_empty() {
        return Err(Error::invalid("need at least one replication"));
    }
    let devs = reps
        .iter()
        .map(|rep| kernel_average_deviation_value(rep, kernel, mean_field_drift, node))
        .collect::<Result<Vec<_>>>()?;
    Ok(mc_estimate(&devs))
}

/// Least-squares power-law fit through `(log x, log y)`.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// the fitted `(log x, log y)` points
    pub points: Vec<(f64, f64)>,
}

/// Fit `log y = slope * log x + intercept`; all inputs must be positive and
/// at least three points are required.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::invalid("need at least three points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::invalid("rate fits need positive values"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let sx = pairwise_sum(&logs.iter().map(|p| p.0).collect::<Vec<_>>());
    let sy = pairwise_sum(&logs.iter().map(|p| p.1).collect::<Vec<_>>());
    let xbar = sx / n;
    let ybar = sy / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all x values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - ybar) * (p.1 - ybar)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit { slope, intercept, r_squared, points: logs })
}

/// OLS slope of `y` against `x` with standard error propagated from
/// per-point standard errors: `slope = sum a_i y_i`, `se^2 = sum a_i^2 se_i^2`.
pub fn trend_slope(points: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::invalid("need at least two points"));
    }
    let n = points.len() as f64;
    let xbar: f64 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all x values coincide"));
    }
    let mut slope = 0.0;
    let mut var = 0.0;
    for &(x, y, se) in points {
        let a = (x - xbar) / sxx;
        slope += a * y;
        var += a * a * se * se;
    }
    Ok((slope, var.sqrt()))
}
