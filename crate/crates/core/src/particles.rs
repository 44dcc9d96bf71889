//! Interacting particle systems and synchronized mean-field (McKean-Vlasov)
//! Euler copies.
//!
//! The coupled system advances every particle with the empirical measure of
//! all particles frozen at the current node (simultaneous Jacobi update).
//! The i.i.d. mean-field copies advance against a self-consistent pool that
//! approximates the law of the Euler solution; tracked copy `j` consumes the
//! same initial draw and the same Brownian stream as particle `j` of the
//! paired interacting system, which is what makes pathwise chaos errors
//! meaningful.
//!
//! Atom averages are taken in canonical (sorted) atom order with pairwise
//! summation. Sorting makes the average a function of the atom multiset
//! alone, so relabeling particles permutes trajectories with no numerical
//! change, and fixed reduction order keeps results independent of thread
//! count.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::brownian::BrownianPath;
use crate::coeffs::InteractionKernel;
use crate::error::{Error, Result};
use crate::euler::Trajectory;
use crate::grid::TimeGrid;
use crate::measure::{kernel_diffusion_average, kernel_drift_average, AtomsView, KernelWorkspace};
use crate::numeric::{all_finite, matvec};
use crate::stream::StreamKey;

/// Initial distribution: a keyed sampler plus a descriptor recording whether
/// the law has a locally `L^q` density (an assumption some experiments need;
/// it is recorded, not verified).
#[derive(Clone)]
pub struct InitialLaw {
    dim: usize,
    descriptor: LawDescriptor,
    sampler: Arc<dyn Fn(&StreamKey) -> Vec<f64> + Send + Sync>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LawDescriptor {
    Dirac { point: Vec<f64> },
    UniformBox { lo: f64, hi: f64 },
    Gaussian { mean: f64, std: f64 },
    Custom { name: String, has_lq_density: bool },
}

impl InitialLaw {
    pub fn dirac(point: Vec<f64>) -> Self {
        let dim = point.len();
        let p = point.clone();
        InitialLaw {
            dim,
            descriptor: LawDescriptor::Dirac { point },
            sampler: Arc::new(move |_| p.clone()),
        }
    }

    /// Product of uniform laws on `[lo, hi]` per coordinate.
    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::invalid("uniform box needs hi > lo"));
        }
        Ok(InitialLaw {
            dim,
            descriptor: LawDescriptor::UniformBox { lo, hi },
            sampler: Arc::new(move |key| {
                let mut rng = key.rng();
                (0..dim).map(|_| rng.gen_range(lo..hi)).collect()
            }),
        })
    }

    /// Isotropic Gaussian.
    pub fn gaussian(dim: usize, mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(Error::invalid("gaussian std must be positive"));
        }
        Ok(InitialLaw {
            dim,
            descriptor: LawDescriptor::Gaussian { mean, std },
            sampler: Arc::new(move |key| {
                let mut rng = key.rng();
                (0..dim)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        mean + std * z
                    })
                    .collect()
            }),
        })
    }

    pub fn custom(
        dim: usize,
        name: impl Into<String>,
        has_lq_density: bool,
        sampler: Arc<dyn Fn(&StreamKey) -> Vec<f64> + Send + Sync>,
    ) -> Self {
        InitialLaw {
            dim,
            descriptor: LawDescriptor::Custom { name: name.into(), has_lq_density },
            sampler,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn descriptor(&self) -> &LawDescriptor {
        &self.descriptor
    }

    pub fn has_lq_density(&self) -> bool {
        match &self.descriptor {
            LawDescriptor::Dirac { .. } => false,
            LawDescriptor::UniformBox { .. } | LawDescriptor::Gaussian { .. } => true,
            LawDescriptor::Custom { has_lq_density, .. } => *has_lq_density,
        }
    }

    pub fn sample(&self, key: &StreamKey) -> Vec<f64> {
        (self.sampler)(key)
    }
}

/// Interacting particle ensemble (the coupled system).
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub grid: TimeGrid,
    pub dim: usize,
    pub trajectories: Vec<Trajectory>,
    pub initials: Vec<f64>,
    /// fingerprint of the master key; equality certifies synchronized coupling
    pub coupling: u64,
}

impl ParticleEnsemble {
    pub fn n_particles(&self) -> usize {
        self.trajectories.len()
    }
}

/// Self-consistent pool approximating the law of the mean-field Euler
/// solution: `m` copies evolved against their own empirical measure.
#[derive(Debug, Clone)]
pub struct LawPool {
    pub grid: TimeGrid,
    pub dim: usize,
    pub trajectories: Vec<Trajectory>,
    /// atoms at each node in canonical sorted order, one flat array per node
    sorted_nodes: Vec<Vec<f64>>,
    pub coupling: u64,
}

impl LawPool {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Pool atoms at node `k`, sorted canonically.
    pub fn atoms_at(&self, k: usize) -> AtomsView<'_> {
        AtomsView::new(self.dim, &self.sorted_nodes[k])
    }

    /// Pool mean at node `k` (pairwise over the canonical order).
    pub fn node_mean(&self, k: usize) -> Vec<f64> {
        let atoms = self.atoms_at(k);
        let m = atoms.len();
        (0..self.dim)
            .map(|c| pairwise_sum_strided(&self.sorted_nodes[k], self.dim, c) / m as f64)
            .collect()
    }
}

fn pairwise_sum_strided(data: &[f64], dim: usize, comp: usize) -> f64 {
    crate::numeric::pairwise_sum_by(data.len() / dim, |i| data[i * dim + comp])
}

/// Mean-field Euler copies: `tracked[j]` is driven by the same key and the
/// same initial draw as particle `j` of the paired [`ParticleEnsemble`], and
/// evolves against the frozen pool measure.
#[derive(Debug, Clone)]
pub struct IidEnsemble {
    pub grid: TimeGrid,
    pub dim: usize,
    pub tracked: Vec<Trajectory>,
    pub pool: Arc<LawPool>,
    pub coupling: u64,
}

impl IidEnsemble {
    pub fn n_tracked(&self) -> usize {
        self.tracked.len()
    }
}

fn canonical_sort(dim: usize, state: &[f64], idx: &mut Vec<usize>, out: &mut Vec<f64>) {
    let n = state.len() / dim;
    idx.clear();
    idx.extend(0..n);
    idx.sort_by(|&a, &b| {
        let xa = &state[a * dim..(a + 1) * dim];
        let xb = &state[b * dim..(b + 1) * dim];
        for c in 0..dim {
            match xa[c].total_cmp(&xb[c]) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
    out.clear();
    for &i in idx.iter() {
        out.extend_from_slice(&state[i * dim..(i + 1) * dim]);
    }
}

struct StepShared {
    drift: Option<Vec<f64>>,
    diffusion: Option<Vec<f64>>,
}

fn hoisted_for_step<K: InteractionKernel + ?Sized>(
    kernel: &K,
    t: f64,
    atoms: AtomsView<'_>,
    ws: &mut KernelWorkspace,
) -> StepShared {
    let d = kernel.dim();
    let zero = vec![0.0; d];
    let drift = if kernel.drift_ignores_x() {
        let mut out = vec![0.0; d];
        kernel_drift_average(kernel, t, &zero, atoms, None, ws, &mut out);
        Some(out)
    } else {
        None
    };
    let diffusion = if kernel.diffusion_ignores_x() {
        let mut out = vec![0.0; d * d];
        kernel_diffusion_average(kernel, t, &zero, atoms, None, ws, &mut out);
        Some(out)
    } else {
        None
    };
    StepShared { drift, diffusion }
}

#[allow(clippy::too_many_arguments)]
fn advance_one(
    kernel: &(impl InteractionKernel + ?Sized),
    t: f64,
    h: f64,
    x: &[f64],
    atoms: AtomsView<'_>,
    shared: &StepShared,
    dw: &[f64],
    ws: &mut KernelWorkspace,
    bvec: &mut [f64],
    smat: &mut [f64],
    out: &mut [f64],
) -> std::result::Result<(), String> {
    let d = x.len();
    match &shared.drift {
        Some(v) => bvec.copy_from_slice(v),
        None => kernel_drift_average(kernel, t, x, atoms, None, ws, bvec),
    }
    match &shared.diffusion {
        Some(v) => smat.copy_from_slice(v),
        None => kernel_diffusion_average(kernel, t, x, atoms, None, ws, smat),
    }
    if !all_finite(bvec) || !all_finite(smat) {
        return Err(format!("coefficients not finite at x = {x:?}"));
    }
    matvec(smat, dw, out);
    for c in 0..d {
        out[c] += x[c] + bvec[c] * h;
    }
    if !all_finite(out) {
        return Err("state not finite".into());
    }
    Ok(())
}

/// Advance the coupled system (every particle reads the frozen node-time
/// empirical measure of all particles). Building block behind
/// [`simulate_particle_system`]; exposed so couplings and relabelings can be
/// tested with explicit inputs.
pub fn evolve_interacting<K: InteractionKernel + ?Sized>(
    kernel: &K,
    grid: TimeGrid,
    initials: &[f64],
    noises: &[BrownianPath],
) -> Result<Vec<Trajectory>> {
    let d = kernel.dim();
    let n_particles = initials.len() / d;
    if n_particles == 0 || initials.len() % d != 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    if noises.len() != n_particles {
        return Err(Error::invalid("one Brownian path per particle required"));
    }
    for w in noises {
        if w.grid() != &grid || w.dim() != d {
            return Err(Error::invalid("noise grid/dimension mismatch"));
        }
    }
    let n = grid.steps();
    let h = grid.step();
    let mut trajectories: Vec<Trajectory> = (0..n_particles)
        .map(|j| Trajectory::new(d, &initials[j * d..(j + 1) * d], n + 1))
        .collect();
    let mut state = initials.to_vec();
    let mut next = vec![0.0; n_particles * d];
    let mut sorted = Vec::with_capacity(n_particles * d);
    let mut idx = Vec::with_capacity(n_particles);
    let mut ws = KernelWorkspace::default();
    let fully_hoisted = kernel.drift_ignores_x() && kernel.diffusion_ignores_x();
    for k in 0..n {
        let t = grid.node(k);
        canonical_sort(d, &state, &mut idx, &mut sorted);
        let atoms = AtomsView::new(d, &sorted);
        let shared = hoisted_for_step(kernel, t, atoms, &mut ws);
        let step_err = if fully_hoisted || n_particles < 32 {
            let mut bvec = vec![0.0; d];
            let mut smat = vec![0.0; d * d];
            let mut err = None;
            for j in 0..n_particles {
                if let Err(detail) = advance_one(
                    kernel,
                    t,
                    h,
                    &state[j * d..(j + 1) * d],
                    atoms,
                    &shared,
                    noises[j].increment(k),
                    &mut ws,
                    &mut bvec,
                    &mut smat,
                    &mut next[j * d..(j + 1) * d],
                ) {
                    err = Some((j, detail));
                    break;
                }
            }
            err
        } else {
            let state_ref = &state;
            let shared_ref = &shared;
            next.par_chunks_mut(d)
                .enumerate()
                .map_init(
                    || (KernelWorkspace::default(), vec![0.0; d], vec![0.0; d * d]),
                    |(ws, bvec, smat), (j, out)| {
                        advance_one(
                            kernel,
                            t,
                            h,
                            &state_ref[j * d..(j + 1) * d],
                            AtomsView::new(d, &sorted),
                            shared_ref,
                            noises[j].increment(k),
                            ws,
                            bvec,
                            smat,
                            out,
                        )
                        .map_err(|detail| (j, detail))
                    },
                )
                .find_map_first(|r| r.err())
        };
        if let Some((j, detail)) = step_err {
            return Err(Error::NumericFailure {
                step: k,
                t,
                detail: format!("particle {j}: {detail}"),
            });
        }
        state.copy_from_slice(&next);
        for j in 0..n_particles {
            trajectories[j].push(&state[j * d..(j + 1) * d]);
        }
    }
    Ok(trajectories)
}

fn draw_initials(law: &InitialLaw, n: usize, master: &StreamKey, tag: &'static str) -> Vec<f64> {
    let d = law.dim();
    let mut initials = vec![0.0; n * d];
    for j in 0..n {
        let xi = law.sample(&master.child(tag, j as u64));
        initials[j * d..(j + 1) * d].copy_from_slice(&xi);
    }
    initials
}

fn draw_noises(
    grid: TimeGrid,
    dim: usize,
    n: usize,
    master: &StreamKey,
    tag: &'static str,
) -> Result<Vec<BrownianPath>> {
    (0..n)
        .map(|j| BrownianPath::sample(grid, dim, &master.child(tag, j as u64)))
        .collect()
}

/// Simulate the interacting particle approximation with `n` particles.
///
/// Particle `j` draws its initial condition from `(master, "init", j)` and
/// its Brownian stream from `(master, "particle", j)`; a mean-field ensemble
/// built from the same master key is synchronized with this one.
pub fn simulate_particle_system<K: InteractionKernel + ?Sized>(
    kernel: &K,
    law: &InitialLaw,
    n: usize,
    grid: TimeGrid,
    master: &StreamKey,
) -> Result<ParticleEnsemble> {
    let d = kernel.dim();
    if law.dim() != d {
        return Err(Error::invalid("law dimension mismatch"));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    let initials = draw_initials(law, n, master, "init");
    let noises = draw_noises(grid, d, n, master, "particle")?;
    let trajectories = evolve_interacting(kernel, grid, &initials, &noises)?;
    Ok(ParticleEnsemble { grid, dim: d, trajectories, initials, coupling: master.fingerprint() })
}

/// Simulate the self-consistent law pool with custom key labels; the default
/// labels are `("pool_init", "pool")`, disjoint from the tracked drivers.
pub fn simulate_law_pool_labeled<K: InteractionKernel + ?Sized>(
    kernel: &K,
    law: &InitialLaw,
    m: usize,
    grid: TimeGrid,
    master: &StreamKey,
    init_tag: &'static str,
    noise_tag: &'static str,
) -> Result<LawPool> {
    let d = kernel.dim();
    if law.dim() != d {
        return Err(Error::invalid("law dimension mismatch"));
    }
    if m == 0 {
        return Err(Error::invalid("pool must not be empty"));
    }
    let initials = draw_initials(law, m, master, init_tag);
    let noises = draw_noises(grid, d, m, master, noise_tag)?;
    let trajectories = evolve_interacting(kernel, grid, &initials, &noises)?;
    let n = grid.steps();
    let mut idx = Vec::new();
    let mut sorted_nodes = Vec::with_capacity(n + 1);
    let mut node = vec![0.0; m * d];
    for k in 0..=n {
        for (j, traj) in trajectories.iter().enumerate() {
            node[j * d..(j + 1) * d].copy_from_slice(traj.node(k));
        }
        let mut sorted = Vec::with_capacity(m * d);
        canonical_sort(d, &node, &mut idx, &mut sorted);
        sorted_nodes.push(sorted);
    }
    Ok(LawPool { grid, dim: d, trajectories, sorted_nodes, coupling: master.fingerprint() })
}

/// Self-consistent pool of `m` independent copies approximating the law of
/// the mean-field Euler solution.
pub fn simulate_law_pool<K: InteractionKernel + ?Sized>(
    kernel: &K,
    law: &InitialLaw,
    m: usize,
    grid: TimeGrid,
    master: &StreamKey,
) -> Result<LawPool> {
    simulate_law_pool_labeled(kernel, law, m, grid, master, "pool_init", "pool")
}

/// Evolve `j_count` mean-field copies against an existing frozen pool.
/// Tracked copy `j` uses keys `(tracked_master, "init"/"particle", j)`,
/// identical to the paired particle system.
pub fn simulate_mckean_with_pool<K: InteractionKernel + ?Sized>(
    kernel: &K,
    law: &InitialLaw,
    j_count: usize,
    pool: &Arc<LawPool>,
    tracked_master: &StreamKey,
) -> Result<IidEnsemble> {
    let d = kernel.dim();
    if law.dim() != d || pool.dim != d {
        return Err(Error::invalid("dimension mismatch"));
    }
    if j_count == 0 || pool.len() < j_count {
        return Err(Error::invalid(format!(
            "need pool size >= tracked count >= 1, got M = {}, J = {j_count}",
            pool.len()
        )));
    }
    let grid = pool.grid;
    let n = grid.steps();
    let h = grid.step();
    let initials = draw_initials(law, j_count, tracked_master, "init");
    let noises = draw_noises(grid, d, j_count, tracked_master, "particle")?;
    // shared per-step coefficients for kernels that ignore x
    let mut ws = KernelWorkspace::default();
    let shared_steps: Vec<StepShared> = (0..n)
        .map(|k| hoisted_for_step(kernel, grid.node(k), pool.atoms_at(k), &mut ws))
        .collect();
    let tracked: Result<Vec<Trajectory>> = (0..j_count)
        .into_par_iter()
        .map_init(
            || (KernelWorkspace::default(), vec![0.0; d], vec![0.0; d * d], vec![0.0; d]),
            |(ws, bvec, smat, next), j| -> Result<Trajectory> {
                let mut traj = Trajectory::new(d, &initials[j * d..(j + 1) * d], n + 1);
                for k in 0..n {
                    let t = grid.node(k);
                    let x = traj.node(k).to_vec();
                    advance_one(
                        kernel,
                        t,
                        h,
                        &x,
                        pool.atoms_at(k),
                        &shared_steps[k],
                        noises[j].increment(k),
                        ws,
                        bvec,
                        smat,
                        next,
                    )
                    .map_err(|detail| Error::NumericFailure {
                        step: k,
                        t,
                        detail: format!("tracked copy {j}: {detail}"),
                    })?;
                    traj.push(next);
                }
                Ok(traj)
            },
        )
        .collect();
    Ok(IidEnsemble {
        grid,
        dim: d,
        tracked: tracked?,
        pool: pool.clone(),
        coupling: tracked_master.fingerprint(),
    })
}

/// Simulate the mean-field Euler ensemble: a self-consistent pool of `m`
/// copies, then `j_count` tracked copies driven by the particle-system keys.
pub fn simulate_mckean<K: InteractionKernel + ?Sized>(
    kernel: &K,
    law: &InitialLaw,
    j_count: usize,
    m: usize,
    grid: TimeGrid,
    master: &StreamKey,
) -> Result<IidEnsemble> {
    if m < j_count {
        return Err(Error::invalid(format!("pool size {m} must be at least tracked count {j_count}")));
    }
    let pool = Arc::new(simulate_law_pool(kernel, law, m, grid, master)?);
    simulate_mckean_with_pool(kernel, law, j_count, &pool, master)
}
