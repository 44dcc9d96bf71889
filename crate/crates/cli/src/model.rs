//! Catalog dispatch: config model names to concrete coefficient types.

use mfsde::coeffs::catalog::{
    ConstantDiffusion, ConstantDrift, IdentityDiffusion, MeanKernel, OuDrift, SignDiscDiffusion,
    SignDrift, SignKernel,
};
use mfsde::coeffs::{CoefficientBounds, DiffusionField, DriftField, InteractionKernel};
use mfsde::ito::{AdaptedRule, AuxStream, BoundedStateRule, BrownianRule, ConstantRule};
use mfsde::measure::AtomsView;
use mfsde::particles::InitialLaw;

use crate::config::{ConfigError, ExperimentConfig, InitSpec};

pub enum DriftChoice {
    Constant(ConstantDrift),
    Ou(OuDrift),
    Sign(SignDrift),
}

impl DriftField for DriftChoice {
    fn dim(&self) -> usize {
        match self {
            DriftChoice::Constant(f) => f.dim(),
            DriftChoice::Ou(f) => f.dim(),
            DriftChoice::Sign(f) => f.dim(),
        }
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            DriftChoice::Constant(f) => f.eval(t, x, out),
            DriftChoice::Ou(f) => f.eval(t, x, out),
            DriftChoice::Sign(f) => f.eval(t, x, out),
        }
    }
}

pub enum DiffusionChoice {
    Constant(ConstantDiffusion),
    Identity(IdentityDiffusion),
    SignDisc(SignDiscDiffusion),
}

impl DiffusionField for DiffusionChoice {
    fn dim(&self) -> usize {
        match self {
            DiffusionChoice::Constant(f) => f.dim(),
            DiffusionChoice::Identity(f) => f.dim(),
            DiffusionChoice::SignDisc(f) => f.dim(),
        }
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            DiffusionChoice::Constant(f) => f.eval(t, x, out),
            DiffusionChoice::Identity(f) => f.eval(t, x, out),
            DiffusionChoice::SignDisc(f) => f.eval(t, x, out),
        }
    }
}

pub enum KernelChoice {
    Mean(MeanKernel),
    Sign(SignKernel),
}

impl InteractionKernel for KernelChoice {
    fn dim(&self) -> usize {
        match self {
            KernelChoice::Mean(k) => k.dim(),
            KernelChoice::Sign(k) => k.dim(),
        }
    }
    fn bounds(&self) -> &CoefficientBounds {
        match self {
            KernelChoice::Mean(k) => k.bounds(),
            KernelChoice::Sign(k) => k.bounds(),
        }
    }
    fn drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            KernelChoice::Mean(k) => k.drift(t, x, y, out),
            KernelChoice::Sign(k) => k.drift(t, x, y, out),
        }
    }
    fn diffusion(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            KernelChoice::Mean(k) => k.diffusion(t, x, y, out),
            KernelChoice::Sign(k) => k.diffusion(t, x, y, out),
        }
    }
    fn drift_ignores_x(&self) -> bool {
        match self {
            KernelChoice::Mean(k) => k.drift_ignores_x(),
            KernelChoice::Sign(k) => k.drift_ignores_x(),
        }
    }
    fn diffusion_ignores_x(&self) -> bool {
        match self {
            KernelChoice::Mean(k) => k.diffusion_ignores_x(),
            KernelChoice::Sign(k) => k.diffusion_ignores_x(),
        }
    }
}

pub enum RuleChoice {
    Brownian(BrownianRule),
    BoundedState(BoundedStateRule),
    Constant(ConstantRule),
}

impl AdaptedRule for RuleChoice {
    fn dim(&self) -> usize {
        match self {
            RuleChoice::Brownian(r) => r.dim(),
            RuleChoice::BoundedState(r) => r.dim(),
            RuleChoice::Constant(r) => r.dim(),
        }
    }
    fn bounds(&self) -> &CoefficientBounds {
        match self {
            RuleChoice::Brownian(r) => r.bounds(),
            RuleChoice::BoundedState(r) => r.bounds(),
            RuleChoice::Constant(r) => r.bounds(),
        }
    }
    fn coefficients(
        &self,
        step: usize,
        history: AtomsView<'_>,
        aux: &mut AuxStream,
        b_out: &mut [f64],
        sigma_out: &mut [f64],
    ) {
        match self {
            RuleChoice::Brownian(r) => r.coefficients(step, history, aux, b_out, sigma_out),
            RuleChoice::BoundedState(r) => r.coefficients(step, history, aux, b_out, sigma_out),
            RuleChoice::Constant(r) => r.coefficients(step, history, aux, b_out, sigma_out),
        }
    }
}

/// Classical model `(b, sigma)` from config; also reports whether the exact
/// OU oracle applies (constant isotropic diffusion).
pub fn classical_model(cfg: &ExperimentConfig) -> Result<(DriftChoice, DiffusionChoice), ConfigError> {
    let d = cfg.dim;
    let name = cfg.model.as_deref().unwrap_or_default();
    match name {
        "ou" => Ok((
            DriftChoice::Ou(OuDrift::new(d, cfg.theta)),
            DiffusionChoice::Constant(ConstantDiffusion::isotropic(d, cfg.sigma0)),
        )),
        "constant" => Ok((
            DriftChoice::Constant(ConstantDrift::new(vec![cfg.b0; d])),
            DiffusionChoice::Constant(ConstantDiffusion::isotropic(d, cfg.sigma0)),
        )),
        "sign" => {
            expect_dim_one(d, name)?;
            Ok((
                DriftChoice::Sign(SignDrift::new(cfg.a)),
                DiffusionChoice::Identity(IdentityDiffusion::new(1)),
            ))
        }
        "sign_disc" => {
            expect_dim_one(d, name)?;
            Ok((
                DriftChoice::Sign(SignDrift::new(cfg.a)),
                DiffusionChoice::SignDisc(SignDiscDiffusion::new()),
            ))
        }
        other => Err(ConfigError::Invalid(format!("unknown classical model `{other}`"))),
    }
}

pub fn kernel_model(cfg: &ExperimentConfig) -> Result<KernelChoice, ConfigError> {
    match cfg.model.as_deref().unwrap_or_default() {
        "mean_kernel" => Ok(KernelChoice::Mean(MeanKernel::new(cfg.dim))),
        "sign_kernel" => {
            expect_dim_one(cfg.dim, "sign_kernel")?;
            Ok(KernelChoice::Sign(SignKernel::new()))
        }
        other => Err(ConfigError::Invalid(format!("unknown kernel model `{other}`"))),
    }
}

pub fn rule_model(cfg: &ExperimentConfig) -> Result<RuleChoice, ConfigError> {
    match cfg.model.as_deref().unwrap_or_default() {
        "brownian_rule" => Ok(RuleChoice::Brownian(BrownianRule::new(cfg.dim))),
        "bounded_state" => Ok(RuleChoice::BoundedState(BoundedStateRule::new(cfg.dim))),
        "constant_rule" => {
            let d = cfg.dim;
            let mut sigma0 = vec![0.0; d * d];
            for i in 0..d {
                sigma0[i * d + i] = cfg.sigma0;
            }
            ConstantRule::new(vec![cfg.b0; d], sigma0)
                .map(RuleChoice::Constant)
                .map_err(|e| ConfigError::Invalid(e.to_string()))
        }
        other => Err(ConfigError::Invalid(format!("unknown adapted rule `{other}`"))),
    }
}

pub fn initial_law(cfg: &ExperimentConfig) -> Result<InitialLaw, ConfigError> {
    let d = cfg.dim;
    match cfg.init {
        InitSpec::Dirac(x) => Ok(InitialLaw::dirac(vec![x; d])),
        InitSpec::Uniform(lo, hi) => {
            InitialLaw::uniform_box(d, lo, hi).map_err(|e| ConfigError::Invalid(e.to_string()))
        }
        InitSpec::Gauss(m, s) => {
            InitialLaw::gaussian(d, m, s).map_err(|e| ConfigError::Invalid(e.to_string()))
        }
    }
}

fn expect_dim_one(d: usize, model: &str) -> Result<(), ConfigError> {
    if d != 1 {
        return Err(ConfigError::Invalid(format!("model `{model}` is one dimensional")));
    }
    Ok(())
}
