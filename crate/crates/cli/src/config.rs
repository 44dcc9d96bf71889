//! Flat `key = value` experiment configuration.
//!
//! The format is line oriented: one `key = value` per line, `#` starts a
//! comment, list values are comma separated. Unknown keys are reported with
//! their line number. Every run requires an explicit seed; nothing is ever
//! derived from the clock.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}`: {detail}")]
    BadValue { line: usize, key: String, detail: String },
    #[error("line {line}: expected `key = value`")]
    BadLine { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Simulate,
    Converge,
    Krylov,
    Chaos,
    Meanfield,
    Report,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Converge => "converge",
            Kind::Krylov => "krylov",
            Kind::Chaos => "chaos",
            Kind::Meanfield => "meanfield",
            Kind::Report => "report",
        }
    }
}

/// Which reference a convergence sweep compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// variance-exact OU path on the finest grid (constant-coefficient oracle)
    ExactOu,
    /// Euler on a `ref_refine`-times finer grid per sweep point
    EulerFine,
}

/// Initial law specification.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Dirac(f64),
    Uniform(f64, f64),
    Gauss(f64, f64),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub model: Option<String>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub json_out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub dim: usize,
    pub horizon: f64,
    pub n: Option<usize>,
    pub n_sweep: Vec<usize>,
    pub replications: Option<usize>,
    pub particles_sweep: Vec<usize>,
    pub pool: usize,
    pub beta: f64,
    pub p: Option<f64>,
    pub r_sweep: Vec<f64>,
    pub ref_refine: usize,
    pub reference: Option<Reference>,
    pub weak_f: bool,
    pub x0: f64,
    pub theta: f64,
    pub sigma0: f64,
    pub a: f64,
    pub b0: f64,
    pub init: InitSpec,
    pub input: Option<PathBuf>,
}

pub const CLASSICAL_MODELS: &[&str] = &["ou", "constant", "sign", "sign_disc"];
pub const KERNEL_MODELS: &[&str] = &["mean_kernel", "sign_kernel"];
pub const RULE_MODELS: &[&str] = &["brownian_rule", "bounded_state", "constant_rule"];

const KNOWN_KEYS: &[&str] = &[
    "kind", "model", "seed", "out", "json_out", "threads", "dim", "T", "n", "n_sweep",
    "replications", "particles_sweep", "pool", "beta", "p", "r_sweep", "ref_refine",
    "reference", "weak_f", "x0", "theta", "sigma0", "a", "b0", "init", "input",
];

fn bad(line: usize, key: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { line, key: key.into(), detail: detail.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| bad(line, key, format!("malformed number `{v}`: {e}")))
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>, _> = v.split(',').map(|s| parse_num::<T>(line, key, s)).collect();
    let items = items?;
    if items.is_empty() {
        return Err(bad(line, key, "empty list"));
    }
    Ok(items)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::BadLine { line });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { line, key });
        }
        if entries.insert(key.clone(), (line, value)).is_some() {
            return Err(ConfigError::DuplicateKey { line, key });
        }
    }

    let get = |key: &str| entries.get(key);

    let (kind_line, kind_str) =
        get("kind").cloned().ok_or(ConfigError::MissingKey("kind"))?;
    let kind = match kind_str.as_str() {
        "simulate" => Kind::Simulate,
        "converge" => Kind::Converge,
        "krylov" => Kind::Krylov,
        "chaos" => Kind::Chaos,
        "meanfield" => Kind::Meanfield,
        "report" => Kind::Report,
        other => return Err(bad(kind_line, "kind", format!("unknown experiment kind `{other}`"))),
    };

    let mut cfg = ExperimentConfig {
        kind,
        model: None,
        seed: 0,
        out: None,
        json_out: None,
        threads: None,
        dim: 1,
        horizon: 1.0,
        n: None,
        n_sweep: Vec::new(),
        replications: None,
        particles_sweep: Vec::new(),
        pool: 4096,
        beta: 4.0,
        p: None,
        r_sweep: Vec::new(),
        ref_refine: 16,
        reference: None,
        weak_f: false,
        x0: 1.0,
        theta: 1.0,
        sigma0: 1.0,
        a: 1.0,
        b0: 0.0,
        init: InitSpec::Dirac(1.0),
        input: None,
    };

    for (key, (line, value)) in &entries {
        let line = *line;
        match key.as_str() {
            "kind" => {}
            "model" => cfg.model = Some(value.clone()),
            "seed" => cfg.seed = parse_num(line, key, value)?,
            "out" => cfg.out = Some(PathBuf::from(value)),
            "json_out" => cfg.json_out = Some(PathBuf::from(value)),
            "input" => cfg.input = Some(PathBuf::from(value)),
            "threads" => cfg.threads = Some(parse_num(line, key, value)?),
            "dim" => cfg.dim = parse_num(line, key, value)?,
            "T" => cfg.horizon = parse_num(line, key, value)?,
            "n" => cfg.n = Some(parse_num(line, key, value)?),
            "n_sweep" => cfg.n_sweep = parse_list(line, key, value)?,
            "replications" => cfg.replications = Some(parse_num(line, key, value)?),
            "particles_sweep" => cfg.particles_sweep = parse_list(line, key, value)?,
            "pool" => cfg.pool = parse_num(line, key, value)?,
            "beta" => cfg.beta = parse_num(line, key, value)?,
            "p" => cfg.p = Some(parse_num(line, key, value)?),
            "r_sweep" => cfg.r_sweep = parse_list(line, key, value)?,
            "ref_refine" => cfg.ref_refine = parse_num(line, key, value)?,
            "reference" => {
                cfg.reference = Some(match value.as_str() {
                    "exact_ou" => Reference::ExactOu,
                    "euler_fine" => Reference::EulerFine,
                    other => {
                        return Err(bad(line, key, format!("unknown reference `{other}`")))
                    }
                })
            }
            "weak_f" => {
                cfg.weak_f = match value.as_str() {
                    "halfline" => true,
                    "none" => false,
                    other => return Err(bad(line, key, format!("unknown weak_f `{other}`"))),
                }
            }
            "x0" => cfg.x0 = parse_num(line, key, value)?,
            "theta" => cfg.theta = parse_num(line, key, value)?,
            "sigma0" => cfg.sigma0 = parse_num(line, key, value)?,
            "a" => cfg.a = parse_num(line, key, value)?,
            "b0" => cfg.b0 = parse_num(line, key, value)?,
            "init" => {
                let (name, args) = value.split_once(':').unwrap_or((value.as_str(), ""));
                let nums: Vec<f64> = if args.is_empty() {
                    Vec::new()
                } else {
                    parse_list(line, key, args)?
                };
                cfg.init = match (name, nums.as_slice()) {
                    ("dirac", [x]) => InitSpec::Dirac(*x),
                    ("uniform", [lo, hi]) => InitSpec::Uniform(*lo, *hi),
                    ("gauss", [m, s]) => InitSpec::Gauss(*m, *s),
                    _ => {
                        return Err(bad(
                            line,
                            key,
                            format!("expected dirac:x | uniform:lo,hi | gauss:mean,std, got `{value}`"),
                        ))
                    }
                };
            }
            _ => unreachable!("key validated above"),
        }
    }

    validate(&cfg, &entries)?;
    Ok(cfg)
}

fn require(entries: &BTreeMap<String, (usize, String)>, key: &'static str) -> Result<(), ConfigError> {
    if entries.contains_key(key) {
        Ok(())
    } else {
        Err(ConfigError::MissingKey(key))
    }
}

fn validate(
    cfg: &ExperimentConfig,
    entries: &BTreeMap<String, (usize, String)>,
) -> Result<(), ConfigError> {
    if cfg.kind != Kind::Report {
        require(entries, "seed")?;
        require(entries, "out")?;
    }
    let model_line = entries.get("model").map(|(l, _)| *l).unwrap_or(0);
    let check_model = |allowed: &[&str]| -> Result<(), ConfigError> {
        let m = cfg.model.as_deref().ok_or(ConfigError::MissingKey("model"))?;
        if !allowed.contains(&m) {
            return Err(bad(
                model_line,
                "model",
                format!("unknown model `{m}` for kind {}; expected one of {allowed:?}", cfg.kind.as_str()),
            ));
        }
        Ok(())
    };
    match cfg.kind {
        Kind::Simulate => {
            check_model(CLASSICAL_MODELS)?;
            require(entries, "n")?;
            require(entries, "replications")?;
        }
        Kind::Converge => {
            check_model(CLASSICAL_MODELS)?;
            require(entries, "n_sweep")?;
            require(entries, "replications")?;
        }
        Kind::Krylov => {
            check_model(RULE_MODELS)?;
            require(entries, "n_sweep")?;
            require(entries, "r_sweep")?;
            require(entries, "p")?;
            require(entries, "replications")?;
        }
        Kind::Chaos => {
            check_model(KERNEL_MODELS)?;
            require(entries, "n")?;
            require(entries, "particles_sweep")?;
            require(entries, "replications")?;
        }
        Kind::Meanfield => {
            check_model(KERNEL_MODELS)?;
            require(entries, "n")?;
            if !cfg.particles_sweep.is_empty() {
                require(entries, "replications")?;
            }
        }
        Kind::Report => {
            require(entries, "input")?;
        }
    }
    if cfg.dim == 0 {
        return Err(ConfigError::Invalid("dim must be at least 1".into()));
    }
    if !(cfg.horizon > 0.0) {
        return Err(ConfigError::Invalid("T must be positive".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_simulate_config() {
        let cfg = parse_config(
            "kind = simulate\nmodel = ou\nT = 1.0\nn = 64\nreplications = 100\nseed = 7\nout = rows.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, Kind::Simulate);
        assert_eq!(cfg.model.as_deref(), Some("ou"));
        assert_eq!(cfg.n, Some(64));
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn sweep_list() {
        let cfg = parse_config(
            "kind = converge\nmodel = ou\nn_sweep = 16,32,64\nreplications = 10\nseed = 1\nout = o.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.n_sweep, vec![16, 32, 64]);
    }

    #[test]
    fn unknown_kind_names_offender() {
        let err = parse_config("kind = frobnicate\nseed = 1\nout = o.csv\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("frobnicate") && msg.contains("kind"), "{msg}");
    }

    #[test]
    fn unknown_key_with_line_number() {
        let err = parse_config("kind = simulate\nwibble = 3\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "wibble");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn missing_seed_rejected() {
        let err =
            parse_config("kind = simulate\nmodel = ou\nn = 4\nreplications = 2\nout = o.csv\n")
                .unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn unknown_model_rejected() {
        let err = parse_config(
            "kind = simulate\nmodel = pony\nn = 4\nreplications = 2\nseed = 1\nout = o.csv\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("pony"));
    }

    #[test]
    fn malformed_number_has_line() {
        let err = parse_config("kind = simulate\nmodel = ou\nn = four\nreplications = 2\nseed = 1\nout = o.csv\n")
            .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn comments_and_inits() {
        let cfg = parse_config(
            "# a comment\nkind = meanfield  # trailing\nmodel = mean_kernel\nn = 32\npool = 128\ninit = uniform:0,2\nseed = 5\nout = o.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.init, InitSpec::Uniform(0.0, 2.0));
        assert_eq!(cfg.pool, 128);
    }
}
