//! Run configuration: an optional TOML file, overridden field by field by
//! command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use expbench_core::problems::{self, OdeProblem, MODEL_NAMES};
use expbench_core::{NewtonConfig, Scheme, SchemeOptions, SignMode};
use serde::{Deserialize, Serialize};

/// Invalid names or values supplied by the user. Reported with exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    /// Scheme names, or `["all"]`.
    pub schemes: Vec<String>,
    /// Grid sizes; empty means the model's default size.
    pub n: Vec<usize>,
    pub out: PathBuf,
    /// Reference cache directory; defaults to `<out>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub substeps: usize,
    pub newton: NewtonConfig,
    pub sign_mode: SignMode,
    pub rtol: f64,
    pub atol: f64,
    /// Worker threads; 0 picks the number of cores.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            schemes: vec!["all".into()],
            n: Vec::new(),
            out: PathBuf::from("out"),
            cache_dir: None,
            substeps: problems::DEFAULT_REFERENCE_SUBSTEPS,
            newton: NewtonConfig::default(),
            sign_mode: SignMode::selected(),
            rtol: 1e-3,
            atol: 1e-6,
            jobs: 0,
        }
    }
}

/// Values given on the command line; `None` keeps the file or default value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<String>,
    pub schemes: Vec<String>,
    pub n: Vec<usize>,
    pub out: Option<PathBuf>,
    pub substeps: Option<usize>,
    pub sign_mode: Option<String>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub jobs: Option<usize>,
}

/// Grid size used when none is given: the smallest size studied per model.
pub fn default_n(model: &str) -> usize {
    match model {
        "vanderpol" => 1555,
        "hires" => 56,
        "robertson" => 1314,
        _ => 101,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    /// File (if any) plus flags, validated.
    pub fn resolve(file: Option<&Path>, flags: Overrides) -> anyhow::Result<RunConfig> {
        let mut cfg = match file {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if flags.model.is_some() {
            cfg.model = flags.model;
        }
        if !flags.schemes.is_empty() {
            cfg.schemes = flags.schemes;
        }
        if !flags.n.is_empty() {
            cfg.n = flags.n;
        }
        if let Some(out) = flags.out {
            cfg.out = out;
        }
        if let Some(m) = flags.substeps {
            cfg.substeps = m;
        }
        if let Some(mode) = flags.sign_mode {
            cfg.sign_mode = mode.parse().map_err(|_| {
                let valid: Vec<&str> = SignMode::ALL.iter().map(|m| m.name()).collect();
                usage(format!("unknown sign mode `{mode}`; valid: {}", valid.join(", ")))
            })?;
        }
        if let Some(r) = flags.rtol {
            cfg.rtol = r;
        }
        if let Some(a) = flags.atol {
            cfg.atol = a;
        }
        if let Some(j) = flags.jobs {
            cfg.jobs = j;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.schemes()?;
        if let Some(m) = &self.model {
            self.problem_named(m)?;
        }
        if let Some(&n) = self.n.iter().find(|&&n| n < 2) {
            return Err(usage(format!("grid size must be at least 2, got {n}")));
        }
        if self.substeps < 2 {
            return Err(usage(format!("reference needs at least 2 substeps, got {}", self.substeps)));
        }
        self.newton.validate().map_err(usage)?;
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(usage("rtol and atol must be positive"));
        }
        Ok(())
    }

    pub fn schemes(&self) -> anyhow::Result<Vec<Scheme>> {
        if self.schemes.iter().any(|s| s == "all") {
            return Ok(Scheme::ALL.to_vec());
        }
        if self.schemes.is_empty() {
            return Err(usage("no schemes selected"));
        }
        self.schemes
            .iter()
            .map(|name| {
                Scheme::from_name(name).ok_or_else(|| {
                    usage(format!("unknown scheme `{name}`; valid: all, {}", Scheme::names().join(", ")))
                })
            })
            .collect()
    }

    fn problem_named(&self, name: &str) -> anyhow::Result<OdeProblem> {
        problems::by_name(name).ok_or_else(|| usage(format!("unknown model `{name}`; valid: {}", MODEL_NAMES.join(", "))))
    }

    /// The selected model, or `fallback` when none was given.
    pub fn problem_or(&self, fallback: Option<&str>) -> anyhow::Result<OdeProblem> {
        match (self.model.as_deref(), fallback) {
            (Some(m), _) | (None, Some(m)) => self.problem_named(m),
            (None, None) => Err(usage(format!("--model is required; valid: {}", MODEL_NAMES.join(", ")))),
        }
    }

    pub fn grid_sizes(&self, model: &str) -> Vec<usize> {
        if self.n.is_empty() {
            vec![default_n(model)]
        } else {
            self.n.clone()
        }
    }

    pub fn scheme_options(&self) -> SchemeOptions {
        SchemeOptions {
            newton: self.newton,
            sign_mode: self.sign_mode,
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out.join("cache"))
    }
}
