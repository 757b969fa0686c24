//! Run configuration: one JSON file per run, unknown keys rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use masym::expr::ExprSpec;
use masym::fd::FdParams;
use masym::geometry::Domain;
use masym::hypotheses::{Hypothesis, SampleBox};
use masym::moving_plane::{HessianMode, SweepOptions};
use masym::radial::RadialOptions;
use masym::rhs::{RhsSpec, RhsSystem};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveRadial,
    SolveGrid,
    Certify,
    Hypotheses,
    SweepTrichotomy,
    Linearize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveRadial => "solve-radial",
            Command::SolveGrid => "solve-grid",
            Command::Certify => "certify",
            Command::Hypotheses => "hypotheses",
            Command::SweepTrichotomy => "sweep-trichotomy",
            Command::Linearize => "linearize",
        }
    }
}

/// Radial problem: either a scalar source `g(r, u, u′)` in `x1, z1, p1` or
/// the power-coupled pair with exponents `[α, β]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialProblem {
    pub n: usize,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default)]
    pub boundary_value: f64,
    #[serde(default)]
    pub source: Option<ExprSpec>,
    #[serde(default)]
    pub power: Option<[f64; 2]>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

/// Where the certified field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionSource {
    /// Solve the configured system with the `fd` parameters.
    Solve,
    /// A CSV (or `.bin`) grid solution written by `solve-grid`.
    File { path: PathBuf },
    /// Closed-form fields in `x1, x2` sampled on the `fd` grid.
    Expr { fields: Vec<ExprSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesesSpec {
    pub sample_box: SampleBox,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub which: Option<Vec<Hypothesis>>,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrichotomySpec {
    #[serde(default = "two")]
    pub n: usize,
    #[serde(default = "one")]
    pub radius: f64,
    pub pairs: Vec<[f64; 2]>,
    /// Scaled starts of the uniqueness probe per pair; 0 skips it.
    #[serde(default)]
    pub uniqueness_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub system: Option<RhsSpec>,
    /// Dirichlet constants `cⁱ`; zeros when omitted.
    #[serde(default)]
    pub boundary_values: Option<Vec<f64>>,
    #[serde(default)]
    pub fd: FdParams,
    #[serde(default)]
    pub radial_options: RadialOptions,
    #[serde(default)]
    pub radial: Option<RadialProblem>,
    #[serde(default)]
    pub solution: Option<SolutionSource>,
    #[serde(default)]
    pub direction: Option<[f64; 2]>,
    #[serde(default)]
    pub sweep: SweepOptions,
    #[serde(default)]
    pub hessian_mode: HessianMode,
    /// Plane position for `linearize`; midway between `λ₀` and `Λ₀` when omitted.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub hypotheses: Option<HypothesesSpec>,
    #[serde(default)]
    pub trichotomy: Option<TrichotomySpec>,
}

/// Parsed config together with its source text for line-precise messages.
pub struct Loaded {
    pub config: RunConfig,
    pub text: String,
    pub path: PathBuf,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
        })?;
        Ok(Loaded {
            config,
            text,
            path: path.to_path_buf(),
        })
    }

    /// `path:line: msg` with the line of the first occurrence of `"key"`.
    pub fn err(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        let needle = format!("\"{key}\"");
        let line = self
            .text
            .lines()
            .position(|l| l.contains(&needle))
            .map_or(1, |l| l + 1);
        CliError::Config(format!("{}:{line}: {msg}", self.path.display()))
    }

    /// Paths in the config are relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        c.fd.validate().map_err(|e| self.err("fd", e))?;
        c.radial_options.validate().map_err(|e| self.err("radial_options", e))?;
        if c.sweep.n_lambdas == 0 || !positive(c.sweep.tolerance_factor) || !positive(c.sweep.inequality_factor) {
            return Err(self.err("sweep", "sweep needs n_lambdas ≥ 1 and positive factors"));
        }
        if let Some(d) = &c.domain {
            d.validate().map_err(|e| self.err("domain", e))?;
        }
        if let Some(dir) = c.direction {
            let n = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            if !n.is_finite() || (n - 1.0).abs() >= 1e-9 {
                return Err(self.err("direction", "direction must be a unit vector"));
            }
        }
        let need = |key: &str, present: bool| -> Result<(), CliError> {
            if present {
                Ok(())
            } else {
                Err(self.err(
                    "command",
                    format!("command {} requires the `{key}` field", c.command.name()),
                ))
            }
        };
        match c.command {
            Command::SolveRadial => {
                need("radial", c.radial.is_some())?;
                let r = c.radial.as_ref().unwrap();
                if r.n < 1 || !positive(r.radius) {
                    return Err(self.err("radial", "radial problem needs n ≥ 1 and a positive radius"));
                }
                match (&r.source, &r.power) {
                    (Some(_), None) => {}
                    (None, Some([a, b])) => {
                        if !positive(*a) || !positive(*b) {
                            return Err(self.err("power", "power exponents must be positive"));
                        }
                    }
                    _ => return Err(self.err("radial", "give exactly one of `source` and `power`")),
                }
            }
            Command::SolveGrid | Command::Certify | Command::Linearize => {
                need("domain", c.domain.is_some())?;
                if c.domain.as_ref().unwrap().dim() != 2 {
                    return Err(self.err("domain", "grid commands need a two-dimensional domain"));
                }
                let solve = matches!(c.solution, None | Some(SolutionSource::Solve));
                if c.command == Command::SolveGrid || c.command == Command::Linearize || solve {
                    need("system", c.system.is_some())?;
                }
                if let Some(SolutionSource::File { path }) = &c.solution {
                    if !self.resolve(path).is_file() {
                        return Err(self.err("path", format!("solution file {} does not exist", path.display())));
                    }
                }
                if let Some(SolutionSource::Expr { fields }) = &c.solution {
                    if fields.is_empty() {
                        return Err(self.err("fields", "give at least one field expression"));
                    }
                }
            }
            Command::Hypotheses => {
                need("system", c.system.is_some())?;
                need("hypotheses", c.hypotheses.is_some())?;
                if c.hypotheses.as_ref().unwrap().samples == 0 {
                    return Err(self.err("samples", "samples must be ≥ 1"));
                }
            }
            Command::SweepTrichotomy => {
                need("trichotomy", c.trichotomy.is_some())?;
                let t = c.trichotomy.as_ref().unwrap();
                if t.n < 1 || !positive(t.radius) || t.pairs.is_empty() {
                    return Err(self.err("trichotomy", "need n ≥ 1, a positive radius and at least one pair"));
                }
                if t.pairs.iter().flatten().any(|v| !positive(*v)) {
                    return Err(self.err("pairs", "exponents must be positive"));
                }
            }
        }
        if let Some(spec) = &c.system {
            let sys = RhsSystem::from_spec(spec.clone()).map_err(|e| self.err("system", e))?;
            if let Some(bv) = &c.boundary_values {
                if bv.len() != sys.m() {
                    return Err(self.err("boundary_values", format!("expected {} boundary values", sys.m())));
                }
            }
            if c.domain.as_ref().is_some_and(|d| d.dim() != sys.dim()) {
                return Err(self.err("dim", "system dimension does not match the domain"));
            }
        }
        Ok(())
    }
}
