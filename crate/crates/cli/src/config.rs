//! Experiment configuration: a TOML file with a fixed schema.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tvclt::{DistributionSpec, Family, GridConfig, SumSequence};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.into(), message: message.into() }
}

/// How the summand list of a sequence is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `n` copies of `base`.
    Repeat,
    /// `base` rescaled to `σ_k = 1 + (k mod 3)`, `k = 1, 2, ...`.
    AlternateScales,
    /// `summands` in order, cycled when `n` exceeds their number.
    Explicit,
}

/// Gaussian perturbation `X_k + δ_k N_k` applied before anything else.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Smoothing {
    #[default]
    None,
    Fixed { delta: f64 },
    /// `δ_k = σ_k`, so the smoothed summand has twice the variance.
    MatchingVariance,
    /// `0.25 min σ_k` when some summand is not smooth, else none.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub name: String,
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Family>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub summands: Vec<Family>,
    #[serde(default)]
    pub smoothing: Smoothing,
}

impl SequenceConfig {
    /// The first `n` summands after smoothing.
    pub fn build(&self, n: usize) -> tvclt::Result<SumSequence> {
        let raw: Vec<DistributionSpec> = match self.rule {
            Rule::Repeat => {
                let s = DistributionSpec::new(self.base.clone().expect("validated"))?;
                vec![s; n]
            }
            Rule::AlternateScales => {
                let s = DistributionSpec::new(self.base.clone().expect("validated"))?;
                let scales: Vec<DistributionSpec> =
                    (0..3).map(|r| s.with_sd(1.0 + r as f64)).collect::<tvclt::Result<_>>()?;
                (1..=n).map(|k| scales[k % 3].clone()).collect()
            }
            Rule::Explicit => {
                let specs: Vec<DistributionSpec> =
                    self.summands.iter().cloned().map(DistributionSpec::new).collect::<tvclt::Result<_>>()?;
                (0..n).map(|k| specs[k % specs.len()].clone()).collect()
            }
        };
        let smoothed = match self.smoothing {
            Smoothing::None => raw,
            Smoothing::Fixed { delta } => raw.iter().map(|s| s.smoothed(delta)).collect::<tvclt::Result<_>>()?,
            Smoothing::MatchingVariance => raw.iter().map(|s| s.smoothed(s.sd())).collect::<tvclt::Result<_>>()?,
            Smoothing::Auto => {
                if raw.iter().all(DistributionSpec::is_smooth) {
                    raw
                } else {
                    let delta = 0.25 * raw.iter().map(DistributionSpec::sd).fold(f64::INFINITY, f64::min);
                    raw.iter().map(|s| s.smoothed(delta)).collect::<tvclt::Result<_>>()?
                }
            }
        };
        SumSequence::new(smoothed)
    }

    /// Summands before smoothing are all absolutely continuous.
    pub fn base_is_smooth(&self) -> bool {
        let fams: Vec<&Family> = match self.rule {
            Rule::Explicit => self.summands.iter().collect(),
            _ => self.base.iter().collect(),
        };
        fams.into_iter().all(|f| DistributionSpec::new(f.clone()).map(|s| s.is_smooth()).unwrap_or(false))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        Self { lo: 1e-3, hi: 1.0, points: 50 }
    }
}

impl EpsilonGrid {
    pub fn values(&self) -> Vec<f64> {
        tvclt::metrics::log_grid(self.lo, self.hi, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(format!("unknown format '{other}', expected csv, json or svg")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("tvclt-out"), formats: vec![Format::Csv, Format::Json, Format::Svg] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// Stein solution, score and kernel identities, entropy inequality.
    pub identities: bool,
    /// Leave-one-out score moments for every `k` and `n <= loo_max_n`.
    pub loo_score: bool,
    pub loo_max_n: usize,
    /// Lindeberg scan and the `M_n <= L_n(ε) + ε` decomposition.
    pub lindeberg: bool,
    /// `δ -> 0` stability of smooth sequences over `delta_grid`.
    pub smoothing: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self { identities: true, loo_score: true, loo_max_n: 50, lindeberg: true, smoothing: true }
    }
}

fn default_n_values() -> Vec<usize> {
    vec![2, 5, 10, 20, 50]
}

fn default_delta_grid() -> Vec<f64> {
    vec![1e-2, 1e-3]
}

fn default_c() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    20_240_917
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub epsilon_grid: EpsilonGrid,
    #[serde(default = "default_delta_grid")]
    pub delta_grid: Vec<f64>,
    /// Constant of the shape-only Kolmogorov bounds.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Seed of the random test functions.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub output: OutputConfig,
    pub sequences: Vec<SequenceConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_values.is_empty() {
            return Err(invalid("n_values", "must not be empty"));
        }
        if self.n_values.contains(&0) {
            return Err(invalid("n_values", "entries must be positive"));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_values", "must be strictly ascending"));
        }
        let e = &self.epsilon_grid;
        if !(e.lo > 0.0 && e.lo < e.hi && e.hi <= 1.0 && e.points >= 2) {
            return Err(invalid("epsilon_grid", "needs 0 < lo < hi <= 1 and at least 2 points"));
        }
        if self.delta_grid.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(invalid("delta_grid", "entries must be positive"));
        }
        if self.delta_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("delta_grid", "must be strictly descending"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("c", "must be positive"));
        }
        if self.grid.m < 16 || !self.grid.m.is_power_of_two() {
            return Err(invalid("grid.m", format!("{} is not a power of two >= 16", self.grid.m)));
        }
        if !(self.grid.extent_sigmas > 0.0 && self.grid.extent_sigmas.is_finite()) {
            return Err(invalid("grid.extent_sigmas", "must be positive"));
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats", "must name at least one format"));
        }
        if self.sequences.is_empty() {
            return Err(invalid("sequences", "must not be empty"));
        }
        let mut names: Vec<&str> = self.sequences.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid("sequences.name", format!("duplicate name '{}'", w[0])));
        }
        for (i, s) in self.sequences.iter().enumerate() {
            let field = |f: &str| format!("sequences[{i}].{f}");
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(invalid(field("name"), "must be non-empty and use only [A-Za-z0-9_-]"));
            }
            match s.rule {
                Rule::Repeat | Rule::AlternateScales => {
                    let Some(base) = &s.base else {
                        return Err(invalid(field("base"), "required by this rule"));
                    };
                    DistributionSpec::new(base.clone()).map_err(|e| invalid(field("base"), e.to_string()))?;
                    if !s.summands.is_empty() {
                        return Err(invalid(field("summands"), "only allowed with rule = \"explicit\""));
                    }
                }
                Rule::Explicit => {
                    if s.summands.is_empty() {
                        return Err(invalid(field("summands"), "required by rule = \"explicit\""));
                    }
                    if s.base.is_some() {
                        return Err(invalid(field("base"), "not allowed with rule = \"explicit\""));
                    }
                    for (j, f) in s.summands.iter().enumerate() {
                        DistributionSpec::new(f.clone()).map_err(|e| invalid(field(&format!("summands[{j}]")), e.to_string()))?;
                    }
                }
            }
            if let Smoothing::Fixed { delta } = s.smoothing {
                if !(delta >= 0.0 && delta.is_finite()) {
                    return Err(invalid(field("smoothing.delta"), "must be non-negative"));
                }
            }
        }
        Ok(())
    }

    pub fn max_n(&self) -> usize {
        *self.n_values.last().expect("validated")
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a config held in memory.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    parse_config(&text)
}

/// Canonical text form; loading it back yields the same config.
pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config is always representable")
}

pub fn save_config(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, to_toml(cfg))
}
