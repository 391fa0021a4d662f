//! Declarative pipeline configuration, read from a TOML file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use actorcause_core::event_log::{ColumnMapping, CsvOptions};
use actorcause_core::{BehaviorType, Completion, Granularity, LassoConfig, OutcomeRule, SynthLogConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Significance levels with tabulated ADF critical values.
pub const SUPPORTED_ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config '{path}': {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Xes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    /// Inferred from the file extension when absent.
    pub format: Option<InputFormat>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// chrono format string; RFC 3339 when absent.
    pub timestamp_format: Option<String>,
    #[serde(default)]
    pub columns: ColumnMapping,
}

fn default_delimiter() -> char {
    ','
}

impl InputConfig {
    pub fn resolved_format(&self) -> InputFormat {
        self.format.unwrap_or_else(|| {
            let ext = self.path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if ext.eq_ignore_ascii_case("xes") {
                InputFormat::Xes
            } else {
                InputFormat::Csv
            }
        })
    }

    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            mapping: self.columns.clone(),
            delimiter: self.delimiter as u8,
            timestamp_format: self.timestamp_format.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesConfig {
    pub granularity: Vec<Granularity>,
    /// Groups kept per grouped granularity.
    pub top_k: usize,
    pub completion: Completion,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            granularity: vec![Granularity::Global],
            top_k: 10,
            completion: Completion::default(),
        }
    }
}

/// One KPI column. Set either `throughput = true` or an outcome `rule`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpiConfig {
    pub name: String,
    #[serde(default)]
    pub throughput: bool,
    pub rule: Option<OutcomeRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdfConfig {
    pub max_lag: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Keep only the strongest edges in `graph.dot`; all when absent.
    pub top_edges: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub kpi: Vec<KpiConfig>,
    #[serde(default)]
    pub lasso: LassoConfig,
    #[serde(default)]
    pub adf: AdfConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    /// Used in place of `[input]` when no input is given. Its `seed` is
    /// always taken from the top-level `seed`.
    pub synth: Option<SynthLogConfig>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A validated config together with the digest of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub sha256: String,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Relative paths are taken relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(input) = &mut self.input {
            if input.path.is_relative() {
                input.path = base.join(&input.path);
            }
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !SUPPORTED_ALPHAS.iter().any(|a| (a - self.alpha).abs() < 1e-12) {
            return bad(format!("alpha = {} is not supported; use 0.01, 0.05 or 0.10", self.alpha));
        }
        if self.kpi.is_empty() {
            return bad("no [[kpi]] defined; add e.g. name = \"TT\" with throughput = true".into());
        }
        let reserved: BTreeSet<&str> = BehaviorType::ALL.iter().map(|b| b.code()).collect();
        let mut names = BTreeSet::new();
        for k in &self.kpi {
            if k.name.trim().is_empty() {
                return bad("a [[kpi]] entry has an empty name".into());
            }
            if !names.insert(k.name.as_str()) {
                return bad(format!("KPI name '{}' is used twice", k.name));
            }
            if reserved.contains(k.name.as_str()) || k.name.contains('@') {
                return bad(format!("KPI name '{}' clashes with behavior series names", k.name));
            }
            match (k.throughput, &k.rule) {
                (false, None) => {
                    return bad(format!(
                        "KPI '{}' has no outcome rule; set throughput = true or a rule (keyword, last_event or attribute)",
                        k.name
                    ))
                }
                (true, Some(_)) => {
                    return bad(format!("KPI '{}' sets both throughput and an outcome rule; choose one", k.name))
                }
                _ => {}
            }
            if let Some(OutcomeRule::Keyword { keywords }) = &k.rule {
                if keywords.is_empty() {
                    return bad(format!("KPI '{}' has an empty keyword list", k.name));
                }
            }
        }
        if self.series.granularity.is_empty() {
            return bad("series.granularity is empty".into());
        }
        if self.series.top_k == 0 {
            return bad("series.top_k must be at least 1".into());
        }
        if let Completion::Margin { days } = self.series.completion {
            if !(days.is_finite() && days >= 0.0) {
                return bad("series.completion margin must be a non-negative number of days".into());
            }
        }
        let l = &self.lasso;
        if l.max_lag == 0 {
            return bad("lasso.max_lag must be at least 1".into());
        }
        if l.top_k == 0 {
            return bad("lasso.top_k must be at least 1".into());
        }
        if l.lambda_group_grid.is_empty() || l.lambda_l1_grid.is_empty() {
            return bad("lasso grids must not be empty".into());
        }
        if l.lambda_group_grid.iter().chain(&l.lambda_l1_grid).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("lasso grids must hold finite non-negative values".into());
        }
        if l.tolerance.is_nan() || l.tolerance <= 0.0 || l.max_iterations == 0 {
            return bad("lasso.tolerance and lasso.max_iterations must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        match (&self.input, &self.synth) {
            (None, None) => return bad("either [input] or [synth] is required".into()),
            (Some(input), _) => {
                if !input.delimiter.is_ascii() {
                    return bad("input.delimiter must be a single ASCII character".into());
                }
                if !input.path.is_file() {
                    return bad(format!("input file '{}' does not exist", input.path.display()));
                }
            }
            (None, Some(_)) => {}
        }
        if let Some(s) = self.synth_config() {
            s.validate().map_err(|e| ConfigError::Invalid(format!("[synth]: {e}")))?;
        }
        Ok(())
    }

    /// The `[synth]` section with the top-level seed applied.
    pub fn synth_config(&self) -> Option<SynthLogConfig> {
        self.synth.clone().map(|s| SynthLogConfig { seed: self.seed, ..s })
    }
}

/// Reads, resolves and validates a config file.
pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = fs::read(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| ConfigError::Invalid("config is not UTF-8".into()))?;
    let mut config = PipelineConfig::from_toml(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    config.resolve_paths(base);
    config.validate()?;
    Ok(LoadedConfig {
        config,
        sha256: hex_digest(&bytes),
    })
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
