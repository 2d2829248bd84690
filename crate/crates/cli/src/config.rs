use std::fs;
use std::path::{Path, PathBuf};

use misspec_krige::diagnostics::{Budget, Quadrature};
use misspec_krige::harness::{ModelSpec, Scenario, ScenarioRegistry, MAX_DESIGN_SIZE};
use misspec_krige::{Error, KernelConfig, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Config for `run`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    /// A built-in scenario name, an inline scenario, or a list of either.
    pub scenario: Value,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Replaces every scenario's n schedule.
    #[serde(default)]
    pub schedule: Option<Vec<usize>>,
    /// Merged key by key into every scenario's budget.
    #[serde(default)]
    pub budget: Option<serde_json::Map<String, Value>>,
}

/// Config for `check`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub schema: u32,
    pub true_model: ModelSpec,
    pub wrong_model: ModelSpec,
    #[serde(default)]
    pub budget: Budget,
}

fn default_cutoff() -> f64 {
    1e-12
}

/// Config for `eigen`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    pub schema: u32,
    pub kernel: KernelConfig,
    pub quadrature: Quadrature,
    #[serde(default = "default_cutoff")]
    pub rank_cutoff: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

trait Versioned {
    fn schema(&self) -> u32;
}

impl Versioned for ExperimentConfig {
    fn schema(&self) -> u32 {
        self.schema
    }
}

impl Versioned for CheckConfig {
    fn schema(&self) -> u32 {
        self.schema
    }
}

impl Versioned for EigenConfig {
    fn schema(&self) -> u32 {
        self.schema
    }
}

fn load<T: DeserializeOwned + Versioned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: T = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if config.schema() != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported schema {}, expected {SCHEMA_VERSION}",
            path.display(),
            config.schema()
        )));
    }
    Ok(config)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    load(path)
}

pub fn load_check(path: &Path) -> Result<CheckConfig> {
    load(path)
}

pub fn load_eigen(path: &Path) -> Result<EigenConfig> {
    load(path)
}

impl ExperimentConfig {
    /// Scenarios with overrides applied, in config order.
    pub fn scenarios(&self, registry: &ScenarioRegistry) -> Result<Vec<Scenario>> {
        let entries = match &self.scenario {
            Value::Array(items) if items.is_empty() => {
                return Err(Error::Config("`scenario` list is empty".into()));
            }
            Value::Array(items) => items.clone(),
            other => vec![other.clone()],
        };
        let mut out = Vec::with_capacity(entries.len());
        for entry in entries {
            let mut s = match entry {
                Value::String(name) => registry.get(&name)?,
                v @ Value::Object(_) => {
                    serde_json::from_value(v).map_err(|e| Error::Config(format!("inline scenario: {e}")))?
                }
                other => {
                    return Err(Error::Config(format!(
                        "`scenario` entries must be names or objects, got {other}"
                    )))
                }
            };
            if let Some(schedule) = &self.schedule {
                s.schedule = schedule.clone();
            }
            if let Some(patch) = &self.budget {
                let mut merged = serde_json::to_value(&s.budget).expect("budget serializes");
                merged
                    .as_object_mut()
                    .expect("budget is an object")
                    .extend(patch.clone());
                s.budget = serde_json::from_value(merged).map_err(|e| Error::Config(format!("budget: {e}")))?;
            }
            s.validate()?;
            if let Some(&n) = s.schedule.iter().find(|&&n| n > MAX_DESIGN_SIZE) {
                return Err(Error::Config(format!(
                    "scenario {}: n = {n} exceeds the maximum design size {MAX_DESIGN_SIZE}",
                    s.name
                )));
            }
            out.push(s);
        }
        let mut names: Vec<&str> = out.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("scenario `{}` listed twice", w[0])));
        }
        Ok(out)
    }
}
