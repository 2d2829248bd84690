use std::collections::BTreeMap;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::periodic::{DEFAULT_TRUNCATION_1D, DEFAULT_TRUNCATION_2D};
use super::{
    ChordalMaternKernel, CovarianceKernel, Domain, GreatCircleMaternKernel, LegendreMaternKernel, MaternKernel,
    MaternParams, PeriodicKernel, PeriodicSpectrum, ScaledKernel, SpectrumFamily, SphereLegendreParams,
    SphereSpdeKernel, SphereSpdeParams,
};
use crate::error::{Error, Result};

/// A kernel selected by family name plus that family's parameters.
///
/// ```json
/// { "family": "matern", "sigma": 1.0, "nu": 0.5, "kappa": 1.0 }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl KernelConfig {
    pub fn new(family: &str, params: Value) -> Self {
        let params = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self {
            family: family.to_string(),
            params,
        }
    }

    pub fn matern(sigma: f64, nu: f64, kappa: f64) -> Self {
        Self::new(
            "matern",
            serde_json::json!({ "sigma": sigma, "nu": nu, "kappa": kappa }),
        )
    }

    pub fn scaled(factor: f64, inner: KernelConfig) -> Self {
        Self::new("scaled", serde_json::json!({ "factor": factor, "inner": inner }))
    }
}

pub type KernelFactory = fn(&KernelRegistry, &Map<String, Value>) -> Result<Arc<dyn CovarianceKernel>>;

/// Name-keyed table of kernel families.
#[derive(Clone)]
pub struct KernelRegistry {
    factories: BTreeMap<String, KernelFactory>,
}

impl Default for KernelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl KernelRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("matern", build_matern);
        r.register("periodic", build_periodic);
        r.register("legendre_matern", build_legendre_matern);
        r.register("sphere_spde", build_sphere_spde);
        r.register("chordal_matern", build_chordal);
        r.register("great_circle_matern", build_great_circle);
        r.register("scaled", build_scaled);
        r
    }

    pub fn register(&mut self, name: &str, factory: KernelFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn families(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, config: &KernelConfig) -> Result<Arc<dyn CovarianceKernel>> {
        let factory = self.factories.get(&config.family).ok_or_else(|| Error::Unknown {
            kind: "kernel family",
            name: config.family.clone(),
        })?;
        factory(self, &config.params)
    }
}

fn parse<T: DeserializeOwned>(family: &str, params: &Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(params.clone())).map_err(|e| Error::Config(format!("kernel `{family}`: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MaternConfig {
    sigma: f64,
    nu: f64,
    kappa: f64,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default)]
    domain: Option<Domain>,
}

fn build_matern(_: &KernelRegistry, params: &Map<String, Value>) -> Result<Arc<dyn CovarianceKernel>> {
    let c: MaternConfig = parse("matern", params)?;
    let dim = c.dim.or_else(|| c.domain.as_ref().map(Domain::dim)).unwrap_or(1);
    let mut k = MaternKernel::new(MaternParams::new(c.sigma, c.nu, c.kappa, dim)?)?;
    if let Some(d) = c.domain {
        k = k.with_domain(d)?;
    }
    Ok(Arc::new(k))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PeriodicConfig {
    #[serde(default = "one")]
    dim: usize,
    #[serde(default)]
    truncation: Option<usize>,
    spectrum: SpectrumFamily,
}

fn one() -> usize {
    1
}

fn build_periodic(_: &KernelRegistry, params: &Map<String, Value>) -> Result<Arc<dyn CovarianceKernel>> {
    let c: PeriodicConfig = parse("periodic", params)?;
    let truncation = c.truncation.unwrap_or(if c.dim == 1 {
        DEFAULT_TRUNCATION_1D
    } else {
        DEFAULT_TRUNCATION_2D
    });
    let s = PeriodicSpectrum::new(c.dim, truncation, c.spectrum)?;
    Ok(Arc::new(PeriodicKernel::new(s)))
}

fn build_legendre_matern(_: &KernelRegistry, params: &Map<String, Value>) -> Result<Arc<dyn CovarianceKernel>> {
    let p: SphereLegendreParams = parse("legendre_matern", params)?;
    Ok(Arc::new(LegendreMaternKernel::new(p)?))
}

fn build_sphere_spde(_: &KernelRegistry, params: &Map<String, Value>) -> Result<Arc<dyn CovarianceKernel>> {
    let p: SphereSpdeParams = parse("sphere_spde", params)?;
    Ok(Arc::new(SphereSpdeKernel::new(p)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereMaternConfig {
    sigma: f64,
    nu: f64,
    kappa: f64,
}

fn build_chordal(_: &KernelRegistry, params: &Map<String, Value>) -> Result<Arc<dyn CovarianceKernel>> {
    let c: SphereMaternConfig = parse("chordal_matern", params)?;
    Ok(Arc::new(ChordalMaternKernel::new(c.sigma, c.nu, c.kappa)?))
}

fn build_great_circle(_: &KernelRegistry, params: &Map<String, Value>) -> Result<Arc<dyn CovarianceKernel>> {
    let c: SphereMaternConfig = parse("great_circle_matern", params)?;
    Ok(Arc::new(GreatCircleMaternKernel::new(c.sigma, c.nu, c.kappa)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaledConfig {
    factor: f64,
    inner: KernelConfig,
}

fn build_scaled(registry: &KernelRegistry, params: &Map<String, Value>) -> Result<Arc<dyn CovarianceKernel>> {
    let c: ScaledConfig = parse("scaled", params)?;
    let inner = registry.build(&c.inner)?;
    Ok(Arc::new(ScaledKernel::new(c.factor, inner)?))
}
