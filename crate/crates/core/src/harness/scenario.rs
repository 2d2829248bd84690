use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::design::{DesignGenerator, DesignKind, TargetPlan, TargetSpec};
use crate::diagnostics::Budget;
use crate::error::{Error, Result};
use crate::kernels::{KernelConfig, KernelRegistry};
use crate::kriging::{GaussianModel, MeanConfig};

pub const DEFAULT_SCHEDULE: [usize; 4] = [8, 16, 32, 64];

/// A Gaussian model described by kernel family and mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub mean: MeanConfig,
}

impl ModelSpec {
    pub fn centered(kernel: KernelConfig) -> Self {
        Self {
            label: None,
            kernel,
            mean: MeanConfig::Zero,
        }
    }

    pub fn with_mean(mut self, mean: MeanConfig) -> Self {
        self.mean = mean;
        self
    }

    pub fn build(&self, registry: &KernelRegistry) -> Result<GaussianModel> {
        let kernel = registry.build(&self.kernel)?;
        let mean = self.mean.build()?;
        let label = self
            .label
            .clone()
            .unwrap_or_else(|| format!("{} + {}", mean.name(), kernel.name()));
        Ok(GaussianModel::new(label, mean, kernel))
    }
}

fn default_schedule() -> Vec<usize> {
    DEFAULT_SCHEDULE.to_vec()
}

/// Everything needed to run one misspecification study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub true_model: ModelSpec,
    pub wrong_model: ModelSpec,
    pub design: DesignKind,
    #[serde(default)]
    pub targets: TargetSpec,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<usize>,
    /// Analytic limit `a` of `r_var_3`, when the pair has one.
    #[serde(default)]
    pub expected_a: Option<f64>,
    #[serde(default)]
    pub budget: Budget,
}

/// A scenario with its models and generators built.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub true_model: GaussianModel,
    pub wrong_model: GaussianModel,
    pub designs: DesignGenerator,
    pub targets: TargetPlan,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("scenario name is empty".into()));
        }
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] >= w[1]) || self.schedule[0] == 0 {
            return Err(Error::Config(format!(
                "schedule must be positive and strictly increasing, got {:?}",
                self.schedule
            )));
        }
        if let Some(a) = self.expected_a {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Config(format!("expected_a must be positive, got {a}")));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, registry: &KernelRegistry) -> Result<ResolvedScenario> {
        self.validate()?;
        let true_model = self.true_model.build(registry)?;
        let wrong_model = self.wrong_model.build(registry)?;
        let domain = true_model.domain().clone();
        if wrong_model.domain() != &domain {
            return Err(Error::Config(format!(
                "true model lives on {domain:?} but the wrong model on {:?}",
                wrong_model.domain()
            )));
        }
        let designs = DesignGenerator::new(self.design.clone(), domain.clone())?;
        let targets = TargetPlan {
            spec: self.targets.clone(),
            accumulation: designs.accumulation_point(),
            domain,
        };
        Ok(ResolvedScenario {
            scenario: self.clone(),
            true_model,
            wrong_model,
            designs,
            targets,
        })
    }
}

pub type ScenarioFactory = fn() -> Scenario;

/// Name-keyed table of scenarios.
#[derive(Clone)]
pub struct ScenarioRegistry {
    factories: BTreeMap<String, ScenarioFactory>,
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("identical", identical);
        r.register("scaled_kernel", scaled_kernel);
        r.register("matern_same_nu", matern_same_nu);
        r.register("matern_diff_nu", matern_diff_nu);
        r.register("periodic_ratio3", periodic_ratio3);
        r.register("sphere_legendre_vs_spde", sphere_legendre_vs_spde);
        r.register("mean_shift_constant", mean_shift_constant);
        r.register("mean_shift_kink", mean_shift_kink);
        r
    }

    pub fn register(&mut self, name: &str, factory: ScenarioFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<Scenario> {
        self.factories.get(name).map(|f| f()).ok_or_else(|| Error::Unknown {
            kind: "scenario",
            name: name.to_string(),
        })
    }
}

pub const X_STAR: f64 = 0.37;

fn accumulating() -> DesignKind {
    DesignKind::AccumulatingAt {
        x_star: X_STAR,
        q: 0.5,
        scale: 0.25,
    }
}

fn exponential() -> KernelConfig {
    KernelConfig::matern(1.0, 0.5, 1.0)
}

fn base(name: &str, truth: ModelSpec, wrong: ModelSpec, a: Option<f64>) -> Scenario {
    Scenario {
        name: name.to_string(),
        true_model: truth,
        wrong_model: wrong,
        design: accumulating(),
        targets: TargetSpec::default(),
        schedule: default_schedule(),
        expected_a: a,
        budget: Budget::default(),
    }
}

/// Both models equal.
pub fn identical() -> Scenario {
    base(
        "identical",
        ModelSpec::centered(exponential()),
        ModelSpec::centered(exponential()),
        Some(1.0),
    )
}

/// `rho~ = 4 rho`.
pub fn scaled_kernel() -> Scenario {
    base(
        "scaled_kernel",
        ModelSpec::centered(exponential()),
        ModelSpec::centered(KernelConfig::scaled(4.0, exponential())),
        Some(4.0),
    )
}

/// Matérn `nu = 1/2`, `(sigma, kappa) = (1, 1)` against `(2, 1/2)`.
pub fn matern_same_nu() -> Scenario {
    base(
        "matern_same_nu",
        ModelSpec::centered(exponential()),
        ModelSpec::centered(KernelConfig::matern(2.0, 0.5, 0.5)),
        Some(2.0),
    )
}

/// Matérn `nu = 1/2` against `nu~ = 3/2`.
pub fn matern_diff_nu() -> Scenario {
    base(
        "matern_diff_nu",
        ModelSpec::centered(exponential()),
        ModelSpec::centered(KernelConfig::matern(1.0, 1.5, 1.0)),
        None,
    )
}

/// `f(k) = (1 + k^2)^-2` against `3 f(k)(1 + 1/(1 + |k|))` on the circle.
pub fn periodic_ratio3() -> Scenario {
    let spectrum = |scale: f64, tilt: f64| {
        KernelConfig::new(
            "periodic",
            json!({"spectrum": {"type": "algebraic", "scale": scale, "power": 2.0, "tilt": tilt}}),
        )
    };
    let mut s = base(
        "periodic_ratio3",
        ModelSpec::centered(spectrum(1.0, 0.0)),
        ModelSpec::centered(spectrum(3.0, 1.0)),
        Some(3.0),
    );
    s.budget.eigen_resolution = 5000;
    s
}

/// Legendre–Matérn `(sigma1, nu1, kappa1) = (1, 1, 1)` against the SPDE
/// model `(tau, nu, kappa) = (1, 1, 1)`.
pub fn sphere_legendre_vs_spde() -> Scenario {
    let l_max = 512;
    let mut s = base(
        "sphere_legendre_vs_spde",
        ModelSpec::centered(KernelConfig::new(
            "legendre_matern",
            json!({"sigma1": 1.0, "nu1": 1.0, "kappa1": 1.0, "l_max": l_max}),
        )),
        ModelSpec::centered(KernelConfig::new(
            "sphere_spde",
            json!({"tau": 1.0, "nu": 1.0, "kappa": 1.0, "l_max": l_max}),
        )),
        Some(1.0 / (2.0 * PI)),
    );
    s.design = DesignKind::SphereFibonacci;
    s
}

/// Shared exponential kernel, wrong mean shifted by the constant 1.
pub fn mean_shift_constant() -> Scenario {
    base(
        "mean_shift_constant",
        ModelSpec::centered(exponential()),
        ModelSpec::centered(exponential()).with_mean(MeanConfig::Constant { value: 1.0 }),
        Some(1.0),
    )
}

/// Shared exponential kernel, wrong mean `|x - 0.37|^0.2`.
pub fn mean_shift_kink() -> Scenario {
    base(
        "mean_shift_kink",
        ModelSpec::centered(exponential()),
        ModelSpec::centered(exponential()).with_mean(MeanConfig::Kink {
            center: vec![X_STAR],
            exponent: 0.2,
            scale: 1.0,
            offset: 0.0,
        }),
        Some(1.0),
    )
}
