//! Scenario library and experiment runner.

mod design;
mod scenario;

pub use design::{
    fibonacci_sphere, radical_inverse, DesignGenerator, DesignKind, TargetPlan, TargetSpec, DEFAULT_HELD_OUT,
    MAX_DESIGN_SIZE, XSTAR_ID,
};
pub use scenario::{
    identical, matern_diff_nu, matern_same_nu, mean_shift_constant, mean_shift_kink, periodic_ratio3, scaled_kernel,
    sphere_legendre_vs_spde, ModelSpec, ResolvedScenario, Scenario, ScenarioFactory, ScenarioRegistry,
    DEFAULT_SCHEDULE, X_STAR,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{assumption_report, AssumptionReport};
use crate::error::{Error, Result};
use crate::kernels::KernelRegistry;
use crate::ratios::{invariant_violation, ratio_convergence_partial, RatioTable};

/// Mean term of one target at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanTermRow {
    pub n: usize,
    pub target_id: String,
    pub value: f64,
}

/// Output of [`run_scenario`]. A failure at some `n` keeps the levels
/// completed before it and is recorded in `table.failure`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRun {
    pub scenario: String,
    pub table: RatioTable,
    pub report: Option<AssumptionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_error: Option<String>,
    pub mean_terms: Vec<MeanTermRow>,
    /// Largest violation of the algebraic ratio invariants.
    pub invariant_violation: f64,
    pub design_note: String,
    #[serde(skip)]
    errors: Vec<Error>,
}

impl ScenarioRun {
    pub fn is_complete(&self) -> bool {
        self.errors.is_empty()
    }

    /// Errors that interrupted the run, ratio table first.
    pub fn errors(&self) -> &[Error] {
        &self.errors
    }
}

/// Ratio table over the scenario's schedule plus the assumption report.
pub fn run_scenario(scenario: &Scenario, kernels: &KernelRegistry) -> Result<ScenarioRun> {
    let r = scenario.resolve(kernels)?;
    run_resolved(&r)
}

pub fn run_resolved(r: &ResolvedScenario) -> Result<ScenarioRun> {
    let s = &r.scenario;
    let (table, report) = rayon::join(
        || {
            ratio_convergence_partial(
                &r.true_model,
                &r.wrong_model,
                &r.designs,
                &r.targets,
                &s.schedule,
                s.expected_a,
            )
        },
        || assumption_report(&r.true_model, &r.wrong_model, &s.budget),
    );
    let table = table?;
    let mut errors = Vec::new();
    if let Some(f) = &table.failure {
        log::error!("scenario {} failed at n = {}: {}", s.name, f.n, f.message);
        errors.push(f.error.clone());
    }
    let (report, report_error) = match report {
        Ok(rep) => (Some(rep), None),
        Err(e) => {
            log::error!("scenario {}: assumption report failed: {e}", s.name);
            let msg = e.to_string();
            errors.push(e);
            (None, Some(msg))
        }
    };
    let mean_terms = table
        .records
        .iter()
        .map(|rec| MeanTermRow {
            n: rec.n,
            target_id: rec.target_id.clone(),
            value: rec.mean_term,
        })
        .collect();
    let design_note = match r.designs.accumulation_point() {
        Some(x) => format!("admissible by construction: nested, space-filling, and accumulating at {x:?}"),
        None => "deterministic space-filling design".into(),
    };
    Ok(ScenarioRun {
        scenario: s.name.clone(),
        invariant_violation: invariant_violation(&table.records),
        table,
        report,
        report_error,
        mean_terms,
        design_note,
        errors,
    })
}

/// Runs scenarios concurrently; results keep the input order.
pub fn run_scenarios(scenarios: &[Scenario], kernels: &KernelRegistry) -> Vec<Result<ScenarioRun>> {
    scenarios.par_iter().map(|s| run_scenario(s, kernels)).collect()
}
