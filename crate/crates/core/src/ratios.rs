//! Efficiency ratios of a misspecified kriging predictor.
//!
//! With `h_n` the kriging predictor under the true model `(m, rho)` and
//! `h~_n` the one under the presumed model `(m~, rho~)`, and `E, Var` /
//! `E~, Var~` the moments under either measure:
//!
//! | name      | ratio                              |
//! |-----------|------------------------------------|
//! | `r_var_1` | `Var[h~_n - h] / Var[h_n - h]`     |
//! | `r_var_2` | `Var~[h_n - h] / Var~[h~_n - h]`   |
//! | `r_var_3` | `Var~[h_n - h] / Var[h_n - h]`     |
//! | `r_var_4` | `Var[h~_n - h] / Var~[h~_n - h]`   |
//!
//! and `r_mom_*` likewise with second moments `E[(.)^2]`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kriging::{Design, ErrorMoments, GaussianModel, Kriger, TargetFunctional};

pub const RATIO_NAMES: [&str; 8] = [
    "r_var_1", "r_var_2", "r_var_3", "r_var_4", "r_mom_1", "r_mom_2", "r_mom_3", "r_mom_4",
];

pub const SUP_ID: &str = "SUP";

/// Targets whose true-model kriging variance is at or below this are
/// excluded from the ratio computation.
pub const MIN_TARGET_VARIANCE: f64 = 1e-12;

/// Targets closer than this to a design site are excluded.
pub const MIN_TARGET_SEPARATION: f64 = 1e-9;

/// The four error-moment evaluations behind one ratio record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMoments {
    /// `h_n - h` under the true measure.
    pub true_under_true: ErrorMoments,
    /// `h_n - h` under the presumed measure.
    pub true_under_wrong: ErrorMoments,
    /// `h~_n - h` under the true measure.
    pub wrong_under_true: ErrorMoments,
    /// `h~_n - h` under the presumed measure.
    pub wrong_under_wrong: ErrorMoments,
}

impl PairMoments {
    pub fn ratios(&self) -> [f64; 8] {
        let (tt, tw, wt, ww) = (
            &self.true_under_true,
            &self.true_under_wrong,
            &self.wrong_under_true,
            &self.wrong_under_wrong,
        );
        [
            wt.variance / tt.variance,
            tw.variance / ww.variance,
            tw.variance / tt.variance,
            wt.variance / ww.variance,
            wt.second_moment / tt.second_moment,
            tw.second_moment / ww.second_moment,
            tw.second_moment / tt.second_moment,
            wt.second_moment / ww.second_moment,
        ]
    }

    /// `|E~[h_n - h]|^2 / E[(h_n - h)^2]`.
    pub fn mean_term(&self) -> f64 {
        let m = self.true_under_wrong.mean;
        m * m / self.true_under_true.second_moment
    }
}

/// Ratios for one target, or the sup over targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRecord {
    pub n: usize,
    pub target_id: String,
    /// In the order of [`RATIO_NAMES`].
    pub values: [f64; 8],
    pub limits: [Option<f64>; 8],
    /// `|value - limit|`; for the sup record, the max over targets.
    pub abs_dev: [Option<f64>; 8],
    pub mean_term: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<PairMoments>,
}

impl RatioRecord {
    pub fn is_sup(&self) -> bool {
        self.target_id == SUP_ID
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        RATIO_NAMES.iter().position(|&r| r == name).map(|i| self.values[i])
    }

    pub fn r_var(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    pub fn r_mom(&self, k: usize) -> f64 {
        self.values[k + 3]
    }

    pub fn deviation(&self, name: &str) -> Option<f64> {
        RATIO_NAMES
            .iter()
            .position(|&r| r == name)
            .and_then(|i| self.abs_dev[i])
    }
}

/// Analytic limits for the eight ratios given the constant `a`.
pub fn ratio_limits(a: Option<f64>) -> [Option<f64>; 8] {
    match a {
        None => [None; 8],
        Some(a) => {
            let one = Some(1.0);
            [one, one, Some(a), Some(1.0 / a), one, one, Some(a), Some(1.0 / a)]
        }
    }
}

/// A target left out of the ratio computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub n: usize,
    pub target_id: String,
    pub reason: String,
}

/// Per-target records followed by the sup record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSet {
    pub records: Vec<RatioRecord>,
    pub excluded: Vec<Exclusion>,
    pub jitter_true: f64,
    pub jitter_wrong: f64,
    pub condition_true: f64,
    pub condition_wrong: f64,
}

impl RatioSet {
    pub fn sup(&self) -> &RatioRecord {
        self.records.last().expect("a ratio set always holds the sup record")
    }
}

/// Eight ratios for every target plus a sup record; `a` attaches limits.
pub fn efficiency_ratios(
    design: &Design,
    targets: &[TargetFunctional],
    true_model: &GaussianModel,
    wrong_model: &GaussianModel,
    a: Option<f64>,
) -> Result<RatioSet> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("target set is empty".into()));
    }
    let design = Arc::new(design.clone());
    let n = design.len();
    let k_true = Kriger::new(design.clone(), true_model.clone())?;
    let k_wrong = Kriger::new(design.clone(), wrong_model.clone())?;
    let ev_true = k_true.evaluator();
    let ev_wrong = k_wrong.evaluator();
    let limits = ratio_limits(a);

    let outcomes: Vec<Result<std::result::Result<RatioRecord, Exclusion>>> = targets
        .par_iter()
        .map(|t| {
            let exclude = |reason: String| {
                log::warn!("n={n}: excluding target `{}`: {reason}", t.id);
                Ok(Err(Exclusion {
                    n,
                    target_id: t.id.clone(),
                    reason,
                }))
            };
            let gap = t
                .terms
                .iter()
                .map(|(x, _)| design.distance_to(x))
                .fold(f64::INFINITY, f64::min);
            if gap < MIN_TARGET_SEPARATION {
                return exclude(format!("target site within {gap:e} of a design site"));
            }
            let h = k_true.predictor(t)?;
            let h_w = k_wrong.predictor(t)?;
            let m = PairMoments {
                true_under_true: ev_true.moments(&h, t)?,
                true_under_wrong: ev_wrong.moments(&h, t)?,
                wrong_under_true: ev_true.moments(&h_w, t)?,
                wrong_under_wrong: ev_wrong.moments(&h_w, t)?,
            };
            if m.true_under_true.variance <= MIN_TARGET_VARIANCE {
                return exclude(format!(
                    "true-model kriging variance {:e} is not above {MIN_TARGET_VARIANCE:e}",
                    m.true_under_true.variance
                ));
            }
            let values = m.ratios();
            if values.iter().any(|v| !v.is_finite()) {
                return exclude("a ratio is not finite".into());
            }
            Ok(Ok(RatioRecord {
                n,
                target_id: t.id.clone(),
                values,
                limits,
                abs_dev: deviations(&values, &limits),
                mean_term: m.mean_term(),
                moments: Some(m),
            }))
        })
        .collect();

    let mut records = Vec::with_capacity(targets.len() + 1);
    let mut excluded = Vec::new();
    for o in outcomes {
        match o? {
            Ok(r) => records.push(r),
            Err(e) => excluded.push(e),
        }
    }
    if records.is_empty() {
        return Err(Error::InvalidDesign(format!("every target was excluded at n = {n}")));
    }
    records.push(sup_record(n, &records, limits));
    Ok(RatioSet {
        records,
        excluded,
        jitter_true: k_true.factor().jitter(),
        jitter_wrong: k_wrong.factor().jitter(),
        condition_true: k_true.factor().pivot_condition(),
        condition_wrong: k_wrong.factor().pivot_condition(),
    })
}

fn deviations(values: &[f64; 8], limits: &[Option<f64>; 8]) -> [Option<f64>; 8] {
    let mut out = [None; 8];
    for i in 0..8 {
        out[i] = limits[i].map(|l| (values[i] - l).abs());
    }
    out
}

/// Per ratio, the target maximizing `|ratio - limit|` (or the raw ratio when
/// no limit is attached); the first such target wins ties.
#[allow(clippy::manual_memcpy)]
fn sup_record(n: usize, records: &[RatioRecord], limits: [Option<f64>; 8]) -> RatioRecord {
    let mut values = [0.0; 8];
    let mut abs_dev = [None; 8];
    for i in 0..8 {
        let score = |r: &RatioRecord| r.abs_dev[i].unwrap_or(r.values[i]);
        let best = records
            .iter()
            .reduce(|b, r| if score(r) > score(b) { r } else { b })
            .expect("records are non-empty");
        values[i] = best.values[i];
        abs_dev[i] = best.abs_dev[i];
    }
    RatioRecord {
        n,
        target_id: SUP_ID.to_string(),
        values,
        limits,
        abs_dev,
        mean_term: records.iter().map(|r| r.mean_term).fold(0.0, f64::max),
        moments: None,
    }
}

/// `|E~[h_n - h]|^2 / E[(h_n - h)^2]` for two models sharing one kernel.
pub fn mean_term(
    design: &Design,
    target: &TargetFunctional,
    true_model: &GaussianModel,
    wrong_mean_model: &GaussianModel,
) -> Result<f64> {
    if !Arc::ptr_eq(&true_model.kernel, &wrong_mean_model.kernel)
        && true_model.kernel.name() != wrong_mean_model.kernel.name()
    {
        return Err(Error::InvalidParameter(
            "the mean term needs both models to share one kernel".into(),
        ));
    }
    let set = efficiency_ratios(design, std::slice::from_ref(target), true_model, wrong_mean_model, None)?;
    match set.records.first() {
        Some(r) if !r.is_sup() => Ok(r.mean_term),
        _ => Err(Error::InvalidDesign(format!(
            "target `{}` was excluded: {}",
            target.id,
            set.excluded.first().map(|e| e.reason.as_str()).unwrap_or("unknown")
        ))),
    }
}

/// Produces the design for a given `n`.
pub trait DesignSource: Send + Sync {
    fn design(&self, n: usize) -> Result<Design>;
    fn describe(&self) -> String;
}

/// Produces the target set for a design of size `n`.
pub trait TargetSource: Send + Sync {
    fn targets(&self, design: &Design) -> Result<Vec<TargetFunctional>>;
    fn describe(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableMetadata {
    pub true_model: String,
    pub wrong_model: String,
    pub design: String,
    pub targets: String,
    pub limit_a: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelInfo {
    pub n: usize,
    pub jitter_true: f64,
    pub jitter_wrong: f64,
    pub condition_true: f64,
    pub condition_wrong: f64,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelFailure {
    pub n: usize,
    pub message: String,
    #[serde(skip)]
    pub error: Error,
}

/// Ratio records over a schedule of `n`, ordered by `n` then target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTable {
    pub metadata: TableMetadata,
    pub records: Vec<RatioRecord>,
    pub levels: Vec<LevelInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<LevelFailure>,
}

impl RatioTable {
    pub fn ns(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.n).collect()
    }

    pub fn at(&self, n: usize) -> impl Iterator<Item = &RatioRecord> {
        self.records.iter().filter(move |r| r.n == n)
    }

    pub fn sup(&self, n: usize) -> Option<&RatioRecord> {
        self.at(n).find(|r| r.is_sup())
    }

    pub fn record(&self, n: usize, target_id: &str) -> Option<&RatioRecord> {
        self.at(n).find(|r| r.target_id == target_id)
    }
}

fn check_schedule(schedule: &[usize]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("n schedule is empty".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) || schedule[0] == 0 {
        return Err(Error::InvalidParameter(format!(
            "n schedule must be positive and strictly increasing, got {schedule:?}"
        )));
    }
    Ok(())
}

/// Like [`ratio_convergence`], but keeps the levels completed before the
/// first failing `n` and reports the failure in the table.
pub fn ratio_convergence_partial(
    true_model: &GaussianModel,
    wrong_model: &GaussianModel,
    designs: &dyn DesignSource,
    targets: &dyn TargetSource,
    schedule: &[usize],
    a: Option<f64>,
) -> Result<RatioTable> {
    check_schedule(schedule)?;
    let sets: Vec<Result<RatioSet>> = schedule
        .par_iter()
        .map(|&n| {
            let design = designs.design(n)?;
            let t = targets.targets(&design)?;
            efficiency_ratios(&design, &t, true_model, wrong_model, a)
        })
        .collect();

    let mut table = RatioTable {
        metadata: TableMetadata {
            true_model: true_model.label.clone(),
            wrong_model: wrong_model.label.clone(),
            design: designs.describe(),
            targets: targets.describe(),
            limit_a: a,
            note: "SUP is taken over the finite target set and bounds the supremum over all functionals from below"
                .into(),
        },
        records: Vec::new(),
        levels: Vec::new(),
        failure: None,
    };
    for (&n, set) in schedule.iter().zip(sets) {
        match set {
            Ok(set) => {
                table.levels.push(LevelInfo {
                    n,
                    jitter_true: set.jitter_true,
                    jitter_wrong: set.jitter_wrong,
                    condition_true: set.condition_true,
                    condition_wrong: set.condition_wrong,
                    excluded: set.excluded,
                });
                table.records.extend(set.records);
            }
            Err(e) => {
                table.failure = Some(LevelFailure {
                    n,
                    message: e.to_string(),
                    error: e,
                });
                break;
            }
        }
    }
    Ok(table)
}

/// Ratio records at each `n` of an increasing schedule.
pub fn ratio_convergence(
    true_model: &GaussianModel,
    wrong_model: &GaussianModel,
    designs: &dyn DesignSource,
    targets: &dyn TargetSource,
    schedule: &[usize],
    a: Option<f64>,
) -> Result<RatioTable> {
    let mut table = ratio_convergence_partial(true_model, wrong_model, designs, targets, schedule, a)?;
    match table.failure.take() {
        Some(f) => Err(f.error),
        None => Ok(table),
    }
}

/// Largest violation of the algebraic ratio invariants over a record set:
/// `r_var_1, r_var_2, r_mom_1, r_mom_2 >= 1`, the chain identity
/// `r_var_1 = r_var_4 * (Var~[h~ - h] / Var~[h - h]) * r_var_3` and the
/// split `r_mom_3 E[(h - h)^2] = r_var_3 Var[h - h] + E~[h - h]^2`.
pub fn invariant_violation(records: &[RatioRecord]) -> f64 {
    let mut worst: f64 = 0.0;
    for r in records.iter().filter(|r| !r.is_sup()) {
        for k in [0, 1, 4, 5] {
            worst = worst.max(1.0 - r.values[k]);
        }
        let Some(m) = &r.moments else { continue };
        let f4 = m.wrong_under_true.variance / m.wrong_under_wrong.variance;
        let f_mid = m.wrong_under_wrong.variance / m.true_under_wrong.variance;
        let f3 = m.true_under_wrong.variance / m.true_under_true.variance;
        worst = worst.max(rel_gap(f4 * f_mid * f3, r.r_var(1)));
        let lhs = r.r_mom(3) * m.true_under_true.second_moment;
        let rhs = r.r_var(3) * m.true_under_true.variance + m.true_under_wrong.mean.powi(2);
        worst = worst.max(rel_gap(lhs, rhs));
    }
    worst
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{CovarianceKernel, Domain, KernelConfig, KernelRegistry, ScaledKernel};
    use crate::kriging::MeanConfig;

    fn kernel(sigma: f64, nu: f64, kappa: f64) -> Arc<dyn CovarianceKernel> {
        KernelRegistry::with_builtins()
            .build(&KernelConfig::matern(sigma, nu, kappa))
            .unwrap()
    }

    fn line(xs: &[f64]) -> Design {
        Design::on_line(Domain::unit_interval(), xs).unwrap()
    }

    fn points(xs: &[f64]) -> Vec<TargetFunctional> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| TargetFunctional::point(format!("t{i}"), vec![x]))
            .collect()
    }

    #[test]
    fn identical_models_give_unit_ratios() {
        let m = GaussianModel::centered("m", kernel(1.0, 0.5, 1.0));
        let set = efficiency_ratios(&line(&[0.1, 0.4, 0.8]), &points(&[0.25, 0.6]), &m, &m, Some(1.0)).unwrap();
        assert_eq!(set.records.len(), 3);
        for r in &set.records {
            for v in r.values {
                assert!((v - 1.0).abs() < 1e-12);
            }
            assert_eq!(r.mean_term, 0.0);
        }
        assert!(set.sup().is_sup());
    }

    #[test]
    fn scaled_kernel_ratios() {
        let k = kernel(1.0, 0.5, 1.0);
        let t = GaussianModel::centered("t", k.clone());
        let w = GaussianModel::centered("w", Arc::new(ScaledKernel::new(4.0, k).unwrap()));
        let set = efficiency_ratios(&line(&[0.1, 0.4, 0.8]), &points(&[0.25, 0.6]), &t, &w, Some(4.0)).unwrap();
        for r in &set.records {
            assert!((r.r_var(1) - 1.0).abs() < 1e-12);
            assert!((r.r_var(2) - 1.0).abs() < 1e-12);
            assert!((r.r_var(3) - 4.0).abs() < 1e-12);
            assert!((r.r_var(4) - 0.25).abs() < 1e-12);
            assert!(r.abs_dev.iter().all(|d| d.unwrap() < 1e-12));
        }
    }

    #[test]
    fn mean_term_one_site_closed_form() {
        let k = kernel(1.0, 0.5, 1.0);
        let d: f64 = 0.3;
        let delta = 1.7;
        let t = GaussianModel::centered("t", k.clone());
        let w = GaussianModel::new("w", MeanConfig::Constant { value: delta }.build().unwrap(), k);
        let got = mean_term(&line(&[0.2]), &TargetFunctional::point("x", vec![0.2 + d]), &t, &w).unwrap();
        let e = (-d).exp();
        assert!((got - delta * delta * (1.0 - e) / (1.0 + e)).abs() < 1e-12);
    }

    #[test]
    fn coincident_target_is_excluded_not_dropped_silently() {
        let m = GaussianModel::centered("m", kernel(1.0, 0.5, 1.0));
        let set = efficiency_ratios(&line(&[0.1, 0.4]), &points(&[0.4, 0.7]), &m, &m, None).unwrap();
        assert_eq!(set.excluded.len(), 1);
        assert_eq!(set.excluded[0].target_id, "t0");
        assert_eq!(set.records.len(), 2);
        assert!(efficiency_ratios(&line(&[0.4]), &points(&[0.4]), &m, &m, None).is_err());
    }

    #[test]
    fn sup_takes_largest_deviation() {
        let t = GaussianModel::centered("t", kernel(1.0, 0.5, 1.0));
        let w = GaussianModel::centered("w", kernel(2.0, 0.5, 0.5));
        let set = efficiency_ratios(
            &line(&[0.1, 0.5, 0.9]),
            &points(&[0.05, 0.3, 0.55, 0.97]),
            &t,
            &w,
            Some(2.0),
        )
        .unwrap();
        let sup = set.sup();
        for i in 0..8 {
            let max = set.records[..4]
                .iter()
                .map(|r| r.abs_dev[i].unwrap())
                .fold(0.0, f64::max);
            assert_eq!(sup.abs_dev[i], Some(max));
        }
        assert!(invariant_violation(&set.records) < 1e-12);
    }

    #[test]
    fn no_limit_reports_raw_max() {
        let t = GaussianModel::centered("t", kernel(1.0, 0.5, 1.0));
        let w = GaussianModel::centered("w", kernel(1.0, 1.5, 1.0));
        let set = efficiency_ratios(&line(&[0.1, 0.5, 0.9]), &points(&[0.3, 0.7]), &t, &w, None).unwrap();
        let sup = set.sup();
        assert!(sup.limits.iter().all(Option::is_none));
        let max = set.records[..2].iter().map(|r| r.r_var(1)).fold(0.0, f64::max);
        assert_eq!(sup.r_var(1), max);
    }
}
