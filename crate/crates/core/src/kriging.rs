//! Kriging predictors and the exact error moments of linear predictors.
//!
//! A target is a linear functional `h = a0 + sum_l b_l Z(t_l)`. Under a
//! model `(m, rho)` and design `x_1..x_n` the kriging predictor of `h` is
//! `intercept + w^T Z_n` with `Sigma_n w = c_n`, `c_n[i] = sum_l b_l rho(t_l, x_i)`
//! and `intercept = a0 + sum_l b_l m(t_l) - w^T m_n`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CovarianceKernel, Domain};
use crate::linalg::{dot_compensated, sum_compensated, GramFactor, Neumaier, SymMatrix};

/// Tolerance below zero at which a computed variance is treated as a
/// numerical failure rather than rounding.
pub const NEGATIVE_VARIANCE_TOL: f64 = 1e-10;

pub trait MeanFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn eval(&self, x: &[f64]) -> f64;
}

/// Built-in mean functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum MeanConfig {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `intercept + slope . x`
    Linear {
        intercept: f64,
        slope: Vec<f64>,
    },
    /// `offset + scale |x - center|^exponent`, non-smooth at `center`.
    Kink {
        center: Vec<f64>,
        exponent: f64,
        #[serde(default = "unit")]
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl MeanConfig {
    pub fn build(&self) -> Result<Arc<dyn MeanFunction>> {
        if let MeanConfig::Kink { exponent, .. } = self {
            if !(*exponent > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "kink exponent must be positive, got {exponent}"
                )));
            }
        }
        Ok(Arc::new(self.clone()))
    }
}

impl MeanFunction for MeanConfig {
    fn name(&self) -> String {
        match self {
            MeanConfig::Zero => "zero".into(),
            MeanConfig::Constant { value } => format!("const({value})"),
            MeanConfig::Linear { intercept, slope } => format!("linear({intercept},{slope:?})"),
            MeanConfig::Kink {
                center,
                exponent,
                scale,
                offset,
            } => format!("kink({offset}+{scale}|x-{center:?}|^{exponent})"),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanConfig::Zero => 0.0,
            MeanConfig::Constant { value } => *value,
            MeanConfig::Linear { intercept, slope } => intercept + slope.iter().zip(x).map(|(s, v)| s * v).sum::<f64>(),
            MeanConfig::Kink {
                center,
                exponent,
                scale,
                offset,
            } => {
                let d = crate::kernels::euclidean(x, center);
                offset + scale * d.powf(*exponent)
            }
        }
    }
}

/// Mean function backed by a closure.
pub struct FnMean<F> {
    name: String,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnMean<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> fmt::Debug for FnMean<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMean").field("name", &self.name).finish()
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> MeanFunction for FnMean<F> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// A Gaussian model `N(m, C)`: mean function plus covariance kernel.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    pub mean: Arc<dyn MeanFunction>,
    pub kernel: Arc<dyn CovarianceKernel>,
    pub label: String,
}

impl GaussianModel {
    pub fn new(label: impl Into<String>, mean: Arc<dyn MeanFunction>, kernel: Arc<dyn CovarianceKernel>) -> Self {
        Self {
            mean,
            kernel,
            label: label.into(),
        }
    }

    /// Zero-mean model.
    pub fn centered(label: impl Into<String>, kernel: Arc<dyn CovarianceKernel>) -> Self {
        Self::new(label, Arc::new(MeanConfig::Zero), kernel)
    }

    pub fn with_mean(mut self, mean: Arc<dyn MeanFunction>) -> Self {
        self.mean = mean;
        self
    }

    pub fn domain(&self) -> &Domain {
        self.kernel.domain()
    }
}

/// Ordered, pairwise distinct observation sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    domain: Domain,
    sites: Vec<Vec<f64>>,
}

impl Design {
    pub fn new(domain: Domain, sites: Vec<Vec<f64>>) -> Result<Self> {
        domain.validate()?;
        if sites.is_empty() {
            return Err(Error::InvalidDesign("a design needs at least one site".into()));
        }
        for s in &sites {
            domain.check_point(s)?;
        }
        for i in 0..sites.len() {
            for j in 0..i {
                if !(domain.distance(&sites[i], &sites[j]) > 0.0) {
                    return Err(Error::InvalidDesign(format!(
                        "sites {j} and {i} coincide at {:?}",
                        sites[i]
                    )));
                }
            }
        }
        Ok(Self { domain, sites })
    }

    /// One-dimensional convenience constructor.
    pub fn on_line(domain: Domain, xs: &[f64]) -> Result<Self> {
        Self::new(domain, xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Vec<f64>] {
        &self.sites
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.sites.len() {
            for j in 0..i {
                best = best.min(self.domain.distance(&self.sites[i], &self.sites[j]));
            }
        }
        best
    }

    /// Distance from `x` to the nearest site.
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        self.sites
            .iter()
            .map(|s| self.domain.distance(s, x))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `h = intercept + sum_l coeff_l Z(t_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFunctional {
    pub id: String,
    pub intercept: f64,
    pub terms: Vec<(Vec<f64>, f64)>,
}

impl TargetFunctional {
    pub fn new(id: impl Into<String>, intercept: f64, terms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let t = Self {
            id: id.into(),
            intercept,
            terms,
        };
        if !t.terms.iter().any(|(_, b)| *b != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "target `{}` needs at least one nonzero site coefficient",
                t.id
            )));
        }
        Ok(t)
    }

    /// Point evaluation `Z(x)`.
    pub fn point(id: impl Into<String>, x: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            intercept: 0.0,
            terms: vec![(x, 1.0)],
        }
    }

    fn mean_value(&self, mean: &dyn MeanFunction) -> f64 {
        self.intercept + sum_compensated(self.terms.iter().map(|(t, b)| b * mean.eval(t)))
    }

    fn covariance_with(&self, kernel: &dyn CovarianceKernel, x: &[f64]) -> f64 {
        sum_compensated(self.terms.iter().map(|(t, b)| b * kernel.eval(t, x)))
    }

    fn self_covariance(&self, kernel: &dyn CovarianceKernel) -> f64 {
        let mut acc = Neumaier::default();
        for (t, b) in &self.terms {
            for (s, c) in &self.terms {
                acc.add(b * c * kernel.eval(t, s));
            }
        }
        acc.total()
    }
}

/// `intercept + w^T Z_n` on a design.
#[derive(Debug, Clone)]
pub struct LinearPredictor {
    pub design: Arc<Design>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub built_under: String,
}

impl LinearPredictor {
    pub fn new(design: Arc<Design>, weights: Vec<f64>, intercept: f64, built_under: impl Into<String>) -> Result<Self> {
        if weights.len() != design.len() {
            return Err(Error::DimensionMismatch {
                expected: design.len(),
                got: weights.len(),
            });
        }
        if weights
            .iter()
            .chain(std::iter::once(&intercept))
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numerical("predictor has non-finite coefficients".into()));
        }
        Ok(Self {
            design,
            weights,
            intercept,
            built_under: built_under.into(),
        })
    }

    /// Prediction from observed values at the design sites.
    pub fn predict(&self, observations: &[f64]) -> f64 {
        self.intercept + dot_compensated(&self.weights, observations)
    }
}

/// Mean, variance and second moment of a prediction error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMoments {
    pub mean: f64,
    pub variance: f64,
    pub second_moment: f64,
}

/// Gram matrix of `kernel` on the design and its Cholesky factor.
pub fn build_gram(design: &Design, kernel: &dyn CovarianceKernel) -> Result<(SymMatrix, GramFactor)> {
    let sites = design.sites();
    let gram = SymMatrix::from_fn(sites.len(), |i, j| kernel.eval(&sites[i], &sites[j]));
    let factor = GramFactor::new(&gram)?;
    Ok((gram, factor))
}

/// Factorized kriging system for one design and one model; builds
/// predictors for any number of targets.
#[derive(Debug, Clone)]
pub struct Kriger {
    design: Arc<Design>,
    model: GaussianModel,
    gram: SymMatrix,
    factor: GramFactor,
    mean_at_sites: Vec<f64>,
}

impl Kriger {
    pub fn new(design: Arc<Design>, model: GaussianModel) -> Result<Self> {
        check_domains(&design, &model)?;
        let (gram, factor) = build_gram(&design, model.kernel.as_ref())?;
        let mean_at_sites = design.sites().iter().map(|s| model.mean.eval(s)).collect();
        Ok(Self {
            design,
            model,
            gram,
            factor,
            mean_at_sites,
        })
    }

    pub fn factor(&self) -> &GramFactor {
        &self.factor
    }

    pub fn model(&self) -> &GaussianModel {
        &self.model
    }

    /// Moment evaluator under the same model, reusing the Gram matrix.
    pub fn evaluator(&self) -> MomentEvaluator {
        MomentEvaluator {
            design: self.design.clone(),
            model: self.model.clone(),
            gram: self.gram.clone(),
            mean_at_sites: self.mean_at_sites.clone(),
        }
    }

    pub fn predictor(&self, target: &TargetFunctional) -> Result<LinearPredictor> {
        check_target(&self.design, target)?;
        let kernel = self.model.kernel.as_ref();
        let c: Vec<f64> = self
            .design
            .sites()
            .iter()
            .map(|x| target.covariance_with(kernel, x))
            .collect();
        let weights = self.factor.solve(&c);
        let intercept = target.mean_value(self.model.mean.as_ref()) - dot_compensated(&weights, &self.mean_at_sites);
        LinearPredictor::new(self.design.clone(), weights, intercept, self.model.label.clone())
    }
}

fn check_domains(design: &Design, model: &GaussianModel) -> Result<()> {
    if design.domain() != model.domain() {
        return Err(Error::InvalidParameter(format!(
            "design domain {:?} differs from the domain of model `{}` ({:?})",
            design.domain(),
            model.label,
            model.domain()
        )));
    }
    Ok(())
}

fn check_target(design: &Design, target: &TargetFunctional) -> Result<()> {
    if !target.terms.iter().any(|(_, b)| *b != 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target `{}` has no nonzero coefficient",
            target.id
        )));
    }
    for (t, _) in &target.terms {
        design.domain().check_point(t)?;
    }
    Ok(())
}

/// Kriging predictor of `target` under `model`.
pub fn kriging_predictor(target: &TargetFunctional, design: &Design, model: &GaussianModel) -> Result<LinearPredictor> {
    Kriger::new(Arc::new(design.clone()), model.clone())?.predictor(target)
}

/// Evaluates error moments of predictors on one design under one model.
#[derive(Debug, Clone)]
pub struct MomentEvaluator {
    design: Arc<Design>,
    model: GaussianModel,
    gram: SymMatrix,
    mean_at_sites: Vec<f64>,
}

impl MomentEvaluator {
    pub fn new(design: Arc<Design>, model: GaussianModel) -> Result<Self> {
        check_domains(&design, &model)?;
        let sites = design.sites();
        let kernel = model.kernel.as_ref();
        let gram = SymMatrix::from_fn(sites.len(), |i, j| kernel.eval(&sites[i], &sites[j]));
        let mean_at_sites = sites.iter().map(|s| model.mean.eval(s)).collect();
        Ok(Self {
            design,
            model,
            gram,
            mean_at_sites,
        })
    }

    pub fn moments(&self, pred: &LinearPredictor, target: &TargetFunctional) -> Result<ErrorMoments> {
        if pred.design.as_ref() != self.design.as_ref() {
            return Err(Error::InvalidParameter(
                "predictor was built on a different design".into(),
            ));
        }
        check_target(&self.design, target)?;
        let kernel = self.model.kernel.as_ref();
        let w = &pred.weights;

        let mean =
            pred.intercept + dot_compensated(w, &self.mean_at_sites) - target.mean_value(self.model.mean.as_ref());

        let quad = self.gram.quadratic_form(w);
        let cross = sum_compensated(
            self.design
                .sites()
                .iter()
                .zip(w)
                .map(|(x, wi)| wi * target.covariance_with(kernel, x)),
        );
        let own = target.self_covariance(kernel);
        let variance = sum_compensated([quad, -2.0 * cross, own]);
        let scale = quad.abs().max(own.abs()).max(1.0);
        if variance < -NEGATIVE_VARIANCE_TOL * scale {
            return Err(Error::Numerical(format!(
                "negative error variance {variance:e} for target `{}` under `{}`",
                target.id, self.model.label
            )));
        }
        let variance = variance.max(0.0);
        Ok(ErrorMoments {
            mean,
            variance,
            second_moment: variance + mean * mean,
        })
    }
}

/// Moments of `prediction - target` when the field follows `eval_model`.
pub fn error_moments(
    pred: &LinearPredictor,
    target: &TargetFunctional,
    eval_model: &GaussianModel,
) -> Result<ErrorMoments> {
    MomentEvaluator::new(pred.design.clone(), eval_model.clone())?.moments(pred, target)
}

/// Seeded observation vectors for probing predictor identities.
pub fn probe_observations(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect()
}

/// Largest deviation from `h_hat(z) = h_breve(z) - E_hat[h_breve - h]` over
/// the probe observation vectors, for two models sharing one kernel.
pub fn mean_shift_identity_check(
    target: &TargetFunctional,
    design: &Design,
    model_hat: &GaussianModel,
    model_breve: &GaussianModel,
    probes: &[Vec<f64>],
) -> Result<f64> {
    if !Arc::ptr_eq(&model_hat.kernel, &model_breve.kernel) && model_hat.kernel.name() != model_breve.kernel.name() {
        return Err(Error::InvalidParameter(
            "mean-shift identity needs both models to share one kernel".into(),
        ));
    }
    let design = Arc::new(design.clone());
    let hat = Kriger::new(design.clone(), model_hat.clone())?.predictor(target)?;
    let breve = Kriger::new(design.clone(), model_breve.clone())?.predictor(target)?;
    let bias = MomentEvaluator::new(design, model_hat.clone())?
        .moments(&breve, target)?
        .mean;
    let mut worst: f64 = 0.0;
    for z in probes {
        if z.len() != hat.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: hat.weights.len(),
                got: z.len(),
            });
        }
        worst = worst.max((hat.predict(z) - (breve.predict(z) - bias)).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelConfig, KernelRegistry, ScaledKernel};

    fn exp_kernel() -> Arc<dyn CovarianceKernel> {
        KernelRegistry::with_builtins()
            .build(&KernelConfig::matern(1.0, 0.5, 1.0))
            .unwrap()
    }

    fn line(xs: &[f64]) -> Design {
        Design::on_line(Domain::unit_interval(), xs).unwrap()
    }

    #[test]
    fn design_rejects_duplicates_and_outside_points() {
        assert!(matches!(
            Design::on_line(Domain::unit_interval(), &[0.2, 0.2]),
            Err(Error::InvalidDesign(_))
        ));
        assert!(Design::on_line(Domain::unit_interval(), &[]).is_err());
        assert!(Design::on_line(Domain::unit_interval(), &[1.2]).is_err());
    }

    #[test]
    fn one_site_gram_and_predictor() {
        let k = exp_kernel();
        let (_, f) = build_gram(&line(&[0.4]), k.as_ref()).unwrap();
        assert_eq!(f.lower(0, 0), 1.0);
        assert_eq!(f.jitter(), 0.0);

        let d = 0.3;
        let model = GaussianModel::centered("exp", k);
        let target = TargetFunctional::point("t", vec![0.4 + d]);
        let p = kriging_predictor(&target, &line(&[0.4]), &model).unwrap();
        assert!((p.weights[0] - (-d).exp()).abs() < 1e-15);
        assert_eq!(p.intercept, 0.0);
        let m = error_moments(&p, &target, &model).unwrap();
        assert!(m.mean.abs() < 1e-15);
        assert!((m.variance - (1.0 - (-2.0 * d).exp())).abs() < 1e-14);
    }

    #[test]
    fn interpolation_at_a_design_site() {
        let model = GaussianModel::centered("exp", exp_kernel());
        let design = line(&[0.1, 0.35, 0.8]);
        let p = kriging_predictor(&TargetFunctional::point("t", vec![0.35]), &design, &model).unwrap();
        assert!((p.weights[1] - 1.0).abs() < 1e-12);
        assert!(p.weights[0].abs() < 1e-12 && p.weights[2].abs() < 1e-12);
        let m = error_moments(&p, &TargetFunctional::point("t", vec![0.35]), &model).unwrap();
        assert!(m.variance <= 1e-10);
    }

    #[test]
    fn scaled_kernel_gives_same_predictor_and_scaled_variance() {
        let k = exp_kernel();
        let scaled: Arc<dyn CovarianceKernel> = Arc::new(ScaledKernel::new(4.0, k.clone()).unwrap());
        let mean = MeanConfig::Constant { value: 0.7 }.build().unwrap();
        let a = GaussianModel::new("a", mean.clone(), k);
        let b = GaussianModel::new("b", mean, scaled);
        let design = line(&[0.1, 0.3, 0.6]);
        let t = TargetFunctional::point("t", vec![0.45]);
        let pa = kriging_predictor(&t, &design, &a).unwrap();
        let pb = kriging_predictor(&t, &design, &b).unwrap();
        for (x, y) in pa.weights.iter().zip(&pb.weights) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((pa.intercept - pb.intercept).abs() < 1e-12);
        let ma = error_moments(&pa, &t, &a).unwrap();
        let mb = error_moments(&pa, &t, &b).unwrap();
        assert!((mb.variance - 4.0 * ma.variance).abs() < 1e-13);
        assert_eq!(ma.mean, mb.mean);
    }

    #[test]
    fn constant_mean_shift_bias_by_hand() {
        let k = exp_kernel();
        let d = 0.25;
        let delta = 0.8;
        let build = GaussianModel::centered("m", k.clone());
        let eval = GaussianModel::new("m+delta", MeanConfig::Constant { value: delta }.build().unwrap(), k);
        let t = TargetFunctional::point("t", vec![0.5 + d]);
        let p = kriging_predictor(&t, &line(&[0.5]), &build).unwrap();
        let m = error_moments(&p, &t, &eval).unwrap();
        assert!((m.mean - delta * ((-d).exp() - 1.0)).abs() < 1e-14);
        assert!((m.second_moment - (m.variance + m.mean * m.mean)).abs() < 1e-15);
    }

    #[test]
    fn general_functional_targets() {
        let model = GaussianModel::new(
            "lin",
            MeanConfig::Linear {
                intercept: 0.2,
                slope: vec![1.5],
            }
            .build()
            .unwrap(),
            exp_kernel(),
        );
        let design = line(&[0.1, 0.2, 0.5, 0.9]);
        let t = TargetFunctional::new(
            "incr",
            0.3,
            vec![(vec![0.33], 1.0), (vec![0.41], -1.0), (vec![0.7], 0.5)],
        )
        .unwrap();
        let p = kriging_predictor(&t, &design, &model).unwrap();
        let m = error_moments(&p, &t, &model).unwrap();
        assert!(m.mean.abs() < 1e-12);
        assert!(m.variance > 0.0);
        assert!(TargetFunctional::new("zero", 1.0, vec![(vec![0.3], 0.0)]).is_err());
    }

    #[test]
    fn identity_check_rejects_different_kernels() {
        let a = GaussianModel::centered("a", exp_kernel());
        let b = GaussianModel::centered(
            "b",
            KernelRegistry::with_builtins()
                .build(&KernelConfig::matern(2.0, 0.5, 1.0))
                .unwrap(),
        );
        let r = mean_shift_identity_check(
            &TargetFunctional::point("t", vec![0.5]),
            &line(&[0.2]),
            &a,
            &b,
            &probe_observations(1, 2, 0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn fn_mean_wraps_closures() {
        let m = FnMean::new("sq", |x: &[f64]| x[0] * x[0]);
        assert_eq!(m.eval(&[3.0]), 9.0);
        assert_eq!(m.name(), "sq");
    }
}
