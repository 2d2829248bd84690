use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{dot, euclidean, AnalyticLimit, CovarianceKernel, Domain, SpectralDensity};
use crate::error::{ensure_positive, Error, Result};
use crate::special::{bessel_k_scaled, ln_gamma};

/// Matérn parameters: marginal scale `sigma`, smoothness `nu`, inverse range
/// `kappa` and ambient dimension `dim` (used by the spectral density).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaternParams {
    pub sigma: f64,
    pub nu: f64,
    pub kappa: f64,
    #[serde(default = "one")]
    pub dim: usize,
}

fn one() -> usize {
    1
}

impl MaternParams {
    pub fn new(sigma: f64, nu: f64, kappa: f64, dim: usize) -> Result<Self> {
        let p = Self { sigma, nu, kappa, dim };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("sigma", self.sigma)?;
        ensure_positive("nu", self.nu)?;
        ensure_positive("kappa", self.kappa)?;
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        Ok(())
    }

    /// `sigma^2 kappa^(2 nu)`, the parameter identifiable under infill.
    pub fn microergodic(&self) -> f64 {
        self.sigma * self.sigma * self.kappa.powf(2.0 * self.nu)
    }
}

/// Matérn covariance at distance `r`.
///
/// `rho(r) = sigma^2 / (2^(nu-1) Gamma(nu)) (kappa r)^nu K_nu(kappa r)`, with
/// the limit `sigma^2` returned at `r = 0`.
pub fn matern_cov(r: f64, p: &MaternParams) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("distance must be non-negative, got {r}")));
    }
    Ok(matern_unchecked(r, p))
}

pub(crate) fn matern_unchecked(r: f64, p: &MaternParams) -> f64 {
    let var = p.sigma * p.sigma;
    let x = p.kappa * r;
    if x == 0.0 {
        return var;
    }
    match bessel_k_scaled(p.nu, x) {
        Ok(ks) => {
            let log_scale = (1.0 - p.nu) * std::f64::consts::LN_2 - ln_gamma(p.nu);
            let log_tail = p.nu * x.ln() - x + ks.ln();
            (var * (log_scale + log_tail).exp()).min(var)
        }
        // K_nu overflows only where (kappa r)^nu K_nu is at its r -> 0 limit
        Err(_) => var,
    }
}

/// Matérn spectral density on R^d,
/// `Gamma(nu + d/2) / (Gamma(nu) pi^(d/2)) sigma^2 kappa^(2nu) / (kappa^2 + |omega|^2)^(nu + d/2)`.
pub fn matern_spectral_density(omega: &[f64], p: &MaternParams) -> Result<f64> {
    if omega.len() != p.dim {
        return Err(Error::DimensionMismatch {
            expected: p.dim,
            got: omega.len(),
        });
    }
    let half_d = p.dim as f64 / 2.0;
    let w2 = dot(omega, omega);
    let log_f =
        ln_gamma(p.nu + half_d) - ln_gamma(p.nu) - half_d * PI.ln() + 2.0 * p.sigma.ln() + 2.0 * p.nu * p.kappa.ln()
            - (p.nu + half_d) * (p.kappa * p.kappa + w2).ln();
    Ok(log_f.exp())
}

/// Behaviour of `f~/f` as `|omega| -> infinity` for two Matérn densities.
pub fn matern_ratio_limit(p: &MaternParams, p_tilde: &MaternParams) -> Result<AnalyticLimit> {
    if p.dim != p_tilde.dim {
        return Err(Error::DimensionMismatch {
            expected: p.dim,
            got: p_tilde.dim,
        });
    }
    let rel = (p_tilde.nu - p.nu) / p.nu;
    Ok(if rel.abs() <= 1e-12 {
        let a = p_tilde.sigma * p_tilde.sigma * p_tilde.kappa.powf(2.0 * p.nu)
            / (p.sigma * p.sigma * p.kappa.powf(2.0 * p.nu));
        AnalyticLimit::Converges(a)
    } else if p_tilde.nu < p.nu {
        AnalyticLimit::DivergesToInfinity
    } else {
        AnalyticLimit::DivergesToZero
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternSpectralDensity(pub MaternParams);

impl SpectralDensity for MaternSpectralDensity {
    fn name(&self) -> String {
        let p = &self.0;
        format!("matern_sd(sigma={},nu={},kappa={},d={})", p.sigma, p.nu, p.kappa, p.dim)
    }

    fn dim(&self) -> usize {
        self.0.dim
    }

    fn eval(&self, omega: &[f64]) -> Result<f64> {
        matern_spectral_density(omega, &self.0)
    }
}

/// Matérn kernel of the Euclidean distance on a box in R^d.
#[derive(Debug, Clone)]
pub struct MaternKernel {
    params: MaternParams,
    domain: Domain,
}

impl MaternKernel {
    /// Matérn kernel on the unit box `[0,1]^dim`.
    pub fn new(params: MaternParams) -> Result<Self> {
        params.validate()?;
        let domain = Domain::Box {
            lo: vec![0.0; params.dim],
            hi: vec![1.0; params.dim],
        };
        Ok(Self { params, domain })
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        domain.validate()?;
        match &domain {
            Domain::Box { lo, .. } if lo.len() == self.params.dim => {}
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "Matérn kernel with dim {} needs a box domain of that dimension",
                    self.params.dim
                )))
            }
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn params(&self) -> &MaternParams {
        &self.params
    }
}

impl CovarianceKernel for MaternKernel {
    fn name(&self) -> String {
        let p = &self.params;
        format!("matern(sigma={},nu={},kappa={})", p.sigma, p.nu, p.kappa)
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        matern_unchecked(euclidean(x, y), &self.params)
    }

    fn spectral_density(&self) -> Option<Arc<dyn SpectralDensity>> {
        Some(Arc::new(MaternSpectralDensity(self.params)))
    }
}

/// Matérn kernel of the chordal distance `|x - x'|` on S^2.
#[derive(Debug, Clone)]
pub struct ChordalMaternKernel {
    params: MaternParams,
}

impl ChordalMaternKernel {
    pub fn new(sigma: f64, nu: f64, kappa: f64) -> Result<Self> {
        Ok(Self {
            params: MaternParams::new(sigma, nu, kappa, 3)?,
        })
    }
}

impl CovarianceKernel for ChordalMaternKernel {
    fn name(&self) -> String {
        let p = &self.params;
        format!("chordal_matern(sigma={},nu={},kappa={})", p.sigma, p.nu, p.kappa)
    }

    fn domain(&self) -> &Domain {
        &Domain::Sphere
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        matern_unchecked(euclidean(x, y), &self.params)
    }
}

/// Matérn kernel of the great-circle distance on S^2. Only positive
/// definite for `nu <= 1/2`, which is enforced.
#[derive(Debug, Clone)]
pub struct GreatCircleMaternKernel {
    params: MaternParams,
}

impl GreatCircleMaternKernel {
    pub fn new(sigma: f64, nu: f64, kappa: f64) -> Result<Self> {
        let params = MaternParams::new(sigma, nu, kappa, 3)?;
        if nu > 0.5 {
            return Err(Error::InvalidParameter(format!(
                "great-circle Matérn is not positive definite for nu > 1/2 (got {nu})"
            )));
        }
        Ok(Self { params })
    }
}

impl CovarianceKernel for GreatCircleMaternKernel {
    fn name(&self) -> String {
        let p = &self.params;
        format!("great_circle_matern(sigma={},nu={},kappa={})", p.sigma, p.nu, p.kappa)
    }

    fn domain(&self) -> &Domain {
        &Domain::Sphere
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let angle = dot(x, y).clamp(-1.0, 1.0).acos();
        matern_unchecked(angle, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(sigma: f64, nu: f64, kappa: f64) -> MaternParams {
        MaternParams::new(sigma, nu, kappa, 1).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(matern_cov(0.0, &p(2.0, 0.7, 3.0)).unwrap(), 4.0);
        let v = matern_cov(1.0, &p(1.0, 0.5, 1.0)).unwrap();
        assert!((v - 0.367_879_441_2).abs() < 1e-10);
        let v = matern_cov(0.5, &p(1.0, 1.5, 2.0)).unwrap();
        assert!((v - 0.735_758_882_3).abs() < 1e-10);
        assert!(matern_cov(-1.0, &p(1.0, 1.5, 2.0)).is_err());
    }

    #[test]
    fn tiny_distances_stay_at_the_limit() {
        let q = p(1.3, 9.5, 2.0);
        let v = matern_cov(1e-200, &q).unwrap();
        assert!((v - 1.69).abs() < 1e-14);
        assert!(matern_cov(1e-3, &q).unwrap() <= 1.69);
    }

    #[test]
    fn spectral_examples() {
        let f = matern_spectral_density(&[0.0], &p(1.0, 0.5, 1.0)).unwrap();
        assert!((f - 1.0 / PI).abs() < 1e-12);
        let base = p(1.0, 1.2, 0.8);
        let doubled = p(2.0, 1.2, 0.8);
        for &w in &[0.0, 0.3, 4.0, 50.0] {
            let a = matern_spectral_density(&[w], &base).unwrap();
            let b = matern_spectral_density(&[w], &doubled).unwrap();
            assert!((b / a - 4.0).abs() < 1e-12);
            let c = a * (0.64 + w * w).powf(1.7);
            let c0 = matern_spectral_density(&[0.0], &base).unwrap() * 0.64f64.powf(1.7);
            assert!((c / c0 - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            matern_spectral_density(&[0.0, 1.0], &base),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ratio_limits() {
        let a = matern_ratio_limit(&p(1.0, 0.5, 1.0), &p(2.0, 0.5, 0.5)).unwrap();
        match a {
            AnalyticLimit::Converges(v) => assert!((v - 2.0).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            matern_ratio_limit(&p(1.0, 0.7, 1.0), &p(1.0, 0.7, 1.0)).unwrap(),
            AnalyticLimit::Converges(1.0)
        );
        assert_eq!(
            matern_ratio_limit(&p(1.0, 0.5, 1.0), &p(1.0, 1.5, 1.0)).unwrap(),
            AnalyticLimit::DivergesToZero
        );
        assert_eq!(
            matern_ratio_limit(&p(1.0, 1.5, 1.0), &p(1.0, 0.5, 1.0)).unwrap(),
            AnalyticLimit::DivergesToInfinity
        );
    }

    #[test]
    fn great_circle_enforces_smoothness_bound() {
        assert!(GreatCircleMaternKernel::new(1.0, 0.5, 1.0).is_ok());
        assert!(GreatCircleMaternKernel::new(1.0, 0.51, 1.0).is_err());
    }

    #[test]
    fn sphere_variants_are_symmetric() {
        let x = [0.0, 0.6, 0.8];
        let y = [1.0, 0.0, 0.0];
        let c = ChordalMaternKernel::new(1.0, 1.5, 2.0).unwrap();
        let g = GreatCircleMaternKernel::new(1.0, 0.5, 2.0).unwrap();
        assert_eq!(c.eval(&x, &y), c.eval(&y, &x));
        assert_eq!(g.eval(&x, &y), g.eval(&y, &x));
        assert!((c.eval(&x, &x) - 1.0).abs() < 1e-15);
        // great-circle exponential at a right angle
        assert!((g.eval(&x, &y) - (-PI).exp()).abs() < 1e-12);
    }
}
