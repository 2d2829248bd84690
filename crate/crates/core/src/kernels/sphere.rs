//! Isotropic covariances on S^2 given as Legendre series.
//!
//! Both models share the real spherical harmonics as eigenfunctions; the
//! eigenvalue of degree `l` is `4 pi c_l / (2l + 1)` where `c_l` is the
//! coefficient of `P_l(<x, x'>)` in the series.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{dot, norm, Basis, CovarianceKernel, Domain, EigenSequence, SPHERE_UNIT_TOL};
use crate::error::{ensure_positive, Error, Result};
use crate::special::legendre_series;

pub const DEFAULT_SPHERE_DEGREE: usize = 256;

fn default_degree() -> usize {
    DEFAULT_SPHERE_DEGREE
}

/// Legendre–Matérn model: `c_l = sigma1^2 / (kappa1^2 + l^2)^(nu1 + 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereLegendreParams {
    pub sigma1: f64,
    pub nu1: f64,
    pub kappa1: f64,
    #[serde(default = "default_degree")]
    pub l_max: usize,
}

/// SPDE Matérn model on S^2:
/// `c_l = tau^-2 (2l + 1) / (4 pi (kappa^2 + l(l+1))^(nu + 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSpdeParams {
    pub tau: f64,
    pub nu: f64,
    pub kappa: f64,
    #[serde(default = "default_degree")]
    pub l_max: usize,
}

impl SphereLegendreParams {
    pub fn new(sigma1: f64, nu1: f64, kappa1: f64, l_max: usize) -> Result<Self> {
        let p = Self {
            sigma1,
            nu1,
            kappa1,
            l_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("sigma1", self.sigma1)?;
        ensure_positive("nu1", self.nu1)?;
        ensure_positive("kappa1", self.kappa1)?;
        ensure_degree(self.l_max)
    }

    /// Coefficient of `P_l` in the series.
    pub fn coefficient(&self, l: usize) -> f64 {
        let l = l as f64;
        self.sigma1 * self.sigma1 * (self.kappa1 * self.kappa1 + l * l).powf(-(self.nu1 + 0.5))
    }

    /// Eigenvalue of every degree-`l` harmonic.
    pub fn eigenvalue(&self, l: usize) -> f64 {
        4.0 * PI * self.coefficient(l) / (2.0 * l as f64 + 1.0)
    }

    /// Upper bound on `sum_{l > l_max} c_l`, from
    /// `c_l <= sigma1^2 l^(-2 nu1 - 1)` and an integral comparison.
    pub fn tail_bound(&self, l_max: usize) -> f64 {
        let l = l_max.max(1) as f64;
        self.sigma1 * self.sigma1 * l.powf(-2.0 * self.nu1) / (2.0 * self.nu1)
    }

    pub fn degree_for_tolerance(&self, rel_tol: f64) -> usize {
        degree_for(
            rel_tol,
            |l| self.tail_bound(l),
            |l| (0..=l).map(|j| self.coefficient(j)).sum(),
        )
    }

    pub fn eigen_sequence(&self, l_max: usize) -> Result<EigenSequence> {
        expand(l_max, |l| self.eigenvalue(l), "legendre_matern")
    }
}

impl SphereSpdeParams {
    pub fn new(tau: f64, nu: f64, kappa: f64, l_max: usize) -> Result<Self> {
        let p = Self { tau, nu, kappa, l_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("tau", self.tau)?;
        ensure_positive("nu", self.nu)?;
        ensure_positive("kappa", self.kappa)?;
        ensure_degree(self.l_max)
    }

    pub fn eigenvalue(&self, l: usize) -> f64 {
        let l = l as f64;
        (self.kappa * self.kappa + l * (l + 1.0)).powf(-(self.nu + 1.0)) / (self.tau * self.tau)
    }

    pub fn coefficient(&self, l: usize) -> f64 {
        self.eigenvalue(l) * (2.0 * l as f64 + 1.0) / (4.0 * PI)
    }

    /// `sum_{l > l_max} c_l <= int_{l_max}^inf c(t) dt`, which integrates in
    /// closed form because `d/dt (kappa^2 + t(t+1)) = 2t + 1`.
    pub fn tail_bound(&self, l_max: usize) -> f64 {
        let l = l_max as f64;
        (self.kappa * self.kappa + l * (l + 1.0)).powf(-self.nu) / (4.0 * PI * self.nu * self.tau * self.tau)
    }

    pub fn degree_for_tolerance(&self, rel_tol: f64) -> usize {
        degree_for(
            rel_tol,
            |l| self.tail_bound(l),
            |l| (0..=l).map(|j| self.coefficient(j)).sum(),
        )
    }

    pub fn eigen_sequence(&self, l_max: usize) -> Result<EigenSequence> {
        expand(l_max, |l| self.eigenvalue(l), "sphere_spde")
    }
}

fn ensure_degree(l_max: usize) -> Result<()> {
    if l_max == 0 {
        Err(Error::InvalidParameter("l_max must be >= 1".into()))
    } else {
        Ok(())
    }
}

// smallest power-of-two-refined degree whose tail bound is below
// rel_tol times the truncated diagonal
fn degree_for(rel_tol: f64, tail: impl Fn(usize) -> f64, diag: impl Fn(usize) -> f64) -> usize {
    let mut hi = 1usize;
    while tail(hi) >= rel_tol * diag(hi) {
        hi *= 2;
        if hi > 1 << 30 {
            return hi;
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if tail(mid) < rel_tol * diag(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn expand(l_max: usize, eig: impl Fn(usize) -> f64, label: &str) -> Result<EigenSequence> {
    let mut values = Vec::with_capacity((l_max + 1) * (l_max + 1));
    for l in 0..=l_max {
        let v = eig(l);
        values.extend(std::iter::repeat_n(v, 2 * l + 1));
    }
    EigenSequence::new(values, format!("{label}(L={l_max})"))
}

fn check_unit(x: &[f64]) -> Result<()> {
    if x.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: x.len(),
        });
    }
    if (norm(x) - 1.0).abs() > SPHERE_UNIT_TOL {
        return Err(Error::Domain(format!("{x:?} is not a unit vector")));
    }
    Ok(())
}

fn cos_angle(x: &[f64], y: &[f64]) -> f64 {
    dot(x, y).clamp(-1.0, 1.0)
}

/// Legendre–Matérn covariance truncated at `p.l_max`.
pub fn sphere_cov_legendre_matern(x: &[f64], y: &[f64], p: &SphereLegendreParams) -> Result<f64> {
    check_unit(x)?;
    check_unit(y)?;
    p.validate()?;
    Ok(LegendreMaternKernel::new(*p)?.eval(x, y))
}

/// SPDE Matérn covariance on S^2 truncated at `p.l_max`.
pub fn sphere_cov_spde(x: &[f64], y: &[f64], p: &SphereSpdeParams) -> Result<f64> {
    check_unit(x)?;
    check_unit(y)?;
    p.validate()?;
    Ok(SphereSpdeKernel::new(*p)?.eval(x, y))
}

/// Per-degree eigenvalue ratio `lambda_spde(l) / lambda_legendre(l)`.
pub fn sphere_eigen_ratio(p1: &SphereLegendreParams, p2: &SphereSpdeParams, ell: usize) -> f64 {
    let l = ell as f64;
    let num = (p1.kappa1 * p1.kappa1 + l * l).powf(p1.nu1 + 0.5) * (2.0 * l + 1.0);
    let den =
        (p2.kappa * p2.kappa + l * (l + 1.0)).powf(p2.nu + 1.0) * p2.tau * p2.tau * p1.sigma1 * p1.sigma1 * 4.0 * PI;
    num / den
}

#[derive(Debug, Clone)]
pub struct LegendreMaternKernel {
    params: SphereLegendreParams,
    coeffs: Vec<f64>,
}

impl LegendreMaternKernel {
    pub fn new(params: SphereLegendreParams) -> Result<Self> {
        params.validate()?;
        let coeffs = (0..=params.l_max).map(|l| params.coefficient(l)).collect();
        Ok(Self { params, coeffs })
    }

    pub fn params(&self) -> &SphereLegendreParams {
        &self.params
    }
}

impl CovarianceKernel for LegendreMaternKernel {
    fn name(&self) -> String {
        let p = &self.params;
        format!(
            "legendre_matern(sigma1={},nu1={},kappa1={},L={})",
            p.sigma1, p.nu1, p.kappa1, p.l_max
        )
    }

    fn domain(&self) -> &Domain {
        &Domain::Sphere
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        legendre_series(&self.coeffs, cos_angle(x, y))
    }

    fn eigen_basis(&self) -> Option<Basis> {
        Some(Basis::SphericalHarmonics)
    }

    fn eigen_sequence(&self, resolution: usize) -> Result<EigenSequence> {
        self.params.eigen_sequence(resolution)
    }
}

#[derive(Debug, Clone)]
pub struct SphereSpdeKernel {
    params: SphereSpdeParams,
    coeffs: Vec<f64>,
}

impl SphereSpdeKernel {
    pub fn new(params: SphereSpdeParams) -> Result<Self> {
        params.validate()?;
        let coeffs = (0..=params.l_max).map(|l| params.coefficient(l)).collect();
        Ok(Self { params, coeffs })
    }

    pub fn params(&self) -> &SphereSpdeParams {
        &self.params
    }
}

impl CovarianceKernel for SphereSpdeKernel {
    fn name(&self) -> String {
        let p = &self.params;
        format!("sphere_spde(tau={},nu={},kappa={},L={})", p.tau, p.nu, p.kappa, p.l_max)
    }

    fn domain(&self) -> &Domain {
        &Domain::Sphere
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        legendre_series(&self.coeffs, cos_angle(x, y))
    }

    fn eigen_basis(&self) -> Option<Basis> {
        Some(Basis::SphericalHarmonics)
    }

    fn eigen_sequence(&self, resolution: usize) -> Result<EigenSequence> {
        self.params.eigen_sequence(resolution)
    }
}
