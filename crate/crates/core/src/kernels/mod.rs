//! Covariance families, spectral densities and eigenvalue sequences.
//!
//! Every family implements [`CovarianceKernel`]; families are registered by
//! name in [`KernelRegistry`] so that configurations can select them at
//! runtime.

mod matern;
mod periodic;
mod registry;
mod sphere;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use matern::{
    matern_cov, matern_ratio_limit, matern_spectral_density, ChordalMaternKernel, GreatCircleMaternKernel,
    MaternKernel, MaternParams, MaternSpectralDensity,
};
pub use periodic::{lattice_shells, periodic_cov, PeriodicKernel, PeriodicSpectrum, SpectrumFamily};
pub use registry::{KernelConfig, KernelFactory, KernelRegistry};
pub use sphere::{
    sphere_cov_legendre_matern, sphere_cov_spde, sphere_eigen_ratio, LegendreMaternKernel, SphereLegendreParams,
    SphereSpdeKernel, SphereSpdeParams, DEFAULT_SPHERE_DEGREE,
};

/// Tolerance on `|x| = 1` for points of the unit sphere.
pub const SPHERE_UNIT_TOL: f64 = 1e-10;

/// Where a kernel lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    /// Axis-aligned box in R^d with the Euclidean metric.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// The torus [0,1]^d, differences taken modulo 1.
    Torus { dim: usize },
    /// The unit sphere in R^3 with the great-circle metric.
    Sphere,
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain::Box {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    pub fn unit_interval() -> Self {
        Self::interval(0.0, 1.0)
    }

    /// Ambient coordinate dimension of a point.
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Torus { dim } => *dim,
            Domain::Sphere => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::InvalidParameter(
                        "box bounds must be non-empty and of equal length".into(),
                    ));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::InvalidParameter(
                        "box requires lo < hi in every coordinate".into(),
                    ));
                }
                Ok(())
            }
            Domain::Torus { dim } if *dim == 0 => Err(Error::InvalidParameter("torus dimension must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite point {p:?}")));
        }
        let inside = match self {
            Domain::Box { lo, hi } => p.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b),
            Domain::Torus { .. } => p.iter().all(|v| (0.0..=1.0).contains(v)),
            Domain::Sphere => (norm(p) - 1.0).abs() <= SPHERE_UNIT_TOL,
        };
        if inside {
            Ok(())
        } else {
            Err(Error::Domain(format!("point {p:?} lies outside {self:?}")))
        }
    }

    /// The metric of the domain.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Domain::Box { .. } => euclidean(a, b),
            Domain::Torus { .. } => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = (x - y).abs().rem_euclid(1.0);
                    let d = d.min(1.0 - d);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Domain::Sphere => dot(a, b).clamp(-1.0, 1.0).acos(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A covariance function `rho(x, x')` on a domain.
///
/// Implementations must be symmetric bit-for-bit and strictly positive on
/// the diagonal. Positive definiteness of generated Gram matrices is checked
/// when they are factorized.
pub trait CovarianceKernel: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn domain(&self) -> &Domain;

    fn eval(&self, x: &[f64], y: &[f64]) -> f64;

    /// Spectral density of the stationary kernel on R^d, when one exists.
    fn spectral_density(&self) -> Option<Arc<dyn SpectralDensity>> {
        None
    }

    /// Orthonormal eigenbasis of the covariance operator, when known in
    /// closed form.
    fn eigen_basis(&self) -> Option<Basis> {
        None
    }

    /// Eigenvalues in the documented order of [`eigen_basis`](Self::eigen_basis),
    /// up to `resolution` (lattice shell for Fourier bases, degree for
    /// spherical harmonics).
    fn eigen_sequence(&self, _resolution: usize) -> Result<EigenSequence> {
        Err(Error::InvalidParameter(format!(
            "kernel {} has no closed-form eigen decomposition",
            self.name()
        )))
    }
}

/// Spectral density `f(omega)` of a stationary kernel on R^d.
pub trait SpectralDensity: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn eval(&self, omega: &[f64]) -> Result<f64>;
}

/// Known closed-form eigenbases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `1, sqrt2 cos(2 pi k.x), sqrt2 sin(2 pi k.x)` on the torus.
    Fourier { dim: usize },
    /// Real spherical harmonics on S^2.
    SphericalHarmonics,
}

/// Positive eigenvalues of a covariance operator in a fixed index order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSequence {
    pub values: Vec<f64>,
    pub label: String,
}

impl EigenSequence {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eigen sequence `{label}` has non-positive entry {v} at index {j}"
            )));
        }
        Ok(Self { values, label })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A model whose eigenvalues are known analytically.
#[derive(Debug, Clone, Copy)]
pub enum EigenModel<'a> {
    Periodic(&'a PeriodicSpectrum),
    SphereLegendre(&'a SphereLegendreParams),
    SphereSpde(&'a SphereSpdeParams),
}

/// Eigenvalues with multiplicities expanded.
///
/// Periodic spectra are listed over lattice indices by max-norm shell up to
/// the spectrum's truncation, then by `|k_i|` with positive before negative
/// in each coordinate (so `0, +1, -1, +2, -2, ...` in one dimension). Sphere
/// models list degree `l` repeated `2l + 1` times for `l <= L_max`.
pub fn eigen_sequence_of(model: EigenModel<'_>) -> Result<EigenSequence> {
    match model {
        EigenModel::Periodic(s) => s.eigen_sequence(s.truncation()),
        EigenModel::SphereLegendre(p) => p.eigen_sequence(p.l_max),
        EigenModel::SphereSpde(p) => p.eigen_sequence(p.l_max),
    }
}

/// Behaviour of `f~(omega)/f(omega)` (or an eigenvalue ratio) at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "a", rename_all = "snake_case")]
pub enum AnalyticLimit {
    Converges(f64),
    DivergesToZero,
    DivergesToInfinity,
}

/// `c * rho` for a positive constant `c`.
#[derive(Debug, Clone)]
pub struct ScaledKernel {
    factor: f64,
    inner: Arc<dyn CovarianceKernel>,
}

impl ScaledKernel {
    pub fn new(factor: f64, inner: Arc<dyn CovarianceKernel>) -> Result<Self> {
        crate::error::ensure_positive("scale factor", factor)?;
        Ok(Self { factor, inner })
    }
}

impl CovarianceKernel for ScaledKernel {
    fn name(&self) -> String {
        format!("{}*{}", self.factor, self.inner.name())
    }

    fn domain(&self) -> &Domain {
        self.inner.domain()
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.factor * self.inner.eval(x, y)
    }

    fn spectral_density(&self) -> Option<Arc<dyn SpectralDensity>> {
        self.inner.spectral_density().map(|inner| {
            Arc::new(ScaledSpectralDensity {
                factor: self.factor,
                inner,
            }) as Arc<dyn SpectralDensity>
        })
    }

    fn eigen_basis(&self) -> Option<Basis> {
        self.inner.eigen_basis()
    }

    fn eigen_sequence(&self, resolution: usize) -> Result<EigenSequence> {
        let inner = self.inner.eigen_sequence(resolution)?;
        EigenSequence::new(
            inner.values.iter().map(|v| v * self.factor).collect(),
            format!("{}*{}", self.factor, inner.label),
        )
    }
}

#[derive(Debug, Clone)]
struct ScaledSpectralDensity {
    factor: f64,
    inner: Arc<dyn SpectralDensity>,
}

impl SpectralDensity for ScaledSpectralDensity {
    fn name(&self) -> String {
        format!("{}*{}", self.factor, self.inner.name())
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, omega: &[f64]) -> Result<f64> {
        Ok(self.factor * self.inner.eval(omega)?)
    }
}
