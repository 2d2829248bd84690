use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Basis, CovarianceKernel, Domain, EigenSequence};
use crate::error::{ensure_positive, Error, Result};

/// How the spectral mass `f(k)` of a periodic field is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumFamily {
    /// `f(k) = scale (offset + |k|^2)^(-power) (1 + tilt / (1 + |k|))`.
    Algebraic {
        scale: f64,
        #[serde(default = "one")]
        offset: f64,
        power: f64,
        #[serde(default)]
        tilt: f64,
    },
    /// Finitely many nonzero masses; every other index carries zero.
    Explicit { entries: Vec<(Vec<i64>, f64)> },
}

fn one() -> f64 {
    1.0
}

/// Spectral masses on Z^d with a max-norm truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpectrum {
    dim: usize,
    truncation: usize,
    family: SpectrumFamily,
    explicit: BTreeMap<Vec<i64>, f64>,
}

pub const DEFAULT_TRUNCATION_1D: usize = 64;
pub const DEFAULT_TRUNCATION_2D: usize = 16;

impl PeriodicSpectrum {
    pub fn new(dim: usize, truncation: usize, family: SpectrumFamily) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("spectrum dimension must be >= 1".into()));
        }
        if truncation == 0 {
            return Err(Error::InvalidParameter("spectrum truncation must be >= 1".into()));
        }
        let mut explicit = BTreeMap::new();
        match &family {
            SpectrumFamily::Algebraic {
                scale,
                offset,
                power,
                tilt,
            } => {
                ensure_positive("scale", *scale)?;
                ensure_positive("offset", *offset)?;
                ensure_positive("power", *power)?;
                if !(*tilt >= 0.0) {
                    return Err(Error::InvalidParameter(format!("tilt must be >= 0, got {tilt}")));
                }
            }
            SpectrumFamily::Explicit { entries } => {
                for (k, v) in entries {
                    if k.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: k.len(),
                        });
                    }
                    if !(*v >= 0.0) || !v.is_finite() {
                        return Err(Error::InvalidParameter(format!(
                            "spectral mass at {k:?} must be finite and >= 0, got {v}"
                        )));
                    }
                    explicit.insert(k.clone(), *v);
                }
                for (k, v) in &explicit {
                    let neg: Vec<i64> = k.iter().map(|c| -c).collect();
                    if explicit.get(&neg) != Some(v) {
                        return Err(Error::InvalidParameter(format!(
                            "spectrum must satisfy f(-k) = f(k); mismatch at {k:?}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            dim,
            truncation,
            family,
            explicit,
        })
    }

    /// One-dimensional spectrum with the default truncation.
    pub fn algebraic_1d(scale: f64, power: f64, tilt: f64) -> Result<Self> {
        Self::new(
            1,
            DEFAULT_TRUNCATION_1D,
            SpectrumFamily::Algebraic {
                scale,
                offset: 1.0,
                power,
                tilt,
            },
        )
    }

    pub fn with_truncation(mut self, truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidParameter("spectrum truncation must be >= 1".into()));
        }
        self.truncation = truncation;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn family(&self) -> &SpectrumFamily {
        &self.family
    }

    /// `f(k)`; not limited by the truncation.
    pub fn mass(&self, k: &[i64]) -> f64 {
        match &self.family {
            SpectrumFamily::Algebraic {
                scale,
                offset,
                power,
                tilt,
            } => {
                let k2: f64 = k.iter().map(|&c| (c * c) as f64).sum();
                scale * (offset + k2).powf(-power) * (1.0 + tilt / (1.0 + k2.sqrt()))
            }
            SpectrumFamily::Explicit { .. } => self.explicit.get(k).copied().unwrap_or(0.0),
        }
    }

    /// `sum_k f(k)` over retained indices, the variance `rho_0(0)`.
    pub fn total_mass(&self) -> f64 {
        lattice_shells(self.dim, self.truncation)
            .iter()
            .map(|k| self.mass(k))
            .sum()
    }

    /// Eigenvalues `f(k)` over all lattice indices up to max-norm
    /// `resolution`, in shell order. Each nonzero `k` appears together with
    /// `-k`, matching the cosine/sine pair of eigenfunctions.
    pub fn eigen_sequence(&self, resolution: usize) -> Result<EigenSequence> {
        let values = lattice_shells(self.dim, resolution)
            .iter()
            .map(|k| self.mass(k))
            .collect();
        EigenSequence::new(values, format!("periodic(d={},K={resolution})", self.dim))
    }
}

/// All `k` in Z^d with `max|k_i| <= kmax`, ordered by max-norm shell, then
/// coordinate-wise by `(|k_i|, k_i < 0)`.
pub fn lattice_shells(dim: usize, kmax: usize) -> Vec<Vec<i64>> {
    let side = 2 * kmax + 1;
    let total = side.pow(dim as u32);
    let kmax = kmax as i64;
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut k = Vec::with_capacity(dim);
        for _ in 0..dim {
            k.push((idx % side) as i64 - kmax);
            idx /= side;
        }
        k.reverse();
        out.push(k);
    }
    out.sort_by_key(|k| {
        let shell = k.iter().map(|c| c.abs()).max().unwrap_or(0);
        let coords: Vec<(i64, bool)> = k.iter().map(|&c| (c.abs(), c < 0)).collect();
        (shell, coords)
    });
    out
}

/// True when `k` is zero or its first nonzero component is positive.
fn in_half_lattice(k: &[i64]) -> bool {
    match k.iter().find(|&&c| c != 0) {
        None => true,
        Some(&c) => c > 0,
    }
}

/// Truncated `sum_k f(k) cos(2 pi k.(x - x'))`.
pub fn periodic_cov(x: &[f64], y: &[f64], s: &PeriodicSpectrum) -> Result<f64> {
    let domain = Domain::Torus { dim: s.dim };
    domain.check_point(x)?;
    domain.check_point(y)?;
    Ok(PeriodicKernel::new(s.clone()).eval(x, y))
}

/// Weakly periodic kernel on the torus [0,1]^d.
#[derive(Debug, Clone)]
pub struct PeriodicKernel {
    spectrum: PeriodicSpectrum,
    domain: Domain,
    // retained (k, weight) over the half lattice; weight is f(0) or 2 f(k)
    terms: Vec<(Vec<f64>, f64)>,
}

impl PeriodicKernel {
    pub fn new(spectrum: PeriodicSpectrum) -> Self {
        let terms = lattice_shells(spectrum.dim, spectrum.truncation)
            .into_iter()
            .filter(|k| in_half_lattice(k))
            .filter_map(|k| {
                let m = spectrum.mass(&k);
                let is_zero = k.iter().all(|&c| c == 0);
                (m > 0.0).then(|| {
                    let w = if is_zero { m } else { 2.0 * m };
                    (k.iter().map(|&c| c as f64).collect(), w)
                })
            })
            .collect();
        let domain = Domain::Torus { dim: spectrum.dim };
        Self {
            spectrum,
            domain,
            terms,
        }
    }

    pub fn spectrum(&self) -> &PeriodicSpectrum {
        &self.spectrum
    }
}

impl CovarianceKernel for PeriodicKernel {
    fn name(&self) -> String {
        format!("periodic(d={},K={})", self.spectrum.dim, self.spectrum.truncation)
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        // fixed argument order keeps the sum bitwise symmetric
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        let diff: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let d = a - b;
                d - d.round()
            })
            .collect();
        self.terms
            .iter()
            .map(|(k, w)| {
                let phase: f64 = k.iter().zip(&diff).map(|(kc, dc)| kc * dc).sum();
                w * (2.0 * PI * phase).cos()
            })
            .sum()
    }

    fn eigen_basis(&self) -> Option<Basis> {
        Some(Basis::Fourier { dim: self.spectrum.dim })
    }

    fn eigen_sequence(&self, resolution: usize) -> Result<EigenSequence> {
        self.spectrum.eigen_sequence(resolution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_term() -> PeriodicSpectrum {
        PeriodicSpectrum::new(
            1,
            4,
            SpectrumFamily::Explicit {
                entries: vec![(vec![0], 1.0), (vec![1], 0.5), (vec![-1], 0.5)],
            },
        )
        .unwrap()
    }

    #[test]
    fn examples() {
        let s = three_term();
        let v = periodic_cov(&[0.3], &[0.3], &s).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let v = periodic_cov(&[0.55], &[0.3], &s).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let a = periodic_cov(&[0.9], &[0.1], &s).unwrap();
        let b = periodic_cov(&[0.0], &[0.2], &s).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_explicit_spectrum_rejected() {
        let r = PeriodicSpectrum::new(
            1,
            4,
            SpectrumFamily::Explicit {
                entries: vec![(vec![0], 1.0), (vec![1], 0.5)],
            },
        );
        assert!(r.is_err());
    }

    #[test]
    fn shell_order_1d() {
        let k = lattice_shells(1, 2);
        assert_eq!(k, vec![vec![0], vec![1], vec![-1], vec![2], vec![-2]]);
        let k2 = lattice_shells(2, 1);
        assert_eq!(k2.len(), 9);
        assert_eq!(k2[0], vec![0, 0]);
        assert!(k2[1..].iter().all(|k| k.iter().map(|c| c.abs()).max() == Some(1)));
    }

    #[test]
    fn eigen_sequence_prefix() {
        let s = PeriodicSpectrum::algebraic_1d(1.0, 2.0, 0.0).unwrap();
        let seq = s.eigen_sequence(3).unwrap();
        let expect = [1.0, 0.25, 0.25, 0.04, 0.04];
        for (v, e) in seq.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-15);
        }
        assert_eq!(seq.len(), 7);
        assert!(three_term().eigen_sequence(2).is_err());
    }

    #[test]
    fn diagonal_is_total_mass() {
        let s = PeriodicSpectrum::new(
            2,
            5,
            SpectrumFamily::Algebraic {
                scale: 1.0,
                offset: 1.0,
                power: 2.0,
                tilt: 0.0,
            },
        )
        .unwrap();
        let k = PeriodicKernel::new(s.clone());
        let v = k.eval(&[0.2, 0.7], &[0.2, 0.7]);
        assert!((v - s.total_mass()).abs() < 1e-12);
    }
}
