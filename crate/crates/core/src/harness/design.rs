use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Domain;
use crate::kriging::{Design, TargetFunctional};
use crate::ratios::{DesignSource, TargetSource};

/// Largest design size any generator accepts.
pub const MAX_DESIGN_SIZE: usize = 2048;

/// Smallest gap kept between a space-filling candidate and existing sites.
const CANDIDATE_GAP: f64 = 1e-12;

/// Deterministic design families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignKind {
    /// `lo + (i + 1)(hi - lo)/(n + 1)` on an interval, `(i + 1/2)/n` on the
    /// circle.
    EquispacedGrid,
    /// Nested design whose sites `1, 2, 4, 8, ...` approach `x_star` from
    /// alternating sides at distances `scale * q^k`; every other site comes
    /// from the base-2 van der Corput sequence, skipping points closer to
    /// `x_star` than the latest accumulating site.
    AccumulatingAt {
        x_star: f64,
        #[serde(default = "half")]
        q: f64,
        #[serde(default = "quarter")]
        scale: f64,
    },
    /// Halton points with bases `2, 3, 5, ...`, starting at index 1.
    HaltonScatter,
    /// Fibonacci lattice on S^2: `z_i = 1 - (2i + 1)/n`, golden-angle
    /// longitudes.
    SphereFibonacci,
}

fn half() -> f64 {
    0.5
}

fn quarter() -> f64 {
    0.25
}

/// A design family bound to a domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignGenerator {
    pub kind: DesignKind,
    pub domain: Domain,
}

/// `i`-th element of the radical-inverse sequence in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut f = inv;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

impl DesignGenerator {
    pub fn new(kind: DesignKind, domain: Domain) -> Result<Self> {
        domain.validate()?;
        let g = Self { kind, domain };
        g.check()?;
        Ok(g)
    }

    fn interval(&self) -> Option<(f64, f64)> {
        match &self.domain {
            Domain::Box { lo, hi } if lo.len() == 1 => Some((lo[0], hi[0])),
            Domain::Torus { dim: 1 } => Some((0.0, 1.0)),
            _ => None,
        }
    }

    fn periodic(&self) -> bool {
        matches!(self.domain, Domain::Torus { .. })
    }

    fn check(&self) -> Result<()> {
        let unsupported = || {
            Err(Error::InvalidParameter(format!(
                "design kind {:?} does not support domain {:?}",
                self.kind, self.domain
            )))
        };
        match &self.kind {
            DesignKind::EquispacedGrid => {
                if self.interval().is_none() {
                    return unsupported();
                }
            }
            DesignKind::AccumulatingAt { x_star, q, scale } => {
                let Some((lo, hi)) = self.interval() else {
                    return unsupported();
                };
                if !(*q > 0.0 && *q < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "contraction ratio q must lie in (0, 1), got {q}"
                    )));
                }
                if !(*scale > 0.0) {
                    return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
                }
                let inside = |x: f64| x >= lo && x <= hi;
                if !self.periodic() && !(inside(x_star - scale) && inside(x_star + scale)) {
                    return Err(Error::InvalidParameter(format!(
                        "x_star +- scale = {} +- {scale} leaves the interval [{lo}, {hi}]",
                        x_star
                    )));
                }
                if self.periodic() && !inside(*x_star) {
                    return Err(Error::InvalidParameter(format!("x_star {x_star} is not in [0, 1]")));
                }
            }
            DesignKind::HaltonScatter => {
                if matches!(self.domain, Domain::Sphere) || self.domain.dim() > PRIMES.len() {
                    return unsupported();
                }
            }
            DesignKind::SphereFibonacci => {
                if !matches!(self.domain, Domain::Sphere) {
                    return unsupported();
                }
            }
        }
        Ok(())
    }

    /// Design of size `n`; deterministic in `(self, n)`.
    pub fn generate(&self, n: usize) -> Result<Design> {
        if n == 0 {
            return Err(Error::InvalidParameter("design size must be >= 1".into()));
        }
        if n > MAX_DESIGN_SIZE {
            return Err(Error::InvalidParameter(format!(
                "design size {n} exceeds the maximum of {MAX_DESIGN_SIZE}"
            )));
        }
        self.check()?;
        let sites = match &self.kind {
            DesignKind::EquispacedGrid => {
                let (lo, hi) = self.interval().expect("checked");
                (0..n)
                    .map(|i| {
                        let t = if self.periodic() {
                            (i as f64 + 0.5) / n as f64
                        } else {
                            (i + 1) as f64 / (n + 1) as f64
                        };
                        vec![lo + (hi - lo) * t]
                    })
                    .collect()
            }
            DesignKind::AccumulatingAt { x_star, q, scale } => self.accumulating(n, *x_star, *q, *scale),
            DesignKind::HaltonScatter => {
                let dim = self.domain.dim();
                let (lo, hi) = match &self.domain {
                    Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
                    _ => (vec![0.0; dim], vec![1.0; dim]),
                };
                (1..=n as u64)
                    .map(|i| {
                        (0..dim)
                            .map(|d| lo[d] + (hi[d] - lo[d]) * radical_inverse(i, PRIMES[d]))
                            .collect()
                    })
                    .collect()
            }
            DesignKind::SphereFibonacci => fibonacci_sphere(n, 0.0),
        };
        Design::new(self.domain.clone(), sites)
    }

    fn accumulating(&self, n: usize, x_star: f64, q: f64, scale: f64) -> Vec<Vec<f64>> {
        let (lo, hi) = self.interval().expect("checked");
        let wrap = |x: f64| if self.periodic() { x.rem_euclid(1.0) } else { x };
        let mut sites: Vec<f64> = Vec::with_capacity(n);
        let mut k = 0i32;
        let mut vdc = 1u64;
        for j in 1..=n {
            if j.is_power_of_two() {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sites.push(wrap(x_star + sign * scale * q.powi(k)));
                k += 1;
                continue;
            }
            // candidates inside the current accumulation radius are skipped
            let radius = scale * q.powi(k - 1);
            loop {
                let x = lo + (hi - lo) * radical_inverse(vdc, 2);
                vdc += 1;
                let mut gap = (x - x_star).abs();
                if self.periodic() {
                    gap = gap.min(1.0 - gap);
                }
                if gap >= radius && sites.iter().all(|s| (s - x).abs() > CANDIDATE_GAP) {
                    sites.push(x);
                    break;
                }
            }
        }
        sites.into_iter().map(|x| vec![x]).collect()
    }

    pub fn accumulation_point(&self) -> Option<Vec<f64>> {
        match &self.kind {
            DesignKind::AccumulatingAt { x_star, .. } => Some(vec![*x_star]),
            _ => None,
        }
    }
}

impl DesignSource for DesignGenerator {
    fn design(&self, n: usize) -> Result<Design> {
        self.generate(n)
    }

    fn describe(&self) -> String {
        format!("{:?} on {:?}", self.kind, self.domain)
    }
}

/// Fibonacci lattice with longitudes rotated by `phase`.
pub fn fibonacci_sphere(n: usize, phase: f64) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = i as f64 * golden + phase;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// How the probe functionals are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// `held_out` points spread over the domain and off any dyadic grid,
    /// plus three points around the accumulation site when the design has
    /// one.
    Default {
        #[serde(default = "default_held_out")]
        held_out: usize,
    },
    /// Point evaluations at the listed sites.
    Points { points: Vec<Vec<f64>> },
    /// Arbitrary finite linear functionals.
    Functionals { targets: Vec<TargetFunctional> },
}

pub const DEFAULT_HELD_OUT: usize = 33;

fn default_held_out() -> usize {
    DEFAULT_HELD_OUT
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec::Default {
            held_out: DEFAULT_HELD_OUT,
        }
    }
}

pub const XSTAR_ID: &str = "xstar";

/// A [`TargetSpec`] bound to a domain and, optionally, an accumulation site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetPlan {
    pub spec: TargetSpec,
    pub domain: Domain,
    pub accumulation: Option<Vec<f64>>,
}

impl TargetPlan {
    /// The held-out points of the default target set.
    pub fn held_out(&self, count: usize) -> Vec<Vec<f64>> {
        match &self.domain {
            Domain::Sphere => fibonacci_sphere(count, 0.5),
            Domain::Box { lo, hi } if lo.len() == 1 => (0..count)
                .map(|i| vec![lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.3) / count as f64])
                .collect(),
            Domain::Torus { dim: 1 } => (0..count).map(|i| vec![(i as f64 + 0.3) / count as f64]).collect(),
            other => {
                let dim = other.dim();
                let (lo, hi) = match other {
                    Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
                    _ => (vec![0.0; dim], vec![1.0; dim]),
                };
                // Halton points from a far index range, disjoint from designs
                (0..count as u64)
                    .map(|i| {
                        (0..dim)
                            .map(|d| lo[d] + (hi[d] - lo[d]) * radical_inverse(i + 7919, PRIMES[d]))
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

impl TargetSource for TargetPlan {
    fn targets(&self, design: &Design) -> Result<Vec<TargetFunctional>> {
        match &self.spec {
            TargetSpec::Points { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidParameter("target point list is empty".into()));
                }
                points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        self.domain.check_point(p)?;
                        Ok(TargetFunctional::point(format!("p{i:02}"), p.clone()))
                    })
                    .collect()
            }
            TargetSpec::Functionals { targets } => {
                if targets.is_empty() {
                    return Err(Error::InvalidParameter("target list is empty".into()));
                }
                for t in targets {
                    TargetFunctional::new(t.id.clone(), t.intercept, t.terms.clone())?;
                    for (p, _) in &t.terms {
                        self.domain.check_point(p)?;
                    }
                }
                Ok(targets.clone())
            }
            TargetSpec::Default { held_out } => {
                let mut out: Vec<TargetFunctional> = self
                    .held_out(*held_out)
                    .into_iter()
                    .enumerate()
                    .map(|(i, p)| TargetFunctional::point(format!("h{i:02}"), p))
                    .collect();
                if let Some(x) = &self.accumulation {
                    let d = design.distance_to(x);
                    let near = [(XSTAR_ID, 0.0), ("xstar_p", 0.5 * d), ("xstar_m", -1.5 * d)];
                    for (id, off) in near {
                        let mut p = vec![x[0] + off];
                        if matches!(self.domain, Domain::Torus { .. }) {
                            p[0] = p[0].rem_euclid(1.0);
                        }
                        if self.domain.check_point(&p).is_ok() {
                            out.push(TargetFunctional::point(id, p));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    fn describe(&self) -> String {
        match &self.spec {
            TargetSpec::Default { held_out } => match &self.accumulation {
                Some(x) => format!(
                    "{held_out} held-out points plus x* = {x:?}, x* + d/2 and x* - 3d/2 with d the distance from x* to the design"
                ),
                None => format!("{held_out} held-out points"),
            },
            TargetSpec::Points { points } => format!("{} listed points", points.len()),
            TargetSpec::Functionals { targets } => format!("{} listed functionals", targets.len()),
        }
    }
}
