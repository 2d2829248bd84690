use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{norm, AnalyticLimit, EigenSequence, SpectralDensity};
use crate::linalg::sum_compensated;

pub const DEFAULT_WINDOW: f64 = 0.2;
pub const DEFAULT_TOL: f64 = 1e-2;

/// Minimum sequence length accepted by [`eigen_ratio_limit`].
pub const MIN_SEQUENCE_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Converges,
    DivergesToZero,
    DivergesToInfinity,
    Inconclusive,
}

/// Tail statistics behind a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub window_start: usize,
    pub mean: f64,
    pub max_deviation: f64,
    /// Ratio values at the divergence checkpoints.
    pub checkpoints: Vec<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

/// Finite-scale verdict on `lim ratio`; `a_estimate` is set iff the kind is
/// `Converges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioVerdict {
    pub kind: VerdictKind,
    pub a_estimate: Option<f64>,
    pub evidence: Evidence,
}

impl RatioVerdict {
    fn new(kind: VerdictKind, a_estimate: Option<f64>, evidence: Evidence) -> Self {
        debug_assert_eq!(kind == VerdictKind::Converges, a_estimate.is_some());
        Self {
            kind,
            a_estimate,
            evidence,
        }
    }

    /// Whether this verdict agrees with an analytic limit, with relative
    /// tolerance `tol` on the constant.
    pub fn agrees_with(&self, limit: &AnalyticLimit, tol: f64) -> bool {
        match (self.kind, limit) {
            (VerdictKind::Converges, AnalyticLimit::Converges(a)) => {
                self.a_estimate.is_some_and(|e| (e - a).abs() <= tol * a.abs())
            }
            (VerdictKind::DivergesToZero, AnalyticLimit::DivergesToZero) => true,
            (VerdictKind::DivergesToInfinity, AnalyticLimit::DivergesToInfinity) => true,
            _ => false,
        }
    }
}

fn check_window(window: f64, tol: f64) -> Result<()> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "window must lie in (0, 1], got {window}"
        )));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// Monotone trend of `values` with every step changing by more than `tol`
/// relatively.
fn trend(values: &[f64], tol: f64) -> Option<VerdictKind> {
    let down = values.windows(2).all(|w| w[1] < w[0] * (1.0 - tol));
    let up = values.windows(2).all(|w| w[1] > w[0] * (1.0 + tol));
    match (down, up) {
        (true, _) => Some(VerdictKind::DivergesToZero),
        (_, true) => Some(VerdictKind::DivergesToInfinity),
        _ => None,
    }
}

/// Verdict on `lim g~_j / g_j` from the trailing `window` fraction of the
/// ratio sequence.
///
/// Converges to the window mean when every ratio in the window lies within
/// `tol * mean` of it. Otherwise the ratio at `j = J/4, J/2, J` decides a
/// monotone divergence, and anything else is inconclusive.
pub fn eigen_ratio_limit(g: &EigenSequence, g_tilde: &EigenSequence, window: f64, tol: f64) -> Result<RatioVerdict> {
    check_window(window, tol)?;
    if g.len() != g_tilde.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: g_tilde.len(),
        });
    }
    let len = g.len();
    if len < MIN_SEQUENCE_LEN {
        return Err(Error::InvalidParameter(format!(
            "eigen sequences need at least {MIN_SEQUENCE_LEN} entries, got {len}"
        )));
    }
    // EigenSequence guarantees positive finite entries
    let ratios: Vec<f64> = g.values.iter().zip(&g_tilde.values).map(|(a, b)| b / a).collect();
    let width = ((window * len as f64).ceil() as usize).clamp(1, len);
    let start = len - width;
    let tail = &ratios[start..];
    let mean = sum_compensated(tail.iter().copied()) / width as f64;
    let max_deviation = tail.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max);
    let checkpoints: Vec<f64> = [len / 4, len / 2, len].iter().map(|&j| ratios[j.max(1) - 1]).collect();
    let evidence = Evidence {
        window_start: start,
        mean,
        max_deviation,
        checkpoints: checkpoints.clone(),
        note: String::new(),
    };
    if max_deviation < tol * mean {
        return Ok(RatioVerdict::new(VerdictKind::Converges, Some(mean), evidence));
    }
    let kind = trend(&checkpoints, tol).unwrap_or(VerdictKind::Inconclusive);
    Ok(RatioVerdict::new(kind, None, evidence))
}

fn check_probe(f: &dyn SpectralDensity, omega: &[f64]) -> Result<f64> {
    let v = f.eval(omega)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!(
            "spectral density {} is {v} at probe {omega:?}",
            f.name()
        )));
    }
    Ok(v)
}

/// Verdict on `lim f~(w)/f(w)` as `|w| -> infinity`, probed on
/// `radii x directions`.
///
/// Only radii in the last decade (`r >= r_max / 10`) enter the convergence
/// test. The estimate is the geometric mean of those ratios, and the test
/// requires `|ln(ratio / estimate)| < tol` throughout, which makes the
/// verdict symmetric under swapping `f` and `f~`. When every direction
/// settles but to different values the verdict is inconclusive.
pub fn spectral_ratio_limit(
    f: &dyn SpectralDensity,
    f_tilde: &dyn SpectralDensity,
    radii: &[f64],
    directions: &[Vec<f64>],
    tol: f64,
) -> Result<RatioVerdict> {
    check_window(1.0, tol)?;
    let dim = f.dim();
    if f_tilde.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: f_tilde.dim(),
        });
    }
    if radii.len() < 3 {
        return Err(Error::InvalidParameter("at least 3 radii are required".into()));
    }
    if radii.windows(2).any(|w| !(w[0] < w[1])) || !(radii[0] > 0.0) {
        return Err(Error::InvalidParameter("radii must be positive and increasing".into()));
    }
    let r_max = radii[radii.len() - 1];
    if r_max / radii[0] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "radii must span at least two decades, got [{}, {r_max}]",
            radii[0]
        )));
    }
    if directions.is_empty() {
        return Err(Error::InvalidParameter("at least one direction is required".into()));
    }
    for d in directions {
        if d.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d.len(),
            });
        }
        if (norm(d) - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("direction {d:?} is not a unit vector")));
        }
    }

    // log-ratio grid, [radius][direction]
    let mut logs = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut row = Vec::with_capacity(directions.len());
        for d in directions {
            let omega: Vec<f64> = d.iter().map(|c| c * r).collect();
            let a = check_probe(f, &omega)?;
            let b = check_probe(f_tilde, &omega)?;
            row.push(b.ln() - a.ln());
        }
        logs.push(row);
    }
    let start = radii.iter().position(|&r| r >= r_max / 10.0).unwrap_or(0);
    let tail: Vec<f64> = logs[start..].iter().flatten().copied().collect();
    let log_mean = sum_compensated(tail.iter().copied()) / tail.len() as f64;
    let max_log_dev = tail.iter().map(|v| (v - log_mean).abs()).fold(0.0, f64::max);
    let mean = log_mean.exp();
    let per_radius: Vec<f64> = logs
        .iter()
        .map(|row| (sum_compensated(row.iter().copied()) / row.len() as f64).exp())
        .collect();
    let mut evidence = Evidence {
        window_start: start,
        mean,
        max_deviation: max_log_dev,
        checkpoints: per_radius[start..].to_vec(),
        note: String::new(),
    };
    if max_log_dev < tol {
        return Ok(RatioVerdict::new(VerdictKind::Converges, Some(mean), evidence));
    }

    let per_direction_settles = (0..directions.len()).all(|j| {
        let col: Vec<f64> = logs[start..].iter().map(|row| row[j]).collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        col.iter().all(|v| (v - m).abs() < tol)
    });
    if per_direction_settles && directions.len() > 1 {
        evidence.note = "each direction settles, to direction-dependent values".into();
        return Ok(RatioVerdict::new(VerdictKind::Inconclusive, None, evidence));
    }
    let kind = trend(&per_radius[start..], 0.0)
        .filter(|_| {
            let first = per_radius[start];
            let last = per_radius[per_radius.len() - 1];
            (last / first).ln().abs() > tol
        })
        .unwrap_or(VerdictKind::Inconclusive);
    Ok(RatioVerdict::new(kind, None, evidence))
}

/// `(min, max)` of `f~/f` over a probe grid: bounds on the probe set only,
/// never a certificate of `f ≍ f~`.
pub fn spectral_equivalence_bounds(
    f: &dyn SpectralDensity,
    f_tilde: &dyn SpectralDensity,
    probe_grid: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if probe_grid.is_empty() {
        return Err(Error::InvalidParameter("probe grid is empty".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for omega in probe_grid {
        let r = check_probe(f_tilde, omega)? / check_probe(f, omega)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// `count` log-spaced radii from `lo` to `hi`.
pub fn log_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let steps = (count.max(2) - 1) as f64;
    (0..count.max(2))
        .map(|i| (a + (b - a) * i as f64 / steps).exp())
        .collect()
}

/// Axis directions `+-e_i` plus the normalized diagonals `(+-1, ..., +-1)`
/// for `dim <= 3`.
pub fn probe_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; dim];
            v[i] = s;
            out.push(v);
        }
    }
    if (2..=3).contains(&dim) {
        let scale = 1.0 / (dim as f64).sqrt();
        for mask in 0..(1usize << dim) {
            out.push(
                (0..dim)
                    .map(|i| if mask >> i & 1 == 1 { -scale } else { scale })
                    .collect(),
            );
        }
    }
    out
}

/// The points `r * d` for every radius (plus the origin) and direction.
pub fn radial_probe_grid(radii: &[f64], directions: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(1 + radii.len() * directions.len());
    if let Some(d) = directions.first() {
        out.push(vec![0.0; d.len()]);
    }
    for &r in radii {
        for d in directions {
            out.push(d.iter().map(|c| c * r).collect());
        }
    }
    out
}
