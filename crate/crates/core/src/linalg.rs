//! Dense Cholesky with an escalating diagonal jitter, plus compensated sums.

use crate::error::{Error, Result};

/// Relative jitter ladder, multiplied by `tr(A) / n`.
pub const JITTER_START: f64 = 1e-12;
pub const JITTER_MAX: f64 = 1e-6;

/// Dense symmetric matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).fold(0.0, f64::max)
    }

    /// `x^T A x` with compensated accumulation.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = Neumaier::default();
        for i in 0..self.n {
            acc.add(x[i] * dot_compensated(self.row(i), x));
        }
        acc.total()
    }
}

/// Cholesky factor `L` of `A + jitter I`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    n: usize,
    lower: Vec<f64>,
    jitter: f64,
}

impl GramFactor {
    /// Factorizes `a`, retrying with jitter `1e-12 tr(A)/n`, escalating by 10
    /// up to `1e-6 tr(A)/n`.
    pub fn new(a: &SymMatrix) -> Result<Self> {
        let n = a.dim();
        if n == 0 {
            return Err(Error::InvalidDesign("empty Gram matrix".into()));
        }
        let base = a.trace() / n as f64;
        match cholesky(a, 0.0) {
            Ok(lower) => return Ok(Self { n, lower, jitter: 0.0 }),
            Err(minor) => log::debug!("Cholesky failed at leading minor {minor}; adding jitter"),
        }
        let mut rel = JITTER_START;
        let mut last = (0, 0.0);
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            let jitter = rel * base;
            match cholesky(a, jitter) {
                Ok(lower) => {
                    log::warn!("Gram matrix of size {n} needed jitter {jitter:e}");
                    return Ok(Self { n, lower, jitter });
                }
                Err(minor) => last = (minor, jitter),
            }
            rel *= 10.0;
        }
        Err(Error::IllConditioned {
            minor: last.0,
            jitter: last.1,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal jitter that was added, 0 if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[i * self.n + j]
        }
    }

    /// Solves `(A + jitter I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side has wrong length");
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s = dot_compensated(row, &y[..i]);
            y[i] = (y[i] - s) / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = Neumaier::default();
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                acc.add(self.lower[k * n + i] * yk);
            }
            y[i] = (y[i] - acc.total()) / self.lower[i * n + i];
        }
        y
    }

    /// `max |L L^T - (A + jitter I)|`.
    pub fn reconstruction_error(&self, a: &SymMatrix) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let s = dot_compensated(&self.lower[i * n..i * n + j + 1], &self.lower[j * n..j * n + j + 1]);
                let target = a.get(i, j) + if i == j { self.jitter } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Squared ratio of the largest to smallest pivot, a cheap proxy for the
    /// condition number.
    pub fn pivot_condition(&self) -> f64 {
        let n = self.n;
        let diag = (0..n).map(|i| self.lower[i * n + i]);
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        (hi / lo).powi(2)
    }
}

/// Row-major lower factor, or the 1-based index of the first non-positive
/// leading minor.
fn cholesky(a: &SymMatrix, jitter: f64) -> std::result::Result<Vec<f64>, usize> {
    let n = a.dim();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (ri, rj) = (i * n, j * n);
            let s = dot_compensated(&l[ri..ri + j], &l[rj..rj + j]);
            if i == j {
                let d = a.get(i, i) + jitter - s;
                if !(d > 0.0) || !d.is_finite() {
                    return Err(i + 1);
                }
                l[ri + i] = d.sqrt();
            } else {
                l[ri + j] = (a.get(i, j) - s) / l[rj + j];
            }
        }
    }
    Ok(l)
}

/// Neumaier's compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum_compensated(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    values.into_iter().for_each(|v| acc.add(v));
    acc.total()
}

pub fn dot_compensated(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = Neumaier::default();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.total()
}
