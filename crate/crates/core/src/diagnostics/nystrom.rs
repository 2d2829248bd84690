use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CovarianceKernel, Domain};
use crate::linalg::sum_compensated;

/// Relative asymmetry of the kernel matrix tolerated before erroring.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative magnitude below which a Galerkin eigenvalue counts as tail.
pub const TAIL_TOL: f64 = 0.1;

/// Quadrature rules for the covariance operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Quadrature {
    /// Composite trapezoid rule with `count` nodes per axis on a box,
    /// endpoints included.
    Trapezoid { lo: Vec<f64>, hi: Vec<f64>, count: usize },
    /// Nodes `i / count` per axis on the unit torus, equal weights.
    PeriodicUniform { dim: usize, count: usize },
    /// Vertices of the icosahedron refined `level` times, projected to the
    /// sphere, equal weights `4 pi / N`. Gives `10 * 4^level + 2` nodes.
    Icosphere { level: u32 },
}

impl Quadrature {
    /// A rule matched to the domain: trapezoid on boxes, uniform on tori,
    /// icosphere on S^2. `resolution` is nodes per axis, or the refinement
    /// level on the sphere.
    pub fn for_domain(domain: &Domain, resolution: usize) -> Self {
        match domain {
            Domain::Box { lo, hi } => Quadrature::Trapezoid {
                lo: lo.clone(),
                hi: hi.clone(),
                count: resolution,
            },
            Domain::Torus { dim } => Quadrature::PeriodicUniform {
                dim: *dim,
                count: resolution,
            },
            Domain::Sphere => Quadrature::Icosphere {
                level: resolution as u32,
            },
        }
    }

    pub fn nodes_weights(&self) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        match self {
            Quadrature::Trapezoid { lo, hi, count } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        got: hi.len(),
                    });
                }
                if *count < 2 {
                    return Err(Error::InvalidParameter("trapezoid rule needs >= 2 nodes".into()));
                }
                let axes: Vec<(Vec<f64>, Vec<f64>)> = lo
                    .iter()
                    .zip(hi)
                    .map(|(&a, &b)| {
                        let h = (b - a) / (*count - 1) as f64;
                        let x = (0..*count).map(|i| a + i as f64 * h).collect();
                        let w = (0..*count)
                            .map(|i| if i == 0 || i == count - 1 { 0.5 * h } else { h })
                            .collect();
                        (x, w)
                    })
                    .collect();
                Ok(tensor(&axes))
            }
            Quadrature::PeriodicUniform { dim, count } => {
                if *count == 0 || *dim == 0 {
                    return Err(Error::InvalidParameter("periodic rule needs nodes".into()));
                }
                let h = 1.0 / *count as f64;
                let axis = ((0..*count).map(|i| i as f64 * h).collect(), vec![h; *count]);
                Ok(tensor(&vec![axis; *dim]))
            }
            Quadrature::Icosphere { level } => {
                if *level > 6 {
                    return Err(Error::InvalidParameter(format!(
                        "icosphere level {level} exceeds the maximum of 6"
                    )));
                }
                let nodes = icosphere(*level);
                let w = 4.0 * PI / nodes.len() as f64;
                let weights = vec![w; nodes.len()];
                Ok((nodes, weights))
            }
        }
    }
}

fn tensor(axes: &[(Vec<f64>, Vec<f64>)]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut nodes = vec![Vec::new()];
    let mut weights = vec![1.0];
    for (x, w) in axes {
        let mut n2 = Vec::with_capacity(nodes.len() * x.len());
        let mut w2 = Vec::with_capacity(nodes.len() * x.len());
        for (p, pw) in nodes.iter().zip(&weights) {
            for (xi, wi) in x.iter().zip(w) {
                let mut q = p.clone();
                q.push(*xi);
                n2.push(q);
                w2.push(pw * wi);
            }
        }
        nodes = n2;
        weights = w2;
    }
    (nodes, weights)
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn icosphere(level: u32) -> Vec<Vec<f64>> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalize)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalize([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    verts.into_iter().map(|v| v.to_vec()).collect()
}

/// Discretized eigenpairs of the covariance operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NystromEigen {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[j][i]` is `e_j` at node `i`; weight-orthonormal.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `sum_i w_i rho(x_i, x_i)`.
    pub weighted_trace: f64,
    /// Sum of all discrete eigenvalues, retained or not.
    pub eigenvalue_sum: f64,
    pub min_eigenvalue: f64,
}

impl NystromEigen {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `sum_j g_j e_j(x_a) e_j(x_b)` over the retained pairs.
    pub fn mercer(&self, a: usize, b: usize) -> f64 {
        sum_compensated(
            self.eigenvalues
                .iter()
                .zip(&self.eigenvectors)
                .map(|(g, e)| g * e[a] * e[b]),
        )
    }

    /// Largest `|sum_i w_i e_j e_k - delta_jk|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, ej) in self.eigenvectors.iter().enumerate() {
            for (k, ek) in self.eigenvectors.iter().enumerate().take(j + 1) {
                let g = sum_compensated(self.weights.iter().zip(ej).zip(ek).map(|((w, a), b)| w * a * b));
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

fn check_nodes(domain: &Domain, nodes: &[Vec<f64>], weights: &[f64]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidParameter("no quadrature nodes".into()));
    }
    if nodes.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: nodes.len(),
            got: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "quadrature weight {w} is not positive"
        )));
    }
    for x in nodes {
        domain.check_point(x)?;
    }
    for i in 0..nodes.len() {
        for j in 0..i {
            if !(domain.distance(&nodes[i], &nodes[j]) > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "quadrature nodes {j} and {i} coincide"
                )));
            }
        }
    }
    Ok(())
}

fn kernel_matrix(kernel: &dyn CovarianceKernel, nodes: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = nodes.len();
    let mut k = DMatrix::zeros(n, n);
    let mut scale: f64 = 0.0;
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let a = kernel.eval(&nodes[i], &nodes[j]);
            let b = kernel.eval(&nodes[j], &nodes[i]);
            if !a.is_finite() {
                return Err(Error::Numerical(format!(
                    "kernel {} is not finite on the nodes",
                    kernel.name()
                )));
            }
            k[(i, j)] = a;
            k[(j, i)] = a;
            scale = scale.max(a.abs());
            asym = asym.max((a - b).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "kernel matrix of {} is not symmetric (max asymmetry {asym:e})",
            kernel.name()
        )));
    }
    Ok(k)
}

fn symmetric_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Eigenpairs of the quadrature discretization `W^1/2 K W^1/2`, keeping
/// eigenvalues above `rank_cutoff` times the largest.
pub fn nystrom_eigen(
    kernel: &dyn CovarianceKernel,
    nodes: &[Vec<f64>],
    weights: &[f64],
    rank_cutoff: f64,
) -> Result<NystromEigen> {
    check_nodes(kernel.domain(), nodes, weights)?;
    if !(rank_cutoff >= 0.0) || !rank_cutoff.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rank cutoff must be >= 0, got {rank_cutoff}"
        )));
    }
    let n = nodes.len();
    let k = kernel_matrix(kernel, nodes)?;
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * k[(i, j)] * sqrt_w[j]);
    let weighted_trace = sum_compensated((0..n).map(|i| weights[i] * k[(i, i)]));
    let (values, vectors) = symmetric_eigen(a)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let top = values[order[0]];
    let eigenvalue_sum = sum_compensated(values.iter().copied());
    let min_eigenvalue = values[order[n - 1]];
    let mut eigenvalues = Vec::new();
    let mut eigenvectors = Vec::new();
    for &j in &order {
        let g = values[j];
        if !(g > rank_cutoff * top) || !(g > 0.0) {
            break;
        }
        eigenvalues.push(g);
        eigenvectors.push((0..n).map(|i| vectors[(i, j)] / sqrt_w[i]).collect());
    }
    Ok(NystromEigen {
        nodes: nodes.to_vec(),
        weights: weights.to_vec(),
        eigenvalues,
        eigenvectors,
        weighted_trace,
        eigenvalue_sum,
        min_eigenvalue,
    })
}

/// Galerkin proxy for `T_a = C^-1/2 C~ C^-1/2 - a I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaTailReport {
    pub a_used: f64,
    pub basis_size: usize,
    /// Eigenvalues of the proxy, by decreasing magnitude.
    pub galerkin_eigs: Vec<f64>,
    /// First index from which every `|eig|` is below `TAIL_TOL` times the
    /// largest magnitude.
    pub tail_index: usize,
    /// Largest `|eig|` over the last quarter of `galerkin_eigs`.
    pub last_quartile_max: f64,
    /// `sum eig^2`, the squared Hilbert–Schmidt norm of the proxy.
    pub hilbert_schmidt_sq: f64,
}

/// Rank cutoff used to build the Nyström basis for [`t_a_tail_spectrum`].
pub const T_A_RANK_CUTOFF: f64 = 1e-12;

/// Eigenvalues of `G^-1/2 E^T W K~ W E G^-1/2 - a I` on the leading
/// `basis_size` Nyström eigenpairs `(G, E)` of the true kernel.
pub fn t_a_tail_spectrum(
    true_kernel: &dyn CovarianceKernel,
    wrong_kernel: &dyn CovarianceKernel,
    nodes: &[Vec<f64>],
    weights: &[f64],
    a: f64,
    basis_size: usize,
) -> Result<TaTailReport> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("a must be finite and >= 0, got {a}")));
    }
    if basis_size == 0 {
        return Err(Error::InvalidParameter("basis size must be >= 1".into()));
    }
    if true_kernel.domain() != wrong_kernel.domain() {
        return Err(Error::InvalidParameter("kernels live on different domains".into()));
    }
    let ny = nystrom_eigen(true_kernel, nodes, weights, T_A_RANK_CUTOFF)?;
    if ny.rank() < basis_size {
        return Err(Error::InvalidParameter(format!(
            "only {} Nyström eigenvalues exceed the cutoff; basis size {basis_size} is too large for the quadrature",
            ny.rank()
        )));
    }
    let kt = kernel_matrix(wrong_kernel, nodes)?;
    let n = nodes.len();
    // columns W e_j / sqrt(g_j)
    let v = DMatrix::from_fn(n, basis_size, |i, j| {
        weights[i] * ny.eigenvectors[j][i] / ny.eigenvalues[j].sqrt()
    });
    let mut b = v.transpose() * &kt * &v;
    for i in 0..basis_size {
        for j in 0..i {
            let s = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = s;
            b[(j, i)] = s;
        }
        b[(i, i)] -= a;
    }
    let (mut eigs, _) = symmetric_eigen(b)?;
    eigs.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
    let top = eigs.first().map_or(0.0, |e| e.abs());
    let tail_index = eigs
        .iter()
        .rposition(|e| e.abs() >= TAIL_TOL * top)
        .map_or(0, |i| i + 1);
    let q = basis_size - basis_size.div_ceil(4);
    let last_quartile_max = eigs[q..].iter().map(|e| e.abs()).fold(0.0, f64::max);
    let hilbert_schmidt_sq = sum_compensated(eigs.iter().map(|e| e * e));
    Ok(TaTailReport {
        a_used: a,
        basis_size,
        galerkin_eigs: eigs,
        tail_index,
        last_quartile_max,
        hilbert_schmidt_sq,
    })
}
