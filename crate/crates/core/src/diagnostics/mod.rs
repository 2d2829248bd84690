//! Probe-scale checks of the conditions behind asymptotically efficient
//! prediction under a misspecified model: eigenvalue and spectral-density
//! ratio limits, Nyström eigenpairs of the covariance operator, and a
//! Galerkin proxy for `C^-1/2 C~ C^-1/2 - a I`.

mod nystrom;
mod report;
mod verdict;

pub use nystrom::{
    nystrom_eigen, t_a_tail_spectrum, NystromEigen, Quadrature, TaTailReport, SYMMETRY_TOL, TAIL_TOL, T_A_RANK_CUTOFF,
};
pub use report::{
    assumption_report, AssumptionReport, Budget, Finding, Route, Status, COND_COMPACT, COND_EQUIVALENCE, COND_MEAN,
};
pub use verdict::{
    eigen_ratio_limit, log_radii, probe_directions, radial_probe_grid, spectral_equivalence_bounds,
    spectral_ratio_limit, Evidence, RatioVerdict, VerdictKind, DEFAULT_TOL, DEFAULT_WINDOW, MIN_SEQUENCE_LEN,
};
