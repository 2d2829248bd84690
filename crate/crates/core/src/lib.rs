//! Efficiency of kriging predictors under a misspecified Gaussian model.
//!
//! A field is observed at `n` sites and a linear functional of it is
//! predicted with the kriging predictor built under a presumed model
//! `(m~, rho~)` while the data follow `(m, rho)`. This crate evaluates the
//! exact error moments of such predictors, the eight efficiency ratios and
//! the mean term, and the spectral or eigenvalue conditions under which the
//! ratios converge.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod kriging;
pub mod linalg;
pub mod ratios;
pub mod special;

pub use error::{Error, Result};
pub use kernels::{AnalyticLimit, CovarianceKernel, Domain, EigenSequence, KernelConfig, KernelRegistry, MaternParams};
pub use kriging::{
    error_moments, kriging_predictor, Design, ErrorMoments, GaussianModel, LinearPredictor, MeanConfig, MeanFunction,
    TargetFunctional,
};
