//! Functional local polynomial regression.
//!
//! Estimates a smooth regression functional `g : L2([0,1]) -> R` at a site
//! `x` from pairs `(X_j, Y_j)` with functional covariates. Covariates are
//! projected onto the first `J` basis functions around `x`, a polynomial of
//! total degree `K - 1` is fitted by least squares over the ball of radius
//! `delta`, and the normal equations are stabilised with a diagonal
//! Tikhonov term whose entries are reciprocal multinomial coefficients. The
//! constant coefficient of the fit is the estimate.
//!
//! Around the estimator the crate provides
//!
//! * [`simulation`]: Gaussian functional covariates through a truncated
//!   Karhunen-Loeve expansion, regression targets with closed-form Frechet
//!   derivatives, and noise models;
//! * [`diagnostics`]: the exact error split into ridge bias, truncation bias,
//!   Taylor remainder bias and noise, plus Monte Carlo audits of the bound
//!   quantities that control them;
//! * [`experiments`]: tuned Monte Carlo rate studies that fit the empirical
//!   convergence exponent;
//! * [`io`]: configuration, CSV/JSON output and run manifests.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod function_space;
pub mod io;
pub mod linalg;
pub mod poly_index;
pub mod rng;
pub mod scalar;
pub mod simulation;

pub use error::{Error, Result};
pub use poly_index::MultiIndexSet;
pub use scalar::Scalar;

pub type Basis = function_space::Basis<f64>;
pub type FunctionVec = function_space::FunctionVec<f64>;
pub type Dataset = estimator::Dataset<f64>;
pub type EstimatorConfig = estimator::EstimatorConfig<f64>;
pub type LocalDesign = estimator::LocalDesign<f64>;
pub type EstimateResult = estimator::EstimateResult<f64>;
pub type GaussianCovariateModel = simulation::GaussianCovariateModel<f64>;
pub type RegressionTarget = simulation::RegressionTarget<f64>;
pub type NoiseModel = simulation::NoiseModel<f64>;
pub type DecompositionReport = diagnostics::DecompositionReport<f64>;

pub type Basis32 = function_space::Basis<f32>;
pub type FunctionVec32 = function_space::FunctionVec<f32>;
pub type Dataset32 = estimator::Dataset<f32>;
pub type EstimatorConfig32 = estimator::EstimatorConfig<f32>;
pub type EstimateResult32 = estimator::EstimateResult<f32>;
pub type GaussianCovariateModel32 = simulation::GaussianCovariateModel<f32>;
pub type RegressionTarget32 = simulation::RegressionTarget<f32>;
