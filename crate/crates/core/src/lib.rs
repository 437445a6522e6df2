//! # kaf-core
//!
//! Kernel analog forecasting (KAF), also known as kernel principal component
//! regression, for dynamically generated time series.
//!
//! Given time-ordered covariate/response pairs `(x_j, y_j)` sampled at a fixed
//! interval `dt`, the forecast for lead time `tau = q * dt` is
//!
//! ```text
//! f(x) = sum_{i <= l} alpha_i(tau) / lambda_i^{1/2} * psi_i(x)
//! ```
//!
//! where `(lambda_i, phi_i)` are the leading eigenpairs of the empirical kernel
//! operator, `psi_i` their Nyström extensions, and `alpha_i(tau)` the projection
//! of the `q`-step shifted response ("analog vector") onto `phi_i`.
//!
//! ## Layout
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`dataset`] | time series container, analog vectors, delay embedding |
//! | [`systems`] | circle rotation and Lorenz 63 reference data |
//! | [`kernels`] | Gaussian and variable-bandwidth kernels, bandwidth tuning |
//! | [`normalization`] | symmetric Markov and diffusion-maps normalizations |
//! | [`spectral`] | eigenbases and Nyström / biorthogonal extensions |
//! | [`forecast`] | KPCR, hybrid and KRR estimators, error fields, probabilities |
//! | [`eval`] | RMSE, excess generalization error, skill reports |
//! | [`pipeline`] | kernel -> normalization -> eigendecomposition in one call |
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. The `std` feature only enables runtime SIMD dispatch in the
//! linear-algebra backend.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod kernels;
pub mod normalization;
pub mod pipeline;
pub mod spectral;
pub mod systems;

mod linalg;

pub use faer;

pub use dataset::{analog_vector, delay_embed, empirical_moments, AnalogVector, ResponseTransform, TimeSeriesDataset};
pub use error::{Error, Result};
pub use eval::{evaluate_forecast, excess_gen_error, rmse, CircleOracle, RegressionOracle, SkillReport};
pub use forecast::{conditional_variance, fit_kpcr, fit_predict_krr, ErrorModel, ForecastModel, KrrModel};
pub use kernels::{Bandwidth, FittedKernel, KernelFamily, KernelSpec};
pub use normalization::{NormalizationMode, NormalizedKernel};
pub use pipeline::{build_basis, build_basis_full, BasisBuild, BasisConfig};
pub use spectral::{Basis, BiorthogonalBasis, SpectralBasis};
pub use systems::{CircleParams, L63Params};
