//! Forecast functions built from an eigenbasis.
//!
//! With `alpha_i = (1/n) left_i . y_tau` and features `psi_i` (see
//! [`Basis`]), the estimators are
//!
//! * KPCR: `f(x) = sum_i alpha_i lambda_i^{-1/2} psi_i(x)`;
//! * hybrid: `f(x) = sum_i alpha_i lambda_i^{1/2} / (lambda_i + eta) psi_i(x)`;
//! * KRR: `f(x) = k(x) . c / n` with `(P/n + eta I) c = y_tau`.
//!
//! At full rank the hybrid and KRR coincide; at `eta = 0` the hybrid is KPCR.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use faer::{Mat, MatRef};

use crate::dataset::{analog_vector, moments, ResponseTransform, TimeSeriesDataset};
use crate::error::{arg, Error, Result};
use crate::kernels::Points;
use crate::linalg::spd_solve;
use crate::normalization::{NormalizationMode, NormalizedKernel};
use crate::spectral::Basis;

/// Per-lead expansion coefficients of the squared in-sample residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub coeffs: Vec<Vec<f64>>,
}

/// An eigenbasis with per-lead expansion coefficients of the shifted responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    basis: Arc<Basis>,
    leads: Vec<usize>,
    alphas: Vec<Vec<f64>>,
    transform: ResponseTransform,
    response_mean: f64,
    response_std: f64,
    dt: f64,
    error_model: Option<ErrorModel>,
}

/// Exceedance of the training mean response.
pub fn mean_threshold(ds: &TimeSeriesDataset) -> ResponseTransform {
    ResponseTransform::Indicator {
        threshold: moments(ds.responses()).0,
    }
}

fn check_leads(leads: &[usize], n: usize) -> Result<()> {
    if leads.is_empty() {
        return Err(arg("at least one lead is required"));
    }
    if let Some(q) = leads.iter().find(|q| **q > n) {
        return Err(arg(format!("lead {q} exceeds sample count {n}")));
    }
    for (k, q) in leads.iter().enumerate() {
        if leads[..k].contains(q) {
            return Err(arg(format!("lead {q} listed twice")));
        }
    }
    Ok(())
}

/// Fits KPCR coefficients `alpha_i(q) = (1/n) left_i . y_q` for every lead `q`.
pub fn fit_kpcr(
    basis: Arc<Basis>,
    ds: &TimeSeriesDataset,
    leads: &[usize],
    transform: ResponseTransform,
) -> Result<ForecastModel> {
    let n = basis.n();
    if ds.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ds.n(),
        });
    }
    check_leads(leads, n)?;
    let mut alphas = Vec::with_capacity(leads.len());
    for &q in leads {
        let y = analog_vector(ds, q, transform)?;
        alphas.push(basis.project(&y.values)?);
    }
    let transformed: Vec<f64> = ds.responses().iter().map(|y| transform.apply(*y)).collect();
    let (response_mean, response_std) = moments(&transformed);
    Ok(ForecastModel {
        basis,
        leads: leads.to_vec(),
        alphas,
        transform,
        response_mean,
        response_std,
        dt: ds.dt(),
        error_model: None,
    })
}

impl ForecastModel {
    /// Reassembles a model from stored parts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        basis: Arc<Basis>,
        leads: Vec<usize>,
        alphas: Vec<Vec<f64>>,
        transform: ResponseTransform,
        response_stats: (f64, f64),
        dt: f64,
        error_model: Option<ErrorModel>,
    ) -> Result<Self> {
        check_leads(&leads, basis.n())?;
        let ell = basis.ell();
        let shape_ok = |c: &[Vec<f64>]| c.len() == leads.len() && c.iter().all(|a| a.len() == ell);
        if !shape_ok(&alphas) || error_model.as_ref().is_some_and(|e| !shape_ok(&e.coeffs)) {
            return Err(arg("coefficient arrays do not match leads and basis size"));
        }
        if !(dt > 0.0) {
            return Err(arg("sampling interval must be positive"));
        }
        Ok(Self {
            basis,
            leads,
            alphas,
            transform,
            response_mean: response_stats.0,
            response_std: response_stats.1,
            dt,
            error_model,
        })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    /// Lead steps `q`; lead times are `q * dt`.
    pub fn leads(&self) -> &[usize] {
        &self.leads
    }

    pub fn alphas(&self) -> &[Vec<f64>] {
        &self.alphas
    }

    pub fn transform(&self) -> ResponseTransform {
        self.transform
    }

    /// Mean and population std of the transformed training responses.
    pub fn response_stats(&self) -> (f64, f64) {
        (self.response_mean, self.response_std)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn error_model(&self) -> Option<&ErrorModel> {
        self.error_model.as_ref()
    }

    pub fn lead_index(&self, q: usize) -> Option<usize> {
        self.leads.iter().position(|l| *l == q)
    }

    fn check_lead_index(&self, lead_index: usize) -> Result<()> {
        if lead_index >= self.leads.len() {
            return Err(arg(format!(
                "lead index {lead_index} out of range for {} leads",
                self.leads.len()
            )));
        }
        Ok(())
    }

    fn kpcr_weights(&self, coeffs: &[f64]) -> Vec<f64> {
        coeffs
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(a, l)| a / libm::sqrt(*l))
            .collect()
    }

    fn hybrid_weights(&self, lead_index: usize, eta: f64) -> Result<Vec<f64>> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(arg(format!("ridge parameter must be nonnegative, got {eta}")));
        }
        if eta == 0.0 {
            return Ok(self.kpcr_weights(&self.alphas[lead_index]));
        }
        Ok(self.alphas[lead_index]
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(a, l)| a * libm::sqrt(*l) / (l + eta))
            .collect())
    }

    /// Out-of-sample features for a batch of covariates (`m x l`).
    pub fn features(&self, queries: Points<'_>) -> Result<Mat<f64>> {
        self.basis.features(queries)
    }

    fn single_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = self.basis.features(Points::new(x, x.len().max(1)))?;
        Ok((0..f.ncols()).map(|i| f[(0, i)]).collect())
    }

    /// KPCR forecasts for every feature row.
    pub fn predict_from_features(&self, features: MatRef<'_, f64>, lead_index: usize) -> Result<Vec<f64>> {
        self.check_lead_index(lead_index)?;
        Ok(apply_weights(features, &self.kpcr_weights(&self.alphas[lead_index])))
    }

    /// KPCR forecast `f(x)` at lead `leads[lead_index]`.
    pub fn predict_kpcr(&self, x: &[f64], lead_index: usize) -> Result<f64> {
        self.check_lead_index(lead_index)?;
        let psi = self.single_features(x)?;
        Ok(dot(&psi, &self.kpcr_weights(&self.alphas[lead_index])))
    }

    /// Hybrid (spectrally truncated ridge) forecast; `eta = 0` is KPCR.
    pub fn predict_hybrid(&self, x: &[f64], lead_index: usize, eta: f64) -> Result<f64> {
        self.check_lead_index(lead_index)?;
        let w = self.hybrid_weights(lead_index, eta)?;
        Ok(dot(&self.single_features(x)?, &w))
    }

    /// Hybrid forecasts for every feature row.
    pub fn predict_hybrid_from_features(
        &self,
        features: MatRef<'_, f64>,
        lead_index: usize,
        eta: f64,
    ) -> Result<Vec<f64>> {
        self.check_lead_index(lead_index)?;
        Ok(apply_weights(features, &self.hybrid_weights(lead_index, eta)?))
    }

    /// Exceedance probability: the KPCR forecast of the indicator clipped to `[0, 1]`.
    pub fn predict_probability(&self, x: &[f64], lead_index: usize) -> Result<f64> {
        if !self.transform.is_indicator() {
            return Err(arg("probability forecasts need an indicator response transform"));
        }
        Ok(clip_probability(self.predict_kpcr(x, lead_index)?))
    }

    /// In-sample forecast at the training points, `sum_i alpha_i right_i(x_j)`.
    pub fn in_sample(&self, lead_index: usize) -> Result<Vec<f64>> {
        self.check_lead_index(lead_index)?;
        let right = self.basis.right();
        let alpha = &self.alphas[lead_index];
        Ok((0..right.nrows())
            .map(|j| (0..alpha.len()).map(|i| alpha[i] * right[(j, i)]).sum())
            .collect())
    }

    /// Attaches a conditional-variance model (see [`conditional_variance`]).
    pub fn with_error_model(mut self, ds: &TimeSeriesDataset) -> Result<Self> {
        self.error_model = Some(conditional_variance(&self, ds)?);
        Ok(self)
    }

    /// Error estimates `eps(x) = |s(x)|^{1/2}` for every feature row.
    pub fn error_from_features(&self, features: MatRef<'_, f64>, lead_index: usize) -> Result<Vec<f64>> {
        self.check_lead_index(lead_index)?;
        let em = self
            .error_model
            .as_ref()
            .ok_or_else(|| arg("model has no error estimator"))?;
        let w = self.kpcr_weights(&em.coeffs[lead_index]);
        Ok(apply_weights(features, &w)
            .into_iter()
            .map(|s| libm::sqrt(libm::fabs(s)))
            .collect())
    }

    pub fn predict_error(&self, x: &[f64], lead_index: usize) -> Result<f64> {
        let psi = self.single_features(x)?;
        let f = Mat::from_fn(1, psi.len(), |_, i| psi[i]);
        Ok(self.error_from_features(f.as_ref(), lead_index)?[0])
    }
}

pub fn clip_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn apply_weights(features: MatRef<'_, f64>, w: &[f64]) -> Vec<f64> {
    (0..features.nrows())
        .map(|r| (0..w.len()).map(|i| features[(r, i)] * w[i]).sum())
        .collect()
}

/// Expansion coefficients of the squared in-sample residuals
/// `beta_j = |y_{j+q} - f(x_j)|^2` (zero for `j + q >= n`) for every lead.
pub fn conditional_variance(model: &ForecastModel, ds: &TimeSeriesDataset) -> Result<ErrorModel> {
    if model.transform != ResponseTransform::Identity {
        return Err(arg("conditional variance needs the identity response transform"));
    }
    let n = model.basis.n();
    if ds.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ds.n(),
        });
    }
    let y = ds.responses();
    let mut coeffs = Vec::with_capacity(model.leads.len());
    for (k, &q) in model.leads.iter().enumerate() {
        let f = model.in_sample(k)?;
        let beta: Vec<f64> = (0..n)
            .map(|j| {
                if j + q < n {
                    (y[j + q] - f[j]) * (y[j + q] - f[j])
                } else {
                    0.0
                }
            })
            .collect();
        coeffs.push(model.basis.project(&beta)?);
    }
    Ok(ErrorModel { coeffs })
}

/// Kernel ridge regression for a single lead.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    normalized: NormalizedKernel,
    /// `k(x) . c / n = s(x) k_raw(x) . weights`.
    weights: Vec<f64>,
    eta: f64,
    q: usize,
}

impl KrrModel {
    /// Solves `(P/n + eta I) c = y_q`; `p` is the (symmetric) normalized training
    /// matrix of `normalized` and `raw_k` its unnormalized counterpart.
    pub fn fit(
        normalized: &NormalizedKernel,
        raw_k: MatRef<'_, f64>,
        p: MatRef<'_, f64>,
        ds: &TimeSeriesDataset,
        q: usize,
        transform: ResponseTransform,
        eta: f64,
    ) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(arg(format!("ridge parameter must be positive, got {eta}")));
        }
        if matches!(normalized.mode(), NormalizationMode::Diffusion { .. }) {
            return Err(arg("ridge regression needs a symmetric kernel"));
        }
        let n = normalized.n();
        if ds.n() != n || p.nrows() != n || raw_k.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: ds.n(),
            });
        }
        let y = analog_vector(ds, q, transform)?;
        let nf = n as f64;
        let g = Mat::from_fn(n, n, |i, j| p[(i, j)] / nf + if i == j { eta } else { 0.0 });
        let c = spd_solve(g.as_ref(), &y.values)?;
        let c_scaled = Mat::from_fn(n, 1, |j, _| c[j] / nf);
        let w = normalized.apply_right(Some(raw_k), c_scaled.as_ref())?;
        let weights = (0..n).map(|j| w[(j, 0)]).collect();
        Ok(Self {
            normalized: normalized.clone(),
            weights,
            eta,
            q,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lead(&self) -> usize {
        self.q
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_batch(Points::new(x, x.len().max(1)))?[0])
    }

    pub fn predict_batch(&self, queries: Points<'_>) -> Result<Vec<f64>> {
        let kernel = self.normalized.kernel();
        if queries.dim != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: queries.dim,
            });
        }
        let raw = kernel.cross_matrix(queries)?;
        Ok((0..raw.nrows())
            .map(|r| {
                let row: Vec<f64> = (0..raw.ncols()).map(|j| raw[(r, j)]).collect();
                self.normalized.query_scale(&row) * dot(&row, &self.weights)
            })
            .collect())
    }
}

/// One-shot kernel ridge regression forecast at `x`.
#[allow(clippy::too_many_arguments)]
pub fn fit_predict_krr(
    normalized: &NormalizedKernel,
    raw_k: MatRef<'_, f64>,
    p: MatRef<'_, f64>,
    ds: &TimeSeriesDataset,
    q: usize,
    eta: f64,
    x: &[f64],
) -> Result<f64> {
    KrrModel::fit(normalized, raw_k, p, ds, q, ResponseTransform::Identity, eta)?.predict(x)
}
