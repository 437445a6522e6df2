//! Time-ordered training and verification data.
//!
//! Covariates are stored row-major: sample `j` occupies
//! `covariates[j * dim..(j + 1) * dim]`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{arg, Error, Result};

/// Covariate vectors `x_j` and scalar responses `y_j` sampled every `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    covariates: Vec<f64>,
    dim: usize,
    responses: Vec<f64>,
    dt: f64,
}

impl TimeSeriesDataset {
    /// Builds a dataset from row-major covariates of dimension `dim`.
    pub fn new(covariates: Vec<f64>, dim: usize, responses: Vec<f64>, dt: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("covariate dimension must be positive".into()));
        }
        if responses.is_empty() {
            return Err(Error::Validation("dataset must contain at least one sample".into()));
        }
        if covariates.len() != responses.len() * dim {
            return Err(Error::Validation(format!(
                "{} covariate values do not form {} rows of dimension {}",
                covariates.len(),
                responses.len(),
                dim
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Validation(format!(
                "sampling interval must be positive, got {dt}"
            )));
        }
        if let Some(j) = covariates.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite covariate in sample {}",
                j / dim + 1
            )));
        }
        if let Some(j) = responses.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite response in sample {}", j + 1)));
        }
        Ok(Self {
            covariates,
            dim,
            responses,
            dt,
        })
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// Flat row-major covariate storage.
    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn covariate(&self, j: usize) -> &[f64] {
        &self.covariates[j * self.dim..(j + 1) * self.dim]
    }

    /// Copy of this dataset with responses replaced.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        Self::new(self.covariates.clone(), self.dim, responses, self.dt)
    }

    /// Leading `len` samples.
    pub fn head(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.n() {
            return Err(arg(format!("cannot take {len} samples from a dataset of {}", self.n())));
        }
        Self::new(
            self.covariates[..len * self.dim].to_vec(),
            self.dim,
            self.responses[..len].to_vec(),
            self.dt,
        )
    }
}

/// Scalar response transform applied element-wise before forecasting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseTransform {
    Identity,
    /// Indicator of the exceedance event `y > threshold`.
    Indicator {
        threshold: f64,
    },
}

impl ResponseTransform {
    pub fn apply(&self, y: f64) -> f64 {
        match *self {
            ResponseTransform::Identity => y,
            ResponseTransform::Indicator { threshold } => {
                if y > threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, ResponseTransform::Indicator { .. })
    }
}

/// The `q`-step shifted, zero-padded response sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogVector {
    pub values: Vec<f64>,
    pub q: usize,
    pub tau: f64,
}

/// `values[j] = gamma(y[j + q])` while `j + q < n`, zero afterwards.
pub fn analog_vector(ds: &TimeSeriesDataset, q: usize, gamma: ResponseTransform) -> Result<AnalogVector> {
    let n = ds.n();
    if q > n {
        return Err(arg(format!("shift {q} exceeds sample count {n}")));
    }
    let mut values = Vec::with_capacity(n);
    values.extend(ds.responses[q..].iter().map(|&y| gamma.apply(y)));
    values.resize(n, 0.0);
    Ok(AnalogVector {
        values,
        q,
        tau: q as f64 * ds.dt,
    })
}

/// Delay-coordinate embedding with `q_delays` lags.
///
/// Sample `j` (for `j >= q_delays - 1`, zero-based) becomes
/// `(x_j, x_{j-1}, ..., x_{j-q_delays+1})` and keeps response `y_j`.
pub fn delay_embed(ds: &TimeSeriesDataset, q_delays: usize) -> Result<TimeSeriesDataset> {
    let n = ds.n();
    if q_delays == 0 || q_delays > n {
        return Err(arg(format!("number of delays must lie in 1..={n}, got {q_delays}")));
    }
    let m = ds.dim;
    let n_out = n - q_delays + 1;
    let mut covariates = Vec::with_capacity(n_out * m * q_delays);
    for j in (q_delays - 1)..n {
        for lag in 0..q_delays {
            covariates.extend_from_slice(ds.covariate(j - lag));
        }
    }
    let responses = ds.responses[q_delays - 1..].to_vec();
    TimeSeriesDataset::new(covariates, m * q_delays, responses, ds.dt)
}

/// Mean and population (1/n) standard deviation of the responses.
pub fn empirical_moments(ds: &TimeSeriesDataset) -> (f64, f64) {
    moments(&ds.responses)
}

pub(crate) fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn scalar(xs: &[f64], ys: &[f64]) -> TimeSeriesDataset {
        TimeSeriesDataset::new(xs.to_vec(), 1, ys.to_vec(), 0.1).unwrap()
    }

    #[test]
    fn analog_vector_shifts_and_pads() {
        let ds = scalar(&[0.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let a = analog_vector(&ds, 2, ResponseTransform::Identity).unwrap();
        assert_eq!(a.values, vec![3.0, 4.0, 5.0, 0.0, 0.0]);
        assert!((a.tau - 0.2).abs() < 1e-15);
    }

    #[test]
    fn analog_vector_edge_shifts() {
        let ds = scalar(&[0.0; 3], &[1.0, 2.0, 3.0]);
        assert_eq!(
            analog_vector(&ds, 0, ResponseTransform::Identity).unwrap().values,
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            analog_vector(&ds, 3, ResponseTransform::Identity).unwrap().values,
            vec![0.0; 3]
        );
        assert!(matches!(
            analog_vector(&ds, 4, ResponseTransform::Identity),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn indicator_padding_stays_zero() {
        // threshold below zero: transformed values are 1 but the pad is still 0
        let ds = scalar(&[0.0; 3], &[1.0, 2.0, 3.0]);
        let a = analog_vector(&ds, 1, ResponseTransform::Indicator { threshold: -1.0 }).unwrap();
        assert_eq!(a.values, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn delay_embedding_stacks_lags() {
        let ds = scalar(&[10.0, 20.0, 30.0, 40.0], &[1.0, 2.0, 3.0, 4.0]);
        let e = delay_embed(&ds, 2).unwrap();
        assert_eq!(e.n(), 3);
        assert_eq!(e.dim(), 2);
        assert_eq!(e.covariates(), &[20.0, 10.0, 30.0, 20.0, 40.0, 30.0]);
        assert_eq!(e.responses(), &[2.0, 3.0, 4.0]);
        assert_eq!(delay_embed(&ds, 1).unwrap(), ds);
        assert!(delay_embed(&ds, 5).is_err());
    }

    #[test]
    fn moments_use_population_std() {
        assert_eq!(moments(&[1.0, 1.0, 1.0]), (1.0, 0.0));
        assert_eq!(moments(&[0.0, 2.0]), (1.0, 1.0));
        let (m, s) = moments(&[3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m, 4.5);
        // sqrt(((1.5^2 + 0.5^2) * 2) / 4) = sqrt(1.25)
        assert!((s - 1.118033988749895).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_input() {
        assert!(TimeSeriesDataset::new(vec![], 1, vec![], 0.1).is_err());
        assert!(TimeSeriesDataset::new(vec![1.0], 1, vec![f64::NAN], 0.1).is_err());
        assert!(TimeSeriesDataset::new(vec![1.0], 1, vec![1.0], 0.0).is_err());
        assert!(TimeSeriesDataset::new(vec![1.0, 2.0], 1, vec![1.0], 0.1).is_err());
    }
}
