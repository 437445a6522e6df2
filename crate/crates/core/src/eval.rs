//! Forecast skill on verification data.
//!
//! At lead `q` the forecast from `x~_j` is compared with `y~_{j+q}` for
//! `j < m - q`; the final `q` verification points have no ground truth and are
//! dropped.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use faer::MatRef;

use crate::dataset::TimeSeriesDataset;
use crate::error::{arg, Error, Result};
use crate::forecast::{clip_probability, ForecastModel};
use crate::kernels::Points;
use crate::systems::{circle_oracle, CircleParams};

/// `sqrt((1/m) sum_j |pred_j - truth_j|^2)`.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    Ok(libm::sqrt(mean_square(pred, truth)?))
}

/// `(1/m) sum_j |pred_j - oracle_j|^2`.
pub fn excess_gen_error(pred: &[f64], oracle: &[f64]) -> Result<f64> {
    mean_square(pred, oracle)
}

fn mean_square(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(arg("cannot score an empty sequence"));
    }
    Ok(a.iter().zip(b).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / a.len() as f64)
}

/// The exact regression function `Z_tau` of a test problem.
pub trait RegressionOracle {
    fn value(&self, x: &[f64], tau: f64) -> Result<f64>;
}

/// Regression function of the circle rotation observed through `cos`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleOracle {
    pub params: CircleParams,
}

impl RegressionOracle for CircleOracle {
    fn value(&self, x: &[f64], tau: f64) -> Result<f64> {
        if x.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: x.len(),
            });
        }
        Ok(circle_oracle(&self.params, x[0], tau)?.0)
    }
}

/// Per-lead skill scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillReport {
    pub lead_steps: Vec<usize>,
    pub lead_times: Vec<f64>,
    pub rmse: Vec<f64>,
    /// `rmse` divided by the training std of the transformed response.
    pub normalized_rmse: Vec<f64>,
    /// RMS of the error estimate, when the model carries one.
    pub estimated_error_rms: Vec<Option<f64>>,
    /// Mean-square distance to the regression function, for oracle problems.
    pub excess_gen_error: Vec<Option<f64>>,
    /// Echo of the run configuration.
    pub params: Vec<(String, String)>,
}

impl SkillReport {
    pub fn len(&self) -> usize {
        self.lead_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lead_steps.is_empty()
    }

    /// First lead time at which the normalized RMSE reaches `level`.
    pub fn crossing_time(&self, level: f64) -> Option<f64> {
        self.normalized_rmse
            .iter()
            .position(|e| *e >= level)
            .map(|k| self.lead_times[k])
    }
}

/// Scores every lead of `model` on `verif`.
pub fn evaluate_forecast(
    model: &ForecastModel,
    verif: &TimeSeriesDataset,
    oracle: Option<&dyn RegressionOracle>,
) -> Result<SkillReport> {
    let dim = model.basis().dim();
    if verif.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: verif.dim(),
        });
    }
    let features = model.features(Points::new(verif.covariates(), dim))?;
    evaluate_with_features(model, features.as_ref(), verif, oracle)
}

/// As [`evaluate_forecast`], with the out-of-sample features of `verif` precomputed.
pub fn evaluate_with_features(
    model: &ForecastModel,
    features: MatRef<'_, f64>,
    verif: &TimeSeriesDataset,
    oracle: Option<&dyn RegressionOracle>,
) -> Result<SkillReport> {
    score(
        model,
        features,
        verif,
        oracle,
        |k| model.predict_from_features(features, k),
        true,
    )
}

/// Scores the hybrid estimator with regularization `eta` at every lead.
/// Error estimates are not reported.
pub fn evaluate_hybrid_with_features(
    model: &ForecastModel,
    features: MatRef<'_, f64>,
    verif: &TimeSeriesDataset,
    oracle: Option<&dyn RegressionOracle>,
    eta: f64,
) -> Result<SkillReport> {
    score(
        model,
        features,
        verif,
        oracle,
        |k| model.predict_hybrid_from_features(features, k, eta),
        false,
    )
}

fn score(
    model: &ForecastModel,
    features: MatRef<'_, f64>,
    verif: &TimeSeriesDataset,
    oracle: Option<&dyn RegressionOracle>,
    predict: impl Fn(usize) -> Result<Vec<f64>>,
    with_error: bool,
) -> Result<SkillReport> {
    let m = verif.n();
    if features.nrows() != m || features.ncols() != model.basis().ell() {
        return Err(arg("feature matrix does not match verification data and basis"));
    }
    let std = model.response_stats().1;
    if !(std > 0.0) {
        return Err(Error::DegenerateData("training response has zero variance".into()));
    }
    let transform = model.transform();
    let dt = model.dt();
    let mut report = SkillReport {
        lead_steps: Vec::new(),
        lead_times: Vec::new(),
        rmse: Vec::new(),
        normalized_rmse: Vec::new(),
        estimated_error_rms: Vec::new(),
        excess_gen_error: Vec::new(),
        params: Vec::new(),
    };
    for (k, &q) in model.leads().iter().enumerate() {
        if q >= m {
            return Err(arg(format!("lead {q} leaves no verification pairs among {m} samples")));
        }
        let count = m - q;
        let mut pred = predict(k)?;
        pred.truncate(count);
        if transform.is_indicator() {
            pred.iter_mut().for_each(|p| *p = clip_probability(*p));
        }
        let truth: Vec<f64> = verif.responses()[q..].iter().map(|y| transform.apply(*y)).collect();
        let e = rmse(&pred, &truth)?;
        let est = match model.error_model() {
            Some(_) if with_error => {
                let eps = model.error_from_features(features, k)?;
                Some(libm::sqrt(
                    eps[..count].iter().map(|v| v * v).sum::<f64>() / count as f64,
                ))
            }
            _ => None,
        };
        let tau = q as f64 * dt;
        let excess = match oracle {
            Some(o) => {
                let z = (0..count)
                    .map(|j| o.value(verif.covariate(j), tau))
                    .collect::<Result<Vec<f64>>>()?;
                Some(excess_gen_error(&pred, &z)?)
            }
            None => None,
        };
        report.lead_steps.push(q);
        report.lead_times.push(tau);
        report.rmse.push(e);
        report.normalized_rmse.push(e / std);
        report.estimated_error_rms.push(est);
        report.excess_gen_error.push(excess);
    }
    Ok(report)
}

/// Boxed circle oracle for dynamic dispatch.
pub fn circle_regression_oracle(params: CircleParams) -> Box<dyn RegressionOracle> {
    Box::new(CircleOracle { params })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355339059327378).abs() < 1e-12);
        assert_eq!(rmse(&[1.0], &[4.0]).unwrap(), 3.0);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn excess_error_examples() {
        let z = [0.3, -0.1, 0.7];
        assert_eq!(excess_gen_error(&z, &z).unwrap(), 0.0);
        let shifted: Vec<f64> = z.iter().map(|v| v + 0.25).collect();
        assert!((excess_gen_error(&shifted, &z).unwrap() - 0.0625).abs() < 1e-15);
        assert!(excess_gen_error(&z, &z[..2]).is_err());
    }

    #[test]
    fn circle_oracle_dispatch() {
        let o = circle_regression_oracle(CircleParams::default());
        let tau = 1.0 / CircleParams::default().alpha;
        assert!((o.value(&[0.5], tau).unwrap() - 0.5 * libm::sin(1.0)).abs() < 1e-15);
        assert!(o.value(&[0.5, 0.1], tau).is_err());
    }

    #[test]
    fn crossing_time_finds_first_level() {
        let r = SkillReport {
            lead_steps: alloc::vec![0, 1, 2, 3],
            lead_times: alloc::vec![0.0, 0.5, 1.0, 1.5],
            rmse: alloc::vec![0.0; 4],
            normalized_rmse: alloc::vec![0.1, 0.5, 0.7, 0.65],
            estimated_error_rms: alloc::vec![None; 4],
            excess_gen_error: alloc::vec![None; 4],
            params: Vec::new(),
        };
        assert_eq!(r.crossing_time(0.6), Some(1.0));
        assert_eq!(r.crossing_time(0.9), None);
    }
}
