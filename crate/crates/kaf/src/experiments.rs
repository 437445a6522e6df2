//! Reference experiment setups shared by the CLI, recipes and acceptance suite.

use std::sync::Arc;

use anyhow::Result;
use kaf_core::eval::{evaluate_hybrid_with_features, evaluate_with_features};
use kaf_core::kernels::Points;
use kaf_core::systems::{generate_circle, l63_dataset, l63_trajectory, random_angle, CovariateSelector, L63Config};
use kaf_core::{
    build_basis, delay_embed, fit_kpcr, Bandwidth, Basis, BasisConfig, CircleParams, KernelSpec, NormalizationMode,
    RegressionOracle, ResponseTransform, SkillReport, TimeSeriesDataset,
};

/// Seed of training trajectories; verification uses `TRAIN_SEED + 1`.
pub const TRAIN_SEED: u64 = 1;
pub const VERIF_SEED: u64 = 2;

pub const CIRCLE_N: usize = 1000;
pub const CIRCLE_M: usize = 10_000;
pub const CIRCLE_DT: f64 = 2.0 * std::f64::consts::PI / 100.0;
pub const L63_N: usize = 6400;
pub const L63_DT: f64 = 0.01;

/// Circle training and verification sets with independent random phases.
pub fn circle_pair(
    params: &CircleParams,
    n: usize,
    m: usize,
    dt: f64,
) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
    let train = generate_circle(params, n, dt, random_angle(TRAIN_SEED))?;
    let verif = generate_circle(params, m, dt, random_angle(VERIF_SEED))?;
    Ok((train, verif))
}

/// Lead steps nearest to the phase advances `alpha * tau` in `phases`.
pub fn circle_leads(params: &CircleParams, dt: f64, phases: &[f64]) -> Vec<usize> {
    phases
        .iter()
        .map(|p| (p / (params.alpha * dt)).round() as usize)
        .collect()
}

/// Radial Gaussian basis without normalization, keeping rounding-level eigenvalues.
pub fn circle_config(epsilon: f64, ell: usize) -> BasisConfig {
    let mut cfg = BasisConfig::new(
        KernelSpec::gaussian(Bandwidth::Fixed(epsilon)),
        NormalizationMode::None,
        ell,
    );
    cfg.rank_tolerance = 0.0;
    cfg
}

/// Skill of nested truncations of one basis, one report per entry of `ells`.
pub fn ell_sweep(
    basis: &Basis,
    train: &TimeSeriesDataset,
    verif: &TimeSeriesDataset,
    leads: &[usize],
    transform: ResponseTransform,
    ells: &[usize],
    oracle: Option<&dyn RegressionOracle>,
) -> Vec<Result<SkillReport>> {
    let features = basis.features(Points::new(verif.covariates(), verif.dim()));
    ells.iter()
        .map(|&ell| {
            let features = features.as_ref().map_err(Clone::clone)?;
            let truncated = Arc::new(basis.truncate(ell)?);
            let model = fit_kpcr(truncated, train, leads, transform)?;
            let cols = features.subcols(0, ell);
            Ok(evaluate_with_features(&model, cols, verif, oracle)?)
        })
        .collect()
}

/// Skill of the hybrid estimator on one basis, one report per entry of `etas`.
pub fn eta_sweep(
    basis: Arc<Basis>,
    train: &TimeSeriesDataset,
    verif: &TimeSeriesDataset,
    leads: &[usize],
    transform: ResponseTransform,
    etas: &[f64],
    oracle: Option<&dyn RegressionOracle>,
) -> Result<Vec<Result<SkillReport>>> {
    let features = basis.features(Points::new(verif.covariates(), verif.dim()))?;
    let model = fit_kpcr(basis, train, leads, transform)?;
    Ok(etas
        .iter()
        .map(|&eta| {
            Ok(evaluate_hybrid_with_features(
                &model,
                features.as_ref(),
                verif,
                oracle,
                eta,
            )?)
        })
        .collect())
}

/// Covariates and all three state components of a Lorenz 63 run.
pub struct L63Run {
    /// Covariate-only dataset (response is the first component).
    pub data: TimeSeriesDataset,
    /// State components aligned with `data`.
    pub components: [Vec<f64>; 3],
}

impl L63Run {
    /// Generates `n` samples after delay embedding with `delays` lags.
    pub fn generate(n: usize, dt: f64, seed: u64, covariate: CovariateSelector, delays: usize) -> Result<Self> {
        let raw_n = n + delays - 1;
        let states = l63_trajectory(&L63Config::new(raw_n, dt, seed))?;
        let data = delay_embed(&l63_dataset(&states, dt, covariate, 0)?, delays)?;
        let components = std::array::from_fn(|c| states[delays - 1..].iter().map(|s| s[c]).collect());
        Ok(Self { data, components })
    }

    /// The dataset with state component `c` as response.
    pub fn with_response(&self, c: usize) -> Result<TimeSeriesDataset> {
        Ok(self.data.with_responses(self.components[c].clone())?)
    }
}

/// Variable-bandwidth Markov kernel with all parameters tuned from data.
pub fn l63_config(ell: usize, delays: usize) -> BasisConfig {
    let spec = KernelSpec::variable_bandwidth(Bandwidth::Auto).with_delays(delays);
    BasisConfig::new(spec, NormalizationMode::SymmetricMarkov, ell)
}

/// Builds an L63 basis on `train` covariates.
pub fn l63_basis(train: &L63Run, ell: usize, delays: usize) -> Result<Arc<Basis>> {
    Ok(Arc::new(build_basis(
        train.data.covariates(),
        train.data.dim(),
        &l63_config(ell, delays),
    )?))
}
