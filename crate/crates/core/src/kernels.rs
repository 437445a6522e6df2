//! Unnormalized kernels on covariate space.
//!
//! Two families are supported:
//!
//! * radial Gaussian, `k(x, x') = exp(-L(x, x') / epsilon)`;
//! * variable-bandwidth Gaussian,
//!   `k(x, x') = exp(-L(x, x') / (epsilon r(x) r(x')))` with
//!   `r = q^{-1/m_tilde}` and `q` a Gaussian kernel density estimate.
//!
//! `L` is the squared Euclidean distance divided by the number of delays, so
//! on delay-embedded covariates it is the block-averaged squared distance.
//!
//! Parameters left as [`Bandwidth::Auto`] are tuned from the data by
//! maximizing the log-log slope of the kernel sum
//! `S(eps) = n^{-2} sum_ij exp(-d_ij / eps)`; the maximal slope also gives the
//! dimension estimate `m_tilde = 2 * slope`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use faer::Mat;

use crate::error::{arg, Error, Result};

/// Above this sample count, bandwidth tuning runs on a strided subsample.
pub const TUNING_SUBSAMPLE_THRESHOLD: usize = 5000;
pub const TUNING_SUBSAMPLE_SIZE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    VariableBandwidth,
}

/// A positive parameter, either given or tuned from data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

impl Bandwidth {
    fn fixed(self) -> Option<f64> {
        match self {
            Bandwidth::Auto => None,
            Bandwidth::Fixed(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub epsilon: Bandwidth,
    /// Density-estimation bandwidth (variable-bandwidth family only).
    pub epsilon_tilde: Bandwidth,
    /// Intrinsic dimension estimate (variable-bandwidth family only).
    pub m_tilde: Bandwidth,
    /// Number of delays the covariates were embedded with; 1 means none.
    pub delays: usize,
}

impl KernelSpec {
    pub fn gaussian(epsilon: Bandwidth) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            epsilon,
            epsilon_tilde: Bandwidth::Auto,
            m_tilde: Bandwidth::Auto,
            delays: 1,
        }
    }

    pub fn variable_bandwidth(epsilon: Bandwidth) -> Self {
        Self {
            family: KernelFamily::VariableBandwidth,
            ..Self::gaussian(epsilon)
        }
    }

    pub fn with_delays(mut self, delays: usize) -> Self {
        self.delays = delays;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.delays == 0 {
            return Err(arg("delays must be at least 1"));
        }
        for (name, b) in [
            ("epsilon", self.epsilon),
            ("epsilon_tilde", self.epsilon_tilde),
            ("m_tilde", self.m_tilde),
        ] {
            if let Some(v) = b.fixed() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(arg(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Variable bandwidths at the training points together with the resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthInfo {
    pub r_values: Vec<f64>,
    pub epsilon: f64,
    pub epsilon_tilde: f64,
    pub m_tilde: f64,
}

#[inline]
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-|x - x'|^2 / epsilon)`.
pub fn gaussian_eval(epsilon: f64, x: &[f64], xp: &[f64]) -> Result<f64> {
    if x.len() != xp.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: xp.len(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(arg(format!("bandwidth must be positive, got {epsilon}")));
    }
    Ok(libm::exp(-sq_dist(x, xp) / epsilon))
}

/// `exp(-|x - x'|^2 / (epsilon r(x) r(x')))`.
pub fn vb_eval(epsilon: f64, r_x: f64, r_xp: f64, x: &[f64], xp: &[f64]) -> Result<f64> {
    if !(r_x > 0.0 && r_xp > 0.0) {
        return Err(arg("variable bandwidths must be positive"));
    }
    if x.len() != xp.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: xp.len(),
        });
    }
    Ok(libm::exp(-sq_dist(x, xp) / (epsilon * (r_x * r_xp))))
}

/// Row-major point set borrowed from a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        debug_assert!(dim > 0 && data.len().is_multiple_of(dim));
        Self { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, j: usize) -> &'a [f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }
}

fn density_scale(epsilon_tilde: f64, m_tilde: f64) -> f64 {
    libm::pow(PI * epsilon_tilde, -m_tilde / 2.0)
}

fn density_with_scale(points: Points<'_>, epsilon_tilde: f64, scale: f64, delays: f64, x: &[f64]) -> f64 {
    let n = points.len();
    let sum: f64 = (0..n)
        .map(|j| libm::exp(-sq_dist(x, points.get(j)) / delays / epsilon_tilde))
        .sum();
    scale * sum / n as f64
}

/// Kernel density estimate `q(x) = (pi eps~)^{-m~/2} n^{-1} sum_j exp(-|x - x_j|^2 / eps~)`.
pub fn density_estimate(points: Points<'_>, epsilon_tilde: f64, m_tilde: f64, x: &[f64]) -> f64 {
    density_with_scale(points, epsilon_tilde, density_scale(epsilon_tilde, m_tilde), 1.0, x)
}

/// `r_j = q(x_j)^{-1/m~}` at every training point.
pub fn bandwidth_function(points: Points<'_>, epsilon_tilde: f64, m_tilde: f64) -> Vec<f64> {
    bandwidths(points, epsilon_tilde, m_tilde, 1.0)
}

fn bandwidths(points: Points<'_>, epsilon_tilde: f64, m_tilde: f64, delays: f64) -> Vec<f64> {
    let scale = density_scale(epsilon_tilde, m_tilde);
    (0..points.len())
        .map(|j| {
            libm::pow(
                density_with_scale(points, epsilon_tilde, scale, delays, points.get(j)),
                -1.0 / m_tilde,
            )
        })
        .collect()
}

/// Strict upper triangle of a pairwise (scaled) squared-distance matrix.
#[derive(Debug, Clone)]
pub struct PairwiseDistances {
    n: usize,
    values: Vec<f64>,
}

impl PairwiseDistances {
    pub fn from_points(points: Points<'_>) -> Self {
        Self::build(points, |_, _| 1.0)
    }

    /// Distances `|x_i - x_j|^2 / (r_i r_j)` used to tune the variable-bandwidth kernel.
    pub fn from_points_scaled(points: Points<'_>, r: &[f64]) -> Self {
        Self::build(points, |i, j| r[i] * r[j])
    }

    fn build(points: Points<'_>, scale: impl Fn(usize, usize) -> f64) -> Self {
        let n = points.len();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                values.push(sq_dist(points.get(i), points.get(j)) / scale(i, j));
            }
        }
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn scaled(mut self, factor: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self
    }

    /// `S(eps) = n^{-2} sum_{i,j} exp(-d_ij / eps)`, diagonal included.
    pub fn kernel_sum(&self, epsilon: f64) -> f64 {
        let off: f64 = self.values.iter().map(|d| libm::exp(-d / epsilon)).sum();
        let n = self.n as f64;
        (n + 2.0 * off) / (n * n)
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (libm::log10(lo), libm::log10(hi));
    (0..count)
        .map(|k| libm::pow(10.0, a + (b - a) * k as f64 / (count - 1) as f64))
        .collect()
}

/// Candidate grid: 200 log-spaced bandwidths in `[1e-8, 1e8]`.
pub fn default_tuning_grid() -> Vec<f64> {
    log_grid(1e-8, 1e8, 200)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuning {
    pub epsilon: f64,
    pub m_tilde: f64,
}

/// Picks the grid bandwidth maximizing the centered slope of `log S` against `log eps`.
pub fn tune_bandwidth(dists: &PairwiseDistances, grid: &[f64]) -> Result<Tuning> {
    if grid.len() < 3 {
        return Err(arg("tuning grid needs at least 3 candidates"));
    }
    if grid.iter().any(|e| !(*e > 0.0)) {
        return Err(arg("tuning grid must be positive"));
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(0.0, f64::max);
    if libm::log10(hi / lo) < 4.0 - 1e-9 {
        return Err(arg("tuning grid must span at least 4 decades"));
    }
    if dists.n < 2 || dists.values.iter().all(|d| *d == 0.0) {
        return Err(Error::DegenerateData("all sample points coincide".into()));
    }
    let log_s: Vec<f64> = grid.iter().map(|&e| libm::log(dists.kernel_sum(e))).collect();
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 1..grid.len() - 1 {
        let slope = (log_s[k + 1] - log_s[k - 1]) / (libm::log(grid[k + 1]) - libm::log(grid[k - 1]));
        if slope > best.1 {
            best = (k, slope);
        }
    }
    if !(best.1 > 1e-6) {
        return Err(Error::TuningFailure(format!(
            "kernel-sum slope never exceeds {:e}",
            best.1
        )));
    }
    Ok(Tuning {
        epsilon: grid[best.0],
        m_tilde: 2.0 * best.1,
    })
}

fn tuning_points(points: Points<'_>) -> Vec<f64> {
    let n = points.len();
    if n <= TUNING_SUBSAMPLE_THRESHOLD {
        return points.data.to_vec();
    }
    let mut sub = Vec::with_capacity(TUNING_SUBSAMPLE_SIZE * points.dim);
    for k in 0..TUNING_SUBSAMPLE_SIZE {
        sub.extend_from_slice(points.get(k * n / TUNING_SUBSAMPLE_SIZE));
    }
    sub
}

/// A kernel with all parameters resolved, bound to its training covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedKernel {
    family: KernelFamily,
    epsilon: f64,
    delays: usize,
    covariates: Vec<f64>,
    dim: usize,
    /// Present for the variable-bandwidth family.
    bandwidth: Option<BandwidthInfo>,
}

impl FittedKernel {
    /// Resolves automatic parameters against the training covariates.
    pub fn fit(spec: &KernelSpec, covariates: &[f64], dim: usize) -> Result<Self> {
        spec.validate()?;
        if dim == 0 || covariates.is_empty() || !covariates.len().is_multiple_of(dim) {
            return Err(arg("covariates must be a nonempty row-major array"));
        }
        let points = Points::new(covariates, dim);
        let delays = spec.delays as f64;
        let grid = default_tuning_grid();
        let sub = tuning_points(points);
        let sub_points = Points::new(&sub, dim);

        let (epsilon, bandwidth) = match spec.family {
            KernelFamily::Gaussian => {
                let epsilon = match spec.epsilon.fixed() {
                    Some(e) => e,
                    None => {
                        tune_bandwidth(&PairwiseDistances::from_points(sub_points).scaled(1.0 / delays), &grid)?.epsilon
                    }
                };
                (epsilon, None)
            }
            KernelFamily::VariableBandwidth => {
                let (epsilon_tilde, m_tilde) = match (spec.epsilon_tilde.fixed(), spec.m_tilde.fixed()) {
                    (Some(e), Some(m)) => (e, m),
                    (e, m) => {
                        let t =
                            tune_bandwidth(&PairwiseDistances::from_points(sub_points).scaled(1.0 / delays), &grid)?;
                        (e.unwrap_or(t.epsilon), m.unwrap_or(t.m_tilde))
                    }
                };
                let r_values = bandwidths(points, epsilon_tilde, m_tilde, delays);
                let epsilon = match spec.epsilon.fixed() {
                    Some(e) => e,
                    None => {
                        let r_sub = if sub.len() == covariates.len() {
                            r_values.clone()
                        } else {
                            bandwidths_at(points, sub_points, epsilon_tilde, m_tilde, delays)
                        };
                        let d = PairwiseDistances::from_points_scaled(sub_points, &r_sub).scaled(1.0 / delays);
                        tune_bandwidth(&d, &grid)?.epsilon
                    }
                };
                if r_values.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return Err(Error::Numerical("bandwidth function is not positive and finite".into()));
                }
                (
                    epsilon,
                    Some(BandwidthInfo {
                        r_values,
                        epsilon,
                        epsilon_tilde,
                        m_tilde,
                    }),
                )
            }
        };
        Ok(Self {
            family: spec.family,
            epsilon,
            delays: spec.delays,
            covariates: covariates.to_vec(),
            dim,
            bandwidth,
        })
    }

    /// Reassembles a fitted kernel from stored parts.
    pub fn from_parts(
        family: KernelFamily,
        epsilon: f64,
        delays: usize,
        covariates: Vec<f64>,
        dim: usize,
        bandwidth: Option<BandwidthInfo>,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || delays == 0 || dim == 0 || covariates.is_empty() || !covariates.len().is_multiple_of(dim)
        {
            return Err(arg("inconsistent kernel parts"));
        }
        let n = covariates.len() / dim;
        match (family, &bandwidth) {
            (KernelFamily::Gaussian, None) => {}
            (KernelFamily::VariableBandwidth, Some(b)) if b.r_values.len() == n => {}
            _ => return Err(arg("bandwidth data does not match kernel family")),
        }
        Ok(Self {
            family,
            epsilon,
            delays,
            covariates,
            dim,
            bandwidth,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delays(&self) -> usize {
        self.delays
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.covariates.len() / self.dim
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn points(&self) -> Points<'_> {
        Points::new(&self.covariates, self.dim)
    }

    pub fn bandwidth(&self) -> Option<&BandwidthInfo> {
        self.bandwidth.as_ref()
    }

    /// Spec echo with every parameter fixed.
    pub fn resolved_spec(&self) -> KernelSpec {
        let (et, mt) = match &self.bandwidth {
            Some(b) => (Bandwidth::Fixed(b.epsilon_tilde), Bandwidth::Fixed(b.m_tilde)),
            None => (Bandwidth::Auto, Bandwidth::Auto),
        };
        KernelSpec {
            family: self.family,
            epsilon: Bandwidth::Fixed(self.epsilon),
            epsilon_tilde: et,
            m_tilde: mt,
            delays: self.delays,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Bandwidth `r(x)`; 1 for the fixed-bandwidth family.
    fn r_at(&self, x: &[f64]) -> f64 {
        match &self.bandwidth {
            None => 1.0,
            Some(b) => {
                let scale = density_scale(b.epsilon_tilde, b.m_tilde);
                let q = density_with_scale(self.points(), b.epsilon_tilde, scale, self.delays as f64, x);
                libm::pow(q, -1.0 / b.m_tilde)
            }
        }
    }

    #[inline]
    fn value(&self, d2: f64, r_a: f64, r_b: f64) -> f64 {
        let l = d2 / self.delays as f64;
        match self.family {
            KernelFamily::Gaussian => libm::exp(-l / self.epsilon),
            KernelFamily::VariableBandwidth => libm::exp(-l / (self.epsilon * (r_a * r_b))),
        }
    }

    fn r_train(&self, j: usize) -> f64 {
        self.bandwidth.as_ref().map_or(1.0, |b| b.r_values[j])
    }

    /// Kernel values `k(x, x_j)` against every training point.
    pub fn row(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let r_x = self.r_at(x);
        let pts = self.points();
        Ok((0..self.n())
            .map(|j| self.value(sq_dist(x, pts.get(j)), r_x, self.r_train(j)))
            .collect())
    }

    /// Kernel between two arbitrary points.
    pub fn eval(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(xp)?;
        Ok(self.value(sq_dist(x, xp), self.r_at(x), self.r_at(xp)))
    }

    /// Symmetric training kernel matrix, one evaluation per unordered pair.
    pub fn matrix(&self) -> Mat<f64> {
        let n = self.n();
        let pts = self.points();
        let mut k = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            k[(j, j)] = 1.0;
            for i in j + 1..n {
                let v = self.value(sq_dist(pts.get(i), pts.get(j)), self.r_train(i), self.r_train(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Kernel values between query points (rows) and training points (columns).
    pub fn cross_matrix(&self, queries: Points<'_>) -> Result<Mat<f64>> {
        if queries.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: queries.dim,
            });
        }
        let m = queries.len();
        let n = self.n();
        let pts = self.points();
        let r_q: Vec<f64> = (0..m).map(|i| self.r_at(queries.get(i))).collect();
        let mut k = Mat::<f64>::zeros(m, n);
        for j in 0..n {
            let xj = pts.get(j);
            let rj = self.r_train(j);
            for i in 0..m {
                k[(i, j)] = self.value(sq_dist(queries.get(i), xj), r_q[i], rj);
            }
        }
        Ok(k)
    }
}

fn bandwidths_at(train: Points<'_>, at: Points<'_>, epsilon_tilde: f64, m_tilde: f64, delays: f64) -> Vec<f64> {
    let scale = density_scale(epsilon_tilde, m_tilde);
    (0..at.len())
        .map(|j| {
            libm::pow(
                density_with_scale(train, epsilon_tilde, scale, delays, at.get(j)),
                -1.0 / m_tilde,
            )
        })
        .collect()
}

/// Training kernel matrix of a fitted kernel.
pub fn kernel_matrix(kernel: &FittedKernel) -> Mat<f64> {
    kernel.matrix()
}
