//! Leading eigenpairs of empirical kernel operators and their Nyström extensions.
//!
//! Eigenvectors are normalized against the sampling measure,
//! `(1/n) phi_i . phi_k = delta_ik`, so `phi = sqrt(n) * (unit eigenvector)`.
//!
//! Out-of-sample functions are evaluated through precomputed weights `W`
//! (`n x l`) with `psi(x) = s(x) * k_raw(x)^T W`, where `k_raw` is the
//! unnormalized kernel row and `s` the query-side normalization factor. This
//! equals the defining sum over normalized kernel rows exactly in exact
//! arithmetic and costs `O(n l)` per query instead of `O(n^2)`.

use alloc::format;
use alloc::vec::Vec;

use faer::{Mat, MatRef};

use crate::error::{arg, Error, Result};
use crate::kernels::Points;
use crate::linalg::{fix_signs, matmul, sym_eigen_top};
use crate::normalization::{diffusion_normalize, NormalizationMode, NormalizedKernel};

/// Default relative rank cutoff: eigenvalues at or below this fraction of the
/// largest one count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Query rows processed per block in batched feature evaluation.
const QUERY_BLOCK: usize = 512;

/// Leading `ell` eigenpairs of `p / n` for symmetric `p`, eigenvalues
/// decreasing, eigenvectors scaled to unit norm under the `1/n` weight.
pub fn eigendecompose(p: MatRef<'_, f64>, ell: usize) -> Result<(Vec<f64>, Mat<f64>)> {
    eigendecompose_with_tolerance(p, ell, RANK_TOLERANCE)
}

/// Treatment of eigenvalues at or below `tolerance` times the largest one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankRule {
    /// Relative cutoff in `[0, 1)`; `0` accepts every strictly positive eigenvalue.
    pub tolerance: f64,
    /// Return fewer than the requested pairs instead of failing.
    pub truncate: bool,
}

impl RankRule {
    pub fn strict(tolerance: f64) -> Self {
        Self {
            tolerance,
            truncate: false,
        }
    }
}

impl Default for RankRule {
    fn default() -> Self {
        Self::strict(RANK_TOLERANCE)
    }
}

/// As [`eigendecompose`] with relative rank cutoff `tolerance`; `0` accepts
/// every strictly positive eigenvalue.
pub fn eigendecompose_with_tolerance(p: MatRef<'_, f64>, ell: usize, tolerance: f64) -> Result<(Vec<f64>, Mat<f64>)> {
    eigendecompose_with_rule(p, ell, RankRule::strict(tolerance))
}

/// As [`eigendecompose`] under `rule`; a truncating rule may return fewer
/// than `ell` pairs but never zero.
pub fn eigendecompose_with_rule(p: MatRef<'_, f64>, ell: usize, rule: RankRule) -> Result<(Vec<f64>, Mat<f64>)> {
    let tolerance = rule.tolerance;
    if !(0.0..1.0).contains(&tolerance) {
        return Err(arg(format!("rank tolerance must lie in [0, 1), got {tolerance}")));
    }
    let n = p.nrows();
    if p.ncols() != n || n == 0 {
        return Err(arg("matrix must be square and nonempty"));
    }
    if ell == 0 || ell > n {
        return Err(arg(format!("number of eigenpairs must lie in 1..={n}, got {ell}")));
    }
    let nf = n as f64;
    let scaled = Mat::from_fn(n, n, |i, j| p[(i, j)] / nf);
    let mut eig = sym_eigen_top(scaled.as_ref(), ell)?;
    drop(scaled);
    let usable = usable_rank(&eig.values, tolerance);
    let keep = match (usable < ell, rule.truncate) {
        (false, _) => ell,
        (true, true) if usable > 0 => usable,
        (true, _) => return Err(Error::RankDeficient { requested: ell, usable }),
    };
    eig.values.truncate(keep);
    fix_signs(&mut eig.vectors);
    let root = libm::sqrt(nf);
    let phis = Mat::from_fn(n, keep, |i, k| eig.vectors[(i, k)] * root);
    Ok((eig.values, phis))
}

/// Count of leading `values` above `tolerance` times the first.
fn usable_rank(values: &[f64], tolerance: f64) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return 0;
    }
    values.iter().take_while(|l| **l > tolerance * top).count()
}

/// Numerical rank of `p / n` under [`RANK_TOLERANCE`].
pub fn numerical_rank(p: MatRef<'_, f64>) -> Result<usize> {
    let n = p.nrows();
    let nf = n as f64;
    let scaled = Mat::from_fn(n, n, |i, j| p[(i, j)] / nf);
    let eig = sym_eigen_top(scaled.as_ref(), n)?;
    Ok(usable_rank(&eig.values, RANK_TOLERANCE))
}

/// `s(x_q) * K_raw(queries, train) * weights`, in row blocks.
fn extend(nk: &NormalizedKernel, weights: MatRef<'_, f64>, queries: Points<'_>) -> Result<Mat<f64>> {
    let kernel = nk.kernel();
    if queries.dim != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: queries.dim,
        });
    }
    let m = queries.len();
    let ell = weights.ncols();
    let mut out = Mat::<f64>::zeros(m, ell);
    let mut start = 0;
    while start < m {
        let end = (start + QUERY_BLOCK).min(m);
        let block = Points::new(&queries.data[start * queries.dim..end * queries.dim], queries.dim);
        let raw = kernel.cross_matrix(block)?;
        let prod = matmul(raw.as_ref(), weights);
        for r in 0..end - start {
            let row: Vec<f64> = (0..raw.ncols()).map(|j| raw[(r, j)]).collect();
            let s = nk.query_scale(&row);
            for c in 0..ell {
                out[(start + r, c)] = s * prod[(r, c)];
            }
        }
        start = end;
    }
    Ok(out)
}

fn column_scaled(a: MatRef<'_, f64>, scale: impl Fn(usize) -> f64) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, k| a[(i, k)] * scale(k))
}

fn select_columns(a: MatRef<'_, f64>, ell: usize) -> Mat<f64> {
    Mat::from_fn(a.nrows(), ell, |i, k| a[(i, k)])
}

/// Eigenbasis of a symmetric (unnormalized or symmetric-Markov) kernel operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    lambdas: Vec<f64>,
    phis: Mat<f64>,
    normalized: NormalizedKernel,
    weights: Mat<f64>,
}

impl SpectralBasis {
    /// Decomposes the normalized training matrix `p` of `normalized`;
    /// `raw_k` is the unnormalized training matrix.
    pub fn new(normalized: NormalizedKernel, raw_k: MatRef<'_, f64>, p: MatRef<'_, f64>, ell: usize) -> Result<Self> {
        Self::with_tolerance(normalized, raw_k, p, ell, RANK_TOLERANCE)
    }

    /// As [`Self::new`] with a relative rank cutoff.
    pub fn with_tolerance(
        normalized: NormalizedKernel,
        raw_k: MatRef<'_, f64>,
        p: MatRef<'_, f64>,
        ell: usize,
        tolerance: f64,
    ) -> Result<Self> {
        Self::with_rule(normalized, raw_k, p, ell, RankRule::strict(tolerance))
    }

    pub fn with_rule(
        normalized: NormalizedKernel,
        raw_k: MatRef<'_, f64>,
        p: MatRef<'_, f64>,
        ell: usize,
        rule: RankRule,
    ) -> Result<Self> {
        if matches!(normalized.mode(), NormalizationMode::Diffusion { .. }) {
            return Err(arg("diffusion-normalized kernels need the biorthogonal basis"));
        }
        if p.nrows() != normalized.n() {
            return Err(arg("normalized matrix does not match the kernel"));
        }
        let (lambdas, phis) = eigendecompose_with_rule(p, ell, rule)?;
        let n = normalized.n() as f64;
        let b = column_scaled(phis.as_ref(), |k| 1.0 / (n * libm::sqrt(lambdas[k])));
        let weights = normalized.apply_right(Some(raw_k), b.as_ref())?;
        Ok(Self {
            lambdas,
            phis,
            normalized,
            weights,
        })
    }

    /// Reassembles a basis from stored parts.
    pub fn from_parts(
        normalized: NormalizedKernel,
        lambdas: Vec<f64>,
        phis: Mat<f64>,
        weights: Mat<f64>,
    ) -> Result<Self> {
        let n = normalized.n();
        let ell = lambdas.len();
        if ell == 0 || phis.nrows() != n || phis.ncols() != ell || weights.nrows() != n || weights.ncols() != ell {
            return Err(arg("inconsistent spectral basis parts"));
        }
        if lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(arg("stored eigenvalues must be positive"));
        }
        Ok(Self {
            lambdas,
            phis,
            normalized,
            weights,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `phis[(j, i)] = phi_i(x_j)`.
    pub fn phis(&self) -> MatRef<'_, f64> {
        self.phis.as_ref()
    }

    /// Nyström weights: `psi(x) = s(x) * k_raw(x)^T weights`.
    pub fn weights(&self) -> MatRef<'_, f64> {
        self.weights.as_ref()
    }

    pub fn normalized_kernel(&self) -> &NormalizedKernel {
        &self.normalized
    }

    pub fn n(&self) -> usize {
        self.phis.nrows()
    }

    pub fn ell(&self) -> usize {
        self.lambdas.len()
    }

    /// Leading `ell` eigenpairs of this basis.
    pub fn truncate(&self, ell: usize) -> Result<Self> {
        if ell == 0 || ell > self.ell() {
            return Err(arg(format!("cannot truncate {} eigenpairs to {ell}", self.ell())));
        }
        Ok(Self {
            lambdas: self.lambdas[..ell].to_vec(),
            phis: select_columns(self.phis.as_ref(), ell),
            normalized: self.normalized.clone(),
            weights: select_columns(self.weights.as_ref(), ell),
        })
    }

    /// `psi_i(x) = k(x) . phi_i / (n lambda_i^{1/2})` by the defining sum over the
    /// normalized kernel row.
    pub fn nystrom_psi(&self, x: &[f64]) -> Result<Vec<f64>> {
        let row = self.normalized.oos_normalized_row(x)?;
        let n = self.n() as f64;
        Ok((0..self.ell())
            .map(|i| {
                let dot: f64 = row.iter().enumerate().map(|(j, k)| k * self.phis[(j, i)]).sum();
                dot / (n * libm::sqrt(self.lambdas[i]))
            })
            .collect())
    }

    /// `psi_i` at every query point (`m x l`), through the precomputed weights.
    pub fn psi_batch(&self, queries: Points<'_>) -> Result<Mat<f64>> {
        extend(&self.normalized, self.weights.as_ref(), queries)
    }
}

/// Biorthonormal eigenbases of a diffusion-normalized (non-symmetric) kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthogonalBasis {
    etas: Vec<f64>,
    xis: Mat<f64>,
    xi_primes: Mat<f64>,
    normalized: NormalizedKernel,
    weights: Mat<f64>,
}

/// Symmetric conjugate `k_hat = d^{1/2} P d^{-1/2}` computed directly from `K`
/// so that it is exactly symmetric.
fn conjugate_kernel(k: MatRef<'_, f64>, u: &[f64], v: &[f64], alpha: f64) -> Mat<f64> {
    let n = k.nrows();
    let scale: Vec<f64> = (0..n)
        .map(|i| libm::sqrt(v[i]) * libm::pow(u[i], alpha / 2.0))
        .collect();
    let mut out = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let x = k[(i, j)] / (scale[i] * scale[j]);
            out[(i, j)] = x;
            out[(j, i)] = x;
        }
    }
    out
}

/// `(eta, xi, xi', d)`: eigenvalues, both biorthonormal bases and the degrees.
pub type BiorthogonalParts = (Vec<f64>, Mat<f64>, Mat<f64>, Vec<f64>);

/// Builds the diffusion normalization of `k` with exponent `alpha` and the
/// biorthonormal bases `xi = d^{-1/2} phi_hat`, `xi' = d^{1/2} phi_hat` from the
/// leading `ell` eigenpairs of `k_hat / n`.
pub fn biorthogonal_decompose(k: MatRef<'_, f64>, alpha: f64, ell: usize) -> Result<BiorthogonalParts> {
    biorthogonal_decompose_with_tolerance(k, alpha, ell, RANK_TOLERANCE)
}

pub fn biorthogonal_decompose_with_tolerance(
    k: MatRef<'_, f64>,
    alpha: f64,
    ell: usize,
    tolerance: f64,
) -> Result<BiorthogonalParts> {
    biorthogonal_decompose_with_rule(k, alpha, ell, RankRule::strict(tolerance))
}

pub fn biorthogonal_decompose_with_rule(
    k: MatRef<'_, f64>,
    alpha: f64,
    ell: usize,
    rule: RankRule,
) -> Result<BiorthogonalParts> {
    let (_, u, v, d) = diffusion_normalize(k, alpha)?;
    let k_hat = conjugate_kernel(k, &u, &v, alpha);
    let (etas, hat_phis) = eigendecompose_with_rule(k_hat.as_ref(), ell, rule)?;
    let n = k.nrows();
    let ell = etas.len();
    let xis = Mat::from_fn(n, ell, |j, i| hat_phis[(j, i)] / libm::sqrt(d[j]));
    let xi_primes = Mat::from_fn(n, ell, |j, i| hat_phis[(j, i)] * libm::sqrt(d[j]));
    Ok((etas, xis, xi_primes, d))
}

impl BiorthogonalBasis {
    /// `normalized` must be in diffusion mode; `raw_k` is its training matrix.
    pub fn new(normalized: NormalizedKernel, raw_k: MatRef<'_, f64>, ell: usize) -> Result<Self> {
        Self::with_tolerance(normalized, raw_k, ell, RANK_TOLERANCE)
    }

    pub fn with_tolerance(
        normalized: NormalizedKernel,
        raw_k: MatRef<'_, f64>,
        ell: usize,
        tolerance: f64,
    ) -> Result<Self> {
        Self::with_rule(normalized, raw_k, ell, RankRule::strict(tolerance))
    }

    pub fn with_rule(normalized: NormalizedKernel, raw_k: MatRef<'_, f64>, ell: usize, rule: RankRule) -> Result<Self> {
        let alpha = match normalized.mode() {
            NormalizationMode::Diffusion { alpha } => alpha,
            _ => return Err(arg("biorthogonal basis needs a diffusion-normalized kernel")),
        };
        if raw_k.nrows() != normalized.n() {
            return Err(arg("kernel matrix does not match the training set"));
        }
        let (etas, xis, xi_primes, _) = biorthogonal_decompose_with_rule(raw_k, alpha, ell, rule)?;
        let n = normalized.n() as f64;
        let b = column_scaled(xis.as_ref(), |k| 1.0 / (n * libm::sqrt(etas[k])));
        let weights = normalized.apply_right(None, b.as_ref())?;
        Ok(Self {
            etas,
            xis,
            xi_primes,
            normalized,
            weights,
        })
    }

    pub fn from_parts(
        normalized: NormalizedKernel,
        etas: Vec<f64>,
        xis: Mat<f64>,
        xi_primes: Mat<f64>,
        weights: Mat<f64>,
    ) -> Result<Self> {
        let n = normalized.n();
        let ell = etas.len();
        let shape_ok = |m: &Mat<f64>| m.nrows() == n && m.ncols() == ell;
        if ell == 0 || !shape_ok(&xis) || !shape_ok(&xi_primes) || !shape_ok(&weights) {
            return Err(arg("inconsistent biorthogonal basis parts"));
        }
        if !matches!(normalized.mode(), NormalizationMode::Diffusion { .. }) || etas.iter().any(|e| !(*e > 0.0)) {
            return Err(arg(
                "biorthogonal basis needs a diffusion kernel and positive eigenvalues",
            ));
        }
        Ok(Self {
            etas,
            xis,
            xi_primes,
            normalized,
            weights,
        })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn xis(&self) -> MatRef<'_, f64> {
        self.xis.as_ref()
    }

    pub fn xi_primes(&self) -> MatRef<'_, f64> {
        self.xi_primes.as_ref()
    }

    /// Detailed-balance density at the training points.
    pub fn d_values(&self) -> &[f64] {
        self.normalized.d_values()
    }

    /// Symmetric eigenvectors `phi_hat = d^{1/2} xi`.
    pub fn hat_phis(&self) -> Mat<f64> {
        let d = self.d_values();
        Mat::from_fn(self.n(), self.ell(), |j, i| self.xis[(j, i)] * libm::sqrt(d[j]))
    }

    pub fn weights(&self) -> MatRef<'_, f64> {
        self.weights.as_ref()
    }

    pub fn normalized_kernel(&self) -> &NormalizedKernel {
        &self.normalized
    }

    pub fn n(&self) -> usize {
        self.xis.nrows()
    }

    pub fn ell(&self) -> usize {
        self.etas.len()
    }

    pub fn truncate(&self, ell: usize) -> Result<Self> {
        if ell == 0 || ell > self.ell() {
            return Err(arg(format!("cannot truncate {} eigenpairs to {ell}", self.ell())));
        }
        Ok(Self {
            etas: self.etas[..ell].to_vec(),
            xis: select_columns(self.xis.as_ref(), ell),
            xi_primes: select_columns(self.xi_primes.as_ref(), ell),
            normalized: self.normalized.clone(),
            weights: select_columns(self.weights.as_ref(), ell),
        })
    }

    /// `theta_i(x) = eta_i^{-1/2} (1/n) sum_j w(x, x_j) xi_i(x_j)` by the defining sum.
    pub fn theta(&self, x: &[f64]) -> Result<Vec<f64>> {
        let row = self.normalized.oos_normalized_row(x)?;
        let n = self.n() as f64;
        Ok((0..self.ell())
            .map(|i| {
                let dot: f64 = row.iter().enumerate().map(|(j, w)| w * self.xis[(j, i)]).sum();
                dot / (n * libm::sqrt(self.etas[i]))
            })
            .collect())
    }

    /// `theta_i` at every query point (`m x l`).
    pub fn theta_batch(&self, queries: Points<'_>) -> Result<Mat<f64>> {
        extend(&self.normalized, self.weights.as_ref(), queries)
    }

    /// `sum_i coeffs[i] / eta_i^{1/2} theta_i(x)`, with `coeffs[i] = <xi'_i, f>`.
    pub fn nystrom_nonsym(&self, x: &[f64], coeffs: &[f64]) -> Result<f64> {
        if coeffs.len() != self.ell() {
            return Err(Error::DimensionMismatch {
                expected: self.ell(),
                got: coeffs.len(),
            });
        }
        let theta = self.theta(x)?;
        Ok(theta
            .iter()
            .zip(coeffs)
            .zip(&self.etas)
            .map(|((t, c), e)| c * t / libm::sqrt(*e))
            .sum())
    }
}

/// Either eigenbasis, behind one interface for forecasting.
///
/// In both cases a forecast of `f` is `sum_i <left_i, f> / lambda_i^{1/2} feature_i(x)`
/// with `<a, b> = a . b / n`; features at training points equal
/// `lambda_i^{1/2} right_i(x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    Symmetric(SpectralBasis),
    Biorthogonal(BiorthogonalBasis),
}

impl Basis {
    pub fn n(&self) -> usize {
        match self {
            Basis::Symmetric(b) => b.n(),
            Basis::Biorthogonal(b) => b.n(),
        }
    }

    pub fn ell(&self) -> usize {
        match self {
            Basis::Symmetric(b) => b.ell(),
            Basis::Biorthogonal(b) => b.ell(),
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        match self {
            Basis::Symmetric(b) => b.lambdas(),
            Basis::Biorthogonal(b) => b.etas(),
        }
    }

    /// Vectors paired with the data when projecting (`phi` or `xi'`).
    pub fn left(&self) -> MatRef<'_, f64> {
        match self {
            Basis::Symmetric(b) => b.phis(),
            Basis::Biorthogonal(b) => b.xi_primes(),
        }
    }

    /// Eigenvectors the forecast is expanded in (`phi` or `xi`).
    pub fn right(&self) -> MatRef<'_, f64> {
        match self {
            Basis::Symmetric(b) => b.phis(),
            Basis::Biorthogonal(b) => b.xis(),
        }
    }

    pub fn normalized_kernel(&self) -> &NormalizedKernel {
        match self {
            Basis::Symmetric(b) => b.normalized_kernel(),
            Basis::Biorthogonal(b) => b.normalized_kernel(),
        }
    }

    pub fn dim(&self) -> usize {
        self.normalized_kernel().kernel().dim()
    }

    /// Out-of-sample features (`psi` or `theta`), one row per query.
    pub fn features(&self, queries: Points<'_>) -> Result<Mat<f64>> {
        match self {
            Basis::Symmetric(b) => b.psi_batch(queries),
            Basis::Biorthogonal(b) => b.theta_batch(queries),
        }
    }

    /// Features of a single point by the defining sum (no precomputed weights).
    pub fn features_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Basis::Symmetric(b) => b.nystrom_psi(x),
            Basis::Biorthogonal(b) => b.theta(x),
        }
    }

    /// `(1/n) left^T y`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let left = self.left();
        let n = self.n();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        Ok((0..self.ell())
            .map(|i| (0..n).map(|j| left[(j, i)] * y[j]).sum::<f64>() / n as f64)
            .collect())
    }

    pub fn truncate(&self, ell: usize) -> Result<Self> {
        Ok(match self {
            Basis::Symmetric(b) => Basis::Symmetric(b.truncate(ell)?),
            Basis::Biorthogonal(b) => Basis::Biorthogonal(b.truncate(ell)?),
        })
    }
}
