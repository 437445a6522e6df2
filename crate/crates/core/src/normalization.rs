//! Markov normalizations of a symmetric base kernel.
//!
//! All integrals against the sampling measure carry an explicit `1/n` weight,
//! so "Markov" means `(1/n) sum_j p(x, x_j) = 1`.
//!
//! * Symmetric (bistochastic):
//!   `u(x) = <k(x, .)>`, `v(x) = <k(x, .) / u>`,
//!   `p(x, x') = <k(x, .) k(., x') / v> / (u(x) u(x'))`.
//! * Diffusion maps with exponent `alpha`:
//!   `v(x) = <k(x, .) / u^alpha>`, `p(x, x') = k(x, x') / (v(x) u(x')^alpha)`,
//!   reversible with respect to `d = v / u^alpha`.
//!
//! Here `<g> = (1/n) sum_j g(x_j)`.

use alloc::format;
use alloc::vec::Vec;

use faer::{Mat, MatRef};

use crate::error::{arg, Result};
use crate::kernels::FittedKernel;
use crate::linalg::{matmul, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalizationMode {
    None,
    SymmetricMarkov,
    Diffusion { alpha: f64 },
}

fn check_kernel_matrix(k: MatRef<'_, f64>) -> Result<()> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(arg("kernel matrix must be square and nonempty"));
    }
    for j in 0..n {
        if !(k[(j, j)] > 0.0) {
            return Err(arg(format!("kernel diagonal entry {j} is not positive")));
        }
        for i in 0..n {
            let v = k[(i, j)];
            if !(v >= 0.0 && v.is_finite()) {
                return Err(arg(format!("kernel entry ({i}, {j}) = {v} is negative or not finite")));
            }
        }
    }
    Ok(())
}

fn row_means(k: MatRef<'_, f64>) -> Vec<f64> {
    let n = k.ncols() as f64;
    (0..k.nrows())
        .map(|i| (0..k.ncols()).map(|j| k[(i, j)]).sum::<f64>() / n)
        .collect()
}

fn weighted_row_means(k: MatRef<'_, f64>, w: &[f64]) -> Vec<f64> {
    let n = k.ncols() as f64;
    (0..k.nrows())
        .map(|i| (0..k.ncols()).map(|j| k[(i, j)] / w[j]).sum::<f64>() / n)
        .collect()
}

/// Symmetric Markov normalization; returns `(P, u, v)` with `P[i][j] = p(x_i, x_j)`.
pub fn markov_normalize(k: MatRef<'_, f64>) -> Result<(Mat<f64>, Vec<f64>, Vec<f64>)> {
    check_kernel_matrix(k)?;
    let n = k.nrows();
    let u = row_means(k);
    let v = weighted_row_means(k, &u);
    let scaled = Mat::from_fn(n, n, |i, j| k[(i, j)] / v[j]);
    let mut p = matmul(scaled.as_ref(), k);
    drop(scaled);
    let nf = n as f64;
    for j in 0..n {
        for i in 0..n {
            p[(i, j)] /= nf * u[i] * u[j];
        }
    }
    symmetrize(&mut p);
    Ok((p, u, v))
}

/// `(P, u, v, d)` of a diffusion-maps normalization.
pub type DiffusionParts = (Mat<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// Diffusion-maps normalization; returns `(P, u, v, d)`.
pub fn diffusion_normalize(k: MatRef<'_, f64>, alpha: f64) -> Result<DiffusionParts> {
    check_kernel_matrix(k)?;
    if !alpha.is_finite() {
        return Err(arg("diffusion exponent must be finite"));
    }
    let n = k.nrows();
    let u = row_means(k);
    let u_alpha: Vec<f64> = u.iter().map(|x| libm::pow(*x, alpha)).collect();
    let v = weighted_row_means(k, &u_alpha);
    let p = Mat::from_fn(n, n, |i, j| k[(i, j)] / (v[i] * u_alpha[j]));
    let d = v.iter().zip(&u_alpha).map(|(v, ua)| v / ua).collect();
    Ok((p, u, v, d))
}

/// A base kernel together with its normalization functions at the training points.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedKernel {
    kernel: FittedKernel,
    mode: NormalizationMode,
    u: Vec<f64>,
    v: Vec<f64>,
    d: Vec<f64>,
}

impl NormalizedKernel {
    /// Normalizes the training kernel matrix `k` of `kernel`; returns the fitted
    /// normalization and the normalized training matrix.
    pub fn fit(kernel: FittedKernel, k: MatRef<'_, f64>, mode: NormalizationMode) -> Result<(Self, Mat<f64>)> {
        if k.nrows() != kernel.n() {
            return Err(arg("kernel matrix does not match the training set"));
        }
        let (p, u, v, d) = match mode {
            NormalizationMode::None => {
                check_kernel_matrix(k)?;
                (k.to_owned(), Vec::new(), Vec::new(), Vec::new())
            }
            NormalizationMode::SymmetricMarkov => {
                let (p, u, v) = markov_normalize(k)?;
                (p, u, v, Vec::new())
            }
            NormalizationMode::Diffusion { alpha } => diffusion_normalize(k, alpha)?,
        };
        Ok((Self { kernel, mode, u, v, d }, p))
    }

    /// Reassembles a normalized kernel from stored parts.
    pub fn from_parts(
        kernel: FittedKernel,
        mode: NormalizationMode,
        u: Vec<f64>,
        v: Vec<f64>,
        d: Vec<f64>,
    ) -> Result<Self> {
        let n = kernel.n();
        let expect = |len: usize, needed: bool| if needed { len == n } else { len == 0 };
        let ok = match mode {
            NormalizationMode::None => expect(u.len(), false) && expect(v.len(), false) && expect(d.len(), false),
            NormalizationMode::SymmetricMarkov => {
                expect(u.len(), true) && expect(v.len(), true) && expect(d.len(), false)
            }
            NormalizationMode::Diffusion { .. } => {
                expect(u.len(), true) && expect(v.len(), true) && expect(d.len(), true)
            }
        };
        if !ok || u.iter().chain(&v).chain(&d).any(|x| !(*x > 0.0)) {
            return Err(arg("normalization data does not match mode or is not positive"));
        }
        Ok(Self { kernel, mode, u, v, d })
    }

    pub fn kernel(&self) -> &FittedKernel {
        &self.kernel
    }

    pub fn mode(&self) -> NormalizationMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    pub fn u_values(&self) -> &[f64] {
        &self.u
    }

    pub fn v_values(&self) -> &[f64] {
        &self.v
    }

    /// Detailed-balance density (diffusion mode only; empty otherwise).
    pub fn d_values(&self) -> &[f64] {
        &self.d
    }

    fn alpha(&self) -> f64 {
        match self.mode {
            NormalizationMode::Diffusion { alpha } => alpha,
            _ => 0.0,
        }
    }

    /// Factor `s(x)` such that the normalized row is `s(x) * raw(x)^T M` for a
    /// fixed training-side operator `M` (see [`Self::apply_right`]).
    pub(crate) fn query_scale(&self, raw: &[f64]) -> f64 {
        let n = raw.len() as f64;
        match self.mode {
            NormalizationMode::None => 1.0,
            NormalizationMode::SymmetricMarkov => n / raw.iter().sum::<f64>(),
            NormalizationMode::Diffusion { alpha } => {
                let v: f64 = raw.iter().zip(&self.u).map(|(k, u)| k / libm::pow(*u, alpha)).sum();
                n / v
            }
        }
    }

    /// `M b` for the training-side operator `M`; `raw_k` is the unnormalized
    /// training matrix (needed by the symmetric mode only).
    pub(crate) fn apply_right(&self, raw_k: Option<MatRef<'_, f64>>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let n = self.n();
        match self.mode {
            NormalizationMode::None => Ok(b.to_owned()),
            NormalizationMode::Diffusion { alpha } => Ok(Mat::from_fn(n, b.ncols(), |j, c| {
                b[(j, c)] / libm::pow(self.u[j], alpha)
            })),
            NormalizationMode::SymmetricMarkov => {
                let k = match raw_k {
                    Some(k) => k,
                    None => return Err(arg("symmetric normalization needs the training kernel matrix")),
                };
                let scaled_b = Mat::from_fn(n, b.ncols(), |j, c| b[(j, c)] / self.u[j]);
                let mut out = matmul(k, scaled_b.as_ref());
                let nf = n as f64;
                for c in 0..out.ncols() {
                    for j in 0..n {
                        out[(j, c)] /= nf * self.v[j];
                    }
                }
                Ok(out)
            }
        }
    }

    /// Normalized kernel vector `(p(x, x_1), ..., p(x, x_n))` for an arbitrary `x`,
    /// with all normalization integrals taken against the training sample.
    pub fn oos_normalized_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let raw = self.kernel.row(x)?;
        let n = self.n();
        let nf = n as f64;
        match self.mode {
            NormalizationMode::None => Ok(raw),
            NormalizationMode::Diffusion { .. } => {
                let alpha = self.alpha();
                let v_x: f64 = raw
                    .iter()
                    .zip(&self.u)
                    .map(|(k, u)| k / libm::pow(*u, alpha))
                    .sum::<f64>()
                    / nf;
                Ok(raw
                    .iter()
                    .zip(&self.u)
                    .map(|(k, u)| k / (v_x * libm::pow(*u, alpha)))
                    .collect())
            }
            NormalizationMode::SymmetricMarkov => {
                let u_x = raw.iter().sum::<f64>() / nf;
                let t: Vec<f64> = raw.iter().zip(&self.v).map(|(k, v)| k / v).collect();
                let pts = self.kernel.points();
                let mut row = Vec::with_capacity(n);
                for j in 0..n {
                    let kj = self.kernel.row(pts.get(j))?;
                    let mid: f64 = t.iter().zip(&kj).map(|(a, b)| a * b).sum::<f64>() / nf;
                    row.push(mid / (u_x * self.u[j]));
                }
                Ok(row)
            }
        }
    }
}
