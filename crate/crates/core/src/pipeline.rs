//! Kernel, normalization and eigendecomposition in one call.

use faer::Mat;

use crate::error::{arg, Result};
use crate::kernels::{FittedKernel, KernelSpec};
use crate::normalization::{NormalizationMode, NormalizedKernel};
use crate::spectral::{Basis, BiorthogonalBasis, RankRule, SpectralBasis, RANK_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConfig {
    pub kernel: KernelSpec,
    pub normalization: NormalizationMode,
    pub ell: usize,
    /// Relative eigenvalue cutoff below which the basis counts as rank deficient.
    pub rank_tolerance: f64,
    /// Keep only the eigenpairs above the cutoff when fewer than `ell` qualify.
    pub truncate_to_rank: bool,
}

impl BasisConfig {
    pub fn new(kernel: KernelSpec, normalization: NormalizationMode, ell: usize) -> Self {
        Self {
            kernel,
            normalization,
            ell,
            rank_tolerance: RANK_TOLERANCE,
            truncate_to_rank: false,
        }
    }
}

/// A basis together with the training matrices it was computed from.
pub struct BasisBuild {
    pub basis: Basis,
    /// Unnormalized training kernel matrix.
    pub kernel_matrix: Mat<f64>,
    /// Normalized training matrix (`P`; diffusion mode gives the non-symmetric one).
    pub normalized_matrix: Mat<f64>,
}

/// Builds the eigenbasis of `cfg` on row-major `covariates`; delay-embedded
/// covariates must have a dimension divisible by `cfg.kernel.delays`.
pub fn build_basis(covariates: &[f64], dim: usize, cfg: &BasisConfig) -> Result<Basis> {
    Ok(build_basis_full(covariates, dim, cfg)?.basis)
}

pub fn build_basis_full(covariates: &[f64], dim: usize, cfg: &BasisConfig) -> Result<BasisBuild> {
    if cfg.kernel.delays == 0 || !dim.is_multiple_of(cfg.kernel.delays) {
        return Err(arg("covariate dimension is not a multiple of the number of delays"));
    }
    let kernel = FittedKernel::fit(&cfg.kernel, covariates, dim)?;
    let k = kernel.matrix();
    let (nk, p) = NormalizedKernel::fit(kernel, k.as_ref(), cfg.normalization)?;
    let rule = RankRule {
        tolerance: cfg.rank_tolerance,
        truncate: cfg.truncate_to_rank,
    };
    let basis = match cfg.normalization {
        NormalizationMode::Diffusion { .. } => {
            Basis::Biorthogonal(BiorthogonalBasis::with_rule(nk, k.as_ref(), cfg.ell, rule)?)
        }
        _ => Basis::Symmetric(SpectralBasis::with_rule(nk, k.as_ref(), p.as_ref(), cfg.ell, rule)?),
    };
    Ok(BasisBuild {
        basis,
        kernel_matrix: k,
        normalized_matrix: p,
    })
}
