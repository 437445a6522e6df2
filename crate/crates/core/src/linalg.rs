// Thin wrappers over the dense linear-algebra backend.

use alloc::format;
use alloc::vec::Vec;

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues in decreasing order.
pub(crate) struct SymEigen {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors as columns, same order as `values`.
    pub vectors: Mat<f64>,
}

/// Leading `count` eigenpairs of the symmetric matrix `a` (lower triangle is read).
pub(crate) fn sym_eigen_top(a: MatRef<'_, f64>, count: usize) -> Result<SymEigen> {
    let n = a.nrows();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let count = count.min(n);
    let values = (0..count).map(|k| s[n - 1 - k]).collect();
    let vectors = Mat::from_fn(n, count, |i, k| u[(i, n - 1 - k)]);
    Ok(SymEigen { values, vectors })
}

/// Flips each column so its first entry of non-negligible magnitude is positive.
pub(crate) fn fix_signs(v: &mut Mat<f64>) {
    for k in 0..v.ncols() {
        let max = (0..v.nrows()).map(|i| v[(i, k)].abs()).fold(0.0, f64::max);
        let pivot = (0..v.nrows()).map(|i| v[(i, k)]).find(|x| x.abs() > 1e-8 * max);
        if let Some(p) = pivot {
            if p < 0.0 {
                for i in 0..v.nrows() {
                    v[(i, k)] = -v[(i, k)];
                }
            }
        }
    }
}

pub(crate) fn matmul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    a * b
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub(crate) fn spd_solve(a: MatRef<'_, f64>, b: &[f64]) -> Result<Vec<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Numerical(format!("matrix is not positive definite: {e:?}")))?;
    let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    llt.solve_in_place(rhs.as_mut());
    Ok((0..b.len()).map(|i| rhs[(i, 0)]).collect())
}

/// Forces exact symmetry by averaging mirrored entries.
pub(crate) fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
