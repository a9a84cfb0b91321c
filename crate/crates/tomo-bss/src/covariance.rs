//! Covariance estimation from observation stacks (classical and robust) and
//! the Gram-matrix centering used inside kernel PCA.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, C64, CMatrix};

/// Classical sample covariance (1/M)·G·G^H of an N×M stack.
pub fn sample_covariance(stack: &CMatrix) -> Result<CMatrix> {
    let m = stack.ncols();
    if m == 0 {
        return Err(Error::invalid("empty stack"));
    }
    let c = stack * stack.adjoint() * C64::new(1.0 / m as f64, 0.0);
    Ok(hermitian_part(&c))
}

/// Spatial sign covariance: every column is normalized to unit Euclidean norm
/// before the outer-product average, discarding per-look gain. Robust against
/// heavy-tailed amplitude contamination; scale information is lost by design
/// (`sign_covariance(c·G) = sign_covariance(G)` for any nonzero c).
///
/// Columns with norm below 1e-300 are skipped; the number of skipped columns
/// is returned alongside the matrix.
pub fn sign_covariance(stack: &CMatrix) -> Result<(CMatrix, usize)> {
    let (n, m) = stack.shape();
    if m == 0 {
        return Err(Error::invalid("empty stack"));
    }
    let mut c = CMatrix::zeros(n, n);
    let mut skipped = 0usize;
    for col in stack.column_iter() {
        let norm = col.norm();
        if norm < 1e-300 {
            skipped += 1;
            continue;
        }
        let inv = C64::new(1.0 / (norm * norm), 0.0);
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] += inv * col[i] * col[j].conj();
            }
        }
    }
    if skipped == m {
        return Err(Error::invalid("all stack columns are zero"));
    }
    c *= C64::new(1.0 / m as f64, 0.0);
    Ok((hermitian_part(&c), skipped))
}

/// Centers a Gram matrix in feature space: K ← H·K·H with H = I − J/N
/// (J all ones). Row and column sums of the result are zero; the map is
/// idempotent.
pub fn center_kernel(k: &CMatrix) -> CMatrix {
    let n = k.nrows();
    let nf = n as f64;
    // row means, column means, grand mean
    let mut row_mean = vec![C64::new(0.0, 0.0); n];
    let mut col_mean = vec![C64::new(0.0, 0.0); n];
    let mut grand = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let x = k[(i, j)];
            row_mean[i] += x;
            col_mean[j] += x;
            grand += x;
        }
    }
    for v in row_mean.iter_mut() {
        *v /= C64::new(nf, 0.0);
    }
    for v in col_mean.iter_mut() {
        *v /= C64::new(nf, 0.0);
    }
    grand /= C64::new(nf * nf, 0.0);
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = k[(i, j)] - row_mean[i] - col_mean[j] + grand;
        }
    }
    hermitian_part(&out)
}
