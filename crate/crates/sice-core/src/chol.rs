//! Cholesky factorization and routines derived from it (log-determinant,
//! SPD inverse). Non-positive-definite input is reported distinctly from
//! asymmetric input.

use alloc::vec;

use crate::error::{Error, Result};
use crate::fm;
use crate::mat::{check_symmetric, Mat, SYM_TOL};

/// Lower-triangular `L` with `L L^T = S` for symmetric positive definite `S`.
pub fn cholesky(s: &Mat) -> Result<Mat> {
    check_symmetric(s, SYM_TOL)?;
    let d = s.rows();
    let mut l = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut sum = s[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite { pivot: i });
                }
                l[(i, i)] = fm::sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// `log det(S)` for symmetric positive definite `S`, via Cholesky.
pub fn chol_logdet(s: &Mat) -> Result<f64> {
    let l = cholesky(s)?;
    let mut ld = 0.0;
    for i in 0..s.rows() {
        ld += fm::ln(l[(i, i)]);
    }
    Ok(2.0 * ld)
}

/// Inverse of a symmetric positive definite matrix via its Cholesky
/// factor; the result is symmetrized.
pub fn chol_inverse(s: &Mat) -> Result<Mat> {
    let l = cholesky(s)?;
    let d = s.rows();
    // Solve L W = I column by column, then L^T X = W.
    let mut inv = Mat::zeros(d, d);
    let mut col = vec![0.0; d];
    for j in 0..d {
        for x in col.iter_mut() {
            *x = 0.0;
        }
        col[j] = 1.0;
        // forward substitution
        for i in 0..d {
            let mut sum = col[i];
            for k in 0..i {
                sum -= l[(i, k)] * col[k];
            }
            col[i] = sum / l[(i, i)];
        }
        // back substitution with L^T
        for i in (0..d).rev() {
            let mut sum = col[i];
            for k in (i + 1)..d {
                sum -= l[(k, i)] * col[k];
            }
            col[i] = sum / l[(i, i)];
        }
        for i in 0..d {
            inv[(i, j)] = col[i];
        }
    }
    inv.sym()
}

/// True iff `s` is symmetric positive definite (Cholesky succeeds).
pub fn is_spd(s: &Mat) -> bool {
    cholesky(s).is_ok()
}
