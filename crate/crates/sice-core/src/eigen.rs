//! Symmetric eigendecomposition via cyclic Jacobi sweeps, and routines
//! built on it (spectral norm, exact symmetric inverse).
//!
//! Jacobi is unconditionally robust for symmetric matrices at the
//! dimensions this crate targets (d <= 1024) and has no tuning knobs,
//! which matters more here than raw speed: these paths serve as exact
//! references that the fast Newton-Schulz routes are validated against.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fm;
use crate::mat::{check_symmetric, Mat, SYM_TOL};

/// Maximum dimension accepted by the Jacobi solver.
pub const JACOBI_MAX_DIM: usize = 1024;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix: `S = Q diag(eigenvalues) Q^T`.
#[derive(Clone, Debug)]
pub struct EigDecomp {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `eigenvalues`.
    pub eigenvectors: Mat,
}

impl EigDecomp {
    /// Reconstructs `Q diag(lambda) Q^T`.
    pub fn reconstruct(&self) -> Mat {
        reconstruct_with(&self.eigenvectors, &self.eigenvalues)
    }

    /// Applies `f` to each eigenvalue and reconstructs
    /// `Q diag(f(lambda)) Q^T`.
    pub fn map_eigenvalues<F: Fn(f64) -> f64>(&self, f: F) -> Mat {
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&v| f(v)).collect();
        reconstruct_with(&self.eigenvectors, &vals)
    }
}

/// `Q diag(vals) Q^T` for a column-orthonormal `q`.
fn reconstruct_with(q: &Mat, vals: &[f64]) -> Mat {
    let d = q.rows();
    let mut scaled = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            scaled[(i, j)] = q[(i, j)] * vals[j];
        }
    }
    scaled.matmul(&q.transpose()).expect("square product")
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps run until the off-diagonal Frobenius mass falls below
/// `1e-12 * ||S||_F` or 100 sweeps elapse, in which case the residual is
/// reported in the error.
pub fn jacobi_eigh(s: &Mat) -> Result<EigDecomp> {
    check_symmetric(s, SYM_TOL)?;
    let d = s.rows();
    if d > JACOBI_MAX_DIM {
        return Err(Error::InvalidDimension {
            what: "jacobi_eigh",
            got: d,
        });
    }
    if d == 0 {
        return Ok(EigDecomp {
            eigenvalues: Vec::new(),
            eigenvectors: Mat::zeros(0, 0),
        });
    }

    let mut a: Vec<f64> = s.data().to_vec();
    let mut v = Mat::identity(d);
    let target = 1e-12 * s.frob_norm();

    let mut converged = false;
    let mut residual;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        residual = off_diag_mass(&a, d);
        if residual <= target {
            converged = true;
            break;
        }
        for p in 0..d - 1 {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                // Large |theta| would overflow theta^2; use the series limit.
                let t = if fm::abs(theta) > 1e150 {
                    1.0 / (2.0 * theta)
                } else {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (fm::abs(theta) + fm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / fm::sqrt(t * t + 1.0);
                let sn = t * c;
                let tau = sn / (1.0 + c);

                a[p * d + p] = app - t * apq;
                a[q * d + q] = aqq + t * apq;
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for k in 0..d {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    let new_kp = akp - sn * (akq + tau * akp);
                    let new_kq = akq + sn * (akp - tau * akq);
                    a[k * d + p] = new_kp;
                    a[p * d + k] = new_kp;
                    a[k * d + q] = new_kq;
                    a[q * d + k] = new_kq;
                }
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp - sn * (vkq + tau * vkp);
                    v[(k, q)] = vkq + sn * (vkp - tau * vkq);
                }
            }
        }
    }
    if !converged {
        residual = off_diag_mass(&a, d);
        if residual > target {
            return Err(Error::NoConvergence { residual });
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        a[i * d + i]
            .partial_cmp(&a[j * d + j])
            .expect("finite eigenvalues")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * d + i]).collect();
    let mut eigenvectors = Mat::zeros(d, d);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..d {
            eigenvectors[(k, new_col)] = v[(k, old_col)];
        }
    }
    Ok(EigDecomp {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diag_mass(a: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            let v = a[i * d + j];
            s += 2.0 * v * v;
        }
    }
    fm::sqrt(s)
}

/// Spectral norm (largest |eigenvalue|) of a symmetric matrix,
/// computed from the Jacobi eigendecomposition.
pub fn spectral_norm_sym(s: &Mat) -> Result<f64> {
    let eig = jacobi_eigh(s)?;
    Ok(eig
        .eigenvalues
        .iter()
        .fold(0.0, |m, &v| m.max(fm::abs(v))))
}

/// Exact inverse of a symmetric matrix via eigendecomposition.
///
/// Fails with [`Error::Singular`] when any |eigenvalue| falls below
/// `1e-12 * max |eigenvalue|`.
pub fn sym_inverse_eig(s: &Mat) -> Result<Mat> {
    let eig = jacobi_eigh(s)?;
    let max_abs = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &v| m.max(fm::abs(v)));
    if max_abs == 0.0 {
        return Err(Error::Singular);
    }
    let cutoff = 1e-12 * max_abs;
    let mut inv_vals = Vec::with_capacity(eig.eigenvalues.len());
    for &v in &eig.eigenvalues {
        if fm::abs(v) <= cutoff {
            return Err(Error::Singular);
        }
        inv_vals.push(1.0 / v);
    }
    reconstruct_with(&eig.eigenvectors, &inv_vals).sym()
}

/// Spectral-norm estimate for a symmetric matrix via power iteration
/// with a fixed deterministic start vector. Used as a cheap diagnostic
/// where the exact Jacobi route would dominate the runtime; the estimate
/// is a lower bound on the true norm.
pub(crate) fn power_spectral_norm(m: &Mat, max_iters: usize, tol: f64) -> f64 {
    let d = m.rows();
    if d == 0 {
        return 0.0;
    }
    let mut rng = crate::rng::SplitMix64::new(0x5EED_BEEF);
    let mut v: Vec<f64> = (0..d).map(|_| rng.next_range(-1.0, 1.0)).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = matvec(m, &v);
        let mut rayleigh = 0.0;
        for i in 0..d {
            rayleigh += v[i] * w[i];
        }
        let new_lambda = fm::abs(rayleigh);
        let norm_w = norm2(&w);
        if norm_w == 0.0 {
            return 0.0;
        }
        v = w;
        normalize(&mut v);
        if fm::abs(new_lambda - lambda) <= tol * new_lambda.max(1.0) {
            return new_lambda;
        }
        lambda = new_lambda;
    }
    lambda
}

fn matvec(m: &Mat, v: &[f64]) -> Vec<f64> {
    let d = m.rows();
    let mut out = vec![0.0; d];
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (a, b) in m.row(i).iter().zip(v.iter()) {
            s += a * b;
        }
        *o = s;
    }
    out
}

fn norm2(v: &[f64]) -> f64 {
    fm::sqrt(v.iter().map(|&x| x * x).sum())
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}
