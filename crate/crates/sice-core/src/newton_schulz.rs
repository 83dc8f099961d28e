//! Coupled Newton-Schulz iteration for the approximate matrix inverse
//! and matrix square root.
//!
//! The iteration runs on the trace-normalized input `A' = A / trace(A)`,
//! whose spectrum lies in (0, 1] for positive definite `A`; that is the
//! convergence condition `||A' - I||_2 < 1`. With `Y_0 = A'`, `Z_0 = I`
//! and
//!
//! ```text
//! P   = (3 I - Z Y) / 2
//! Y_i = Y_{i-1} P        -> A'^{1/2}
//! Z_i = P Z_{i-1}        -> A'^{-1/2}
//! ```
//!
//! the inverse is recovered as `Q Q^T / trace(A)` with `Q = Z_N`, and the
//! square root as `Y_N * sqrt(trace(A))`.



use crate::autodiff::{NodeId, Tape};
use crate::chol;
use crate::eigen::power_spectral_norm;
use crate::error::{Error, Result};
use crate::fm;
use crate::mat::{check_symmetric, Mat, SYM_TOL};
use crate::pooling::{covariance, DescriptorSet};

/// Outcome of [`ns_inverse`].
#[derive(Clone, Debug)]
pub struct NsResult {
    /// Approximate inverse `Q Q^T / trace`, exactly symmetric and PSD by
    /// construction.
    pub inverse: Mat,
    /// Approximate square root `Y_N * sqrt(trace)` of the (ridged) input.
    pub sqrt: Mat,
    /// Number of iterations performed; always equals the requested count.
    pub iterations_run: usize,
    /// Power-iteration estimate of `||A' - I||_2` for the trace-normalized
    /// input. Values below 1 satisfy the convergence condition.
    pub convergence_precheck: f64,
    /// Exact positive-definiteness certificate for the trace-normalized
    /// input (Cholesky succeeded). Equivalent to `||A' - I||_2 < 1` for
    /// symmetric input, and cheap enough to run on every call.
    pub precheck_pd: bool,
}

/// Approximate inverse of `sigma + alpha I` by `ns` coupled
/// Newton-Schulz iterations.
///
/// Divergence (a non-finite entry, or the residual `||Z Y - I||_F`
/// growing for three consecutive iterations) is reported as an error
/// carrying the iteration index; the iteration has no self-correction,
/// so running past that point only amplifies the blow-up.
pub fn ns_inverse(sigma: &Mat, ns: usize, alpha: f64) -> Result<NsResult> {
    if !(alpha >= 0.0) {
        return Err(Error::BadParameter {
            name: "alpha",
            value: alpha,
        });
    }
    check_symmetric(sigma, SYM_TOL)?;
    let d = sigma.rows();
    let ridged = sigma.add(&Mat::scaled_identity(d, alpha))?;
    let t = ridged.trace()?;
    if !(t > 0.0) {
        return Err(Error::DegenerateTrace { trace: t });
    }

    let y0 = ridged.div_scalar(t);
    let precheck_m = y0.sub(&Mat::identity(d))?;
    let convergence_precheck = power_spectral_norm(&precheck_m, 500, 1e-12);
    let precheck_pd = chol::is_spd(&y0);

    let identity = Mat::identity(d);
    let three_i = Mat::scaled_identity(d, 3.0);
    let mut y = y0;
    let mut z = identity.clone();
    let mut r_prev = f64::INFINITY;
    let mut growing = 0usize;
    for i in 1..=ns {
        let zy = z.matmul(&y)?;
        if !zy.all_finite() {
            return Err(Error::NsDiverged { iteration: i });
        }
        let r = zy.sub(&identity)?.frob_norm();
        // Increases below 1e-10 are convergence-floor jitter, not
        // divergence; a genuine blow-up crosses this immediately.
        if r > r_prev && r > 1e-10 {
            growing += 1;
            if growing >= 3 {
                return Err(Error::NsDiverged { iteration: i });
            }
        } else {
            growing = 0;
        }
        r_prev = r;
        let u = three_i.sub(&zy)?;
        let p = u.mul_scalar(0.5);
        y = y.matmul(&p)?;
        z = p.matmul(&z)?;
    }
    let qq = z.matmul(&z.transpose())?;
    if !qq.all_finite() {
        return Err(Error::NsDiverged { iteration: ns });
    }
    Ok(NsResult {
        inverse: qq.div_scalar(t),
        sqrt: y.mul_scalar(fm::sqrt(t)),
        iterations_run: ns,
        convergence_precheck,
        precheck_pd,
    })
}

/// Approximate square root of `sigma` (no ridge): `Y_N * sqrt(trace)`.
///
/// `Y_N` approximates the square root of the trace-normalized input, so
/// the reconstruction multiplies by `sqrt(trace)`; squaring the result
/// reproduces `sigma` for converged runs.
pub fn ns_isqrt(sigma: &Mat, ns: usize) -> Result<Mat> {
    Ok(ns_inverse(sigma, ns, 0.0)?.sqrt)
}

/// Precision-matrix baseline: covariance pooling followed by the
/// Newton-Schulz inverse of `covariance + alpha I`.
pub fn precision_omega(x: &DescriptorSet, ns: usize, alpha: f64) -> Result<Mat> {
    let sigma = covariance(x);
    Ok(ns_inverse(&sigma, ns, alpha)?.inverse)
}

/// Tape-recorded Newton-Schulz inverse of the node `a` (no ridge; callers
/// add one beforehand when needed). Performs the same arithmetic as
/// [`ns_inverse`], so primal values agree bitwise.
pub fn ns_inverse_node(tape: &mut Tape, a: NodeId, ns: usize) -> Result<NodeId> {
    let d = tape.value(a).rows();
    let t = tape.trace(a)?;
    let mut y = tape.scalar_div(a, t)?;
    let mut z = tape.leaf(Mat::identity(d));
    let three_i = tape.leaf(Mat::scaled_identity(d, 3.0));
    let half = tape.scalar_leaf(0.5);
    for _ in 0..ns {
        let zy = tape.matmul(z, y)?;
        let u = tape.sub(three_i, zy)?;
        let p = tape.scalar_mul(u, half)?;
        y = tape.matmul(y, p)?;
        z = tape.matmul(p, z)?;
    }
    let zt = tape.transpose(z)?;
    let qq = tape.matmul(z, zt)?;
    tape.scalar_div(qq, t)
}
