//! Synthetic ground truth and error metrics for structure-recovery
//! experiments: generate a dense or sparse precision matrix, sample
//! multivariate normal data from its inverse, estimate, and measure the
//! Frobenius recovery error.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fm;
use crate::mat::Mat;
use crate::pooling::{covariance, DescriptorSet};
use crate::rng::{derive_seed, NormalSampler, SplitMix64};

/// Structure of the generated precision matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    Dense,
    Sparse,
}

/// A generated precision matrix with its exact inverse.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// Symmetric positive definite precision matrix.
    pub precision: Mat,
    /// Exact inverse of `precision` (via eigendecomposition).
    pub covariance: Mat,
    pub structure: Structure,
    /// Requested off-diagonal density (sparse structure only).
    pub density: Option<f64>,
    pub seed: u64,
}

/// Generates a certifiably positive definite precision matrix.
///
/// Sparse: a symmetric support of exactly `round(density * d(d-1)/2)`
/// off-diagonal pairs sampled uniformly without replacement, values
/// uniform on [-1, 1], and each diagonal entry set to its row's absolute
/// off-diagonal sum plus 0.5 (strict diagonal dominance, hence PD).
///
/// Dense: `A A^T / d + 0.5 I` for `A` with i.i.d. standard normal
/// entries.
pub fn gen_precision(
    d: usize,
    structure: Structure,
    density: f64,
    seed: u64,
) -> Result<GroundTruth> {
    if d < 2 {
        return Err(Error::InvalidDimension {
            what: "gen_precision d",
            got: d,
        });
    }
    let precision = match structure {
        Structure::Sparse => {
            if !(density > 0.0 && density <= 1.0) {
                return Err(Error::BadParameter {
                    name: "density",
                    value: density,
                });
            }
            let m = d * (d - 1) / 2;
            let k = fm::round(density * m as f64) as usize;
            let mut rng = SplitMix64::new(seed);
            // partial Fisher-Yates: first k slots hold the chosen pairs
            let mut idx: Vec<u32> = (0..m as u32).collect();
            for i in 0..k.min(m) {
                let j = i + rng.next_below((m - i) as u64) as usize;
                idx.swap(i, j);
            }
            let mut chosen: Vec<u32> = idx[..k.min(m)].to_vec();
            chosen.sort_unstable();

            let mut p = Mat::zeros(d, d);
            for &flat in &chosen {
                let (i, j) = unflatten_pair(flat as usize, d);
                let v = rng.next_range(-1.0, 1.0);
                p[(i, j)] = v;
                p[(j, i)] = v;
            }
            for i in 0..d {
                let mut row_abs = 0.0;
                for j in 0..d {
                    if j != i {
                        row_abs += fm::abs(p[(i, j)]);
                    }
                }
                p[(i, i)] = row_abs + 0.5;
            }
            p
        }
        Structure::Dense => {
            let mut ns = NormalSampler::new(seed);
            let a = Mat::from_fn(d, d, |_, _| ns.sample());
            a.matmul(&a.transpose())?
                .div_scalar(d as f64)
                .add(&Mat::scaled_identity(d, 0.5))?
                .sym()?
        }
    };
    let covariance = crate::eigen::sym_inverse_eig(&precision)?;
    Ok(GroundTruth {
        precision,
        covariance,
        structure,
        density: match structure {
            Structure::Sparse => Some(density),
            Structure::Dense => None,
        },
        seed,
    })
}

/// Maps a flat index in [0, d(d-1)/2) to the strictly-upper pair (i, j),
/// enumerated row-major.
fn unflatten_pair(flat: usize, d: usize) -> (usize, usize) {
    let mut rem = flat;
    for i in 0..d - 1 {
        let row_len = d - 1 - i;
        if rem < row_len {
            return (i, i + 1 + rem);
        }
        rem -= row_len;
    }
    unreachable!("flat index out of range")
}

/// Samples `n` columns from the zero-mean normal with the ground truth's
/// covariance: `X = L G` with `L` the Cholesky factor and `G` a d x n
/// standard-normal matrix filled row-major from a SplitMix64/Box-Muller
/// stream seeded by `derive_seed(gt.seed, seed)`.
pub fn mvn_sample(gt: &GroundTruth, n: usize, seed: u64) -> Result<DescriptorSet> {
    if n == 0 {
        return Err(Error::InvalidDimension {
            what: "mvn_sample n",
            got: 0,
        });
    }
    let l = crate::chol::cholesky(&gt.covariance)?;
    let d = gt.precision.rows();
    let mut sampler = NormalSampler::new(derive_seed(gt.seed, seed));
    let g = Mat::from_fn(d, n, |_, _| sampler.sample());
    DescriptorSet::new(l.matmul(&g)?)
}

/// Unpenalized precision estimate: exact inverse of
/// `covariance(x) + ridge I`.
pub fn mle_precision(x: &DescriptorSet, ridge: f64) -> Result<Mat> {
    if !(ridge >= 0.0) {
        return Err(Error::BadParameter {
            name: "ridge",
            value: ridge,
        });
    }
    let mut cov = covariance(x);
    if ridge > 0.0 {
        cov = cov.add(&Mat::scaled_identity(x.channels(), ridge))?;
    }
    crate::eigen::sym_inverse_eig(&cov)
}

/// Default MLE ridge: 1e-6 when the sample covariance is singular
/// (n <= d), 0 otherwise.
pub fn default_mle_ridge(d: usize, n: usize) -> f64 {
    if n <= d {
        1e-6
    } else {
        0.0
    }
}

/// Frobenius recovery error `||p_hat - precision||_F`.
pub fn estimation_error(p_hat: &Mat, gt: &GroundTruth) -> Result<f64> {
    if p_hat.shape() != gt.precision.shape() {
        return Err(Error::DimMismatch {
            op: "estimation_error",
            lhs: p_hat.shape(),
            rhs: gt.precision.shape(),
        });
    }
    Ok(p_hat.sub(&gt.precision)?.frob_norm())
}

/// Random symmetric positive definite matrix with eigenvalues uniform in
/// `[eig_lo, eig_hi]` and a random orthogonal eigenbasis. Deterministic
/// given the seed; used for conditioned test and benchmark inputs.
pub fn random_spd(d: usize, eig_lo: f64, eig_hi: f64, seed: u64) -> Mat {
    assert!(eig_lo > 0.0 && eig_hi >= eig_lo, "invalid eigenvalue range");
    let mut rng = SplitMix64::new(seed);
    let base = Mat::from_fn(d, d, |_, _| rng.next_range(-1.0, 1.0))
        .sym()
        .expect("square");
    let eig = crate::eigen::jacobi_eigh(&base).expect("symmetric by construction");
    let q = &eig.eigenvectors;
    let vals: Vec<f64> = (0..d).map(|_| rng.next_range(eig_lo, eig_hi)).collect();
    let mut scaled = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            scaled[(i, j)] = q[(i, j)] * vals[j];
        }
    }
    scaled
        .matmul(&q.transpose())
        .expect("square")
        .sym()
        .expect("square")
}
