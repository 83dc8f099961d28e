//! Covariance pooling of descriptor sets and derived statistics.
//!
//! A descriptor set is a d x n matrix X whose rows are channels and whose
//! columns are spatial positions. The pooled covariance is
//! `X Ibar X^T` with `Ibar = (1/n)(I - (1/n) 1 1^T)`, i.e. population
//! normalization over centered columns; it is computed here through the
//! algebraically equivalent rank-one centering, which avoids the n x n
//! intermediate.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fm;
use crate::mat::{check_symmetric, Mat, SYM_TOL};

/// Descriptor matrix with d rows (channels) and n columns (positions).
#[derive(Clone, Debug)]
pub struct DescriptorSet {
    mat: Mat,
}

impl DescriptorSet {
    /// Validates d >= 1, n >= 1 and finiteness.
    pub fn new(mat: Mat) -> Result<DescriptorSet> {
        if mat.rows() == 0 {
            return Err(Error::InvalidDimension {
                what: "descriptor channels",
                got: 0,
            });
        }
        if mat.cols() == 0 {
            return Err(Error::InvalidDimension {
                what: "descriptor samples",
                got: 0,
            });
        }
        if !mat.all_finite() {
            return Err(Error::NonFinite {
                what: "descriptor set",
            });
        }
        Ok(DescriptorSet { mat })
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    /// Number of channels d.
    pub fn channels(&self) -> usize {
        self.mat.rows()
    }

    /// Number of positions n.
    pub fn samples(&self) -> usize {
        self.mat.cols()
    }
}

/// Population covariance of the descriptor columns: d x d, symmetric PSD.
pub fn covariance(x: &DescriptorSet) -> Mat {
    let d = x.channels();
    let n = x.samples();
    let m = x.mat();
    let mut centered = Mat::zeros(d, n);
    for i in 0..d {
        let row = m.row(i);
        let mut sum = 0.0;
        for &v in row {
            sum += v;
        }
        let mean = sum / n as f64;
        for j in 0..n {
            centered[(i, j)] = row[j] - mean;
        }
    }
    let prod = centered
        .matmul(&centered.transpose())
        .expect("d x n times n x d");
    prod.div_scalar(n as f64).sym().expect("square")
}

/// Divides by the trace, returning the normalized matrix and the trace.
pub fn trace_normalize(sigma: &Mat) -> Result<(Mat, f64)> {
    let t = sigma.trace()?;
    if !(t > 0.0) {
        return Err(Error::DegenerateTrace { trace: t });
    }
    Ok((sigma.div_scalar(t), t))
}

/// Partial correlations from a precision matrix:
/// `rho_ij = -omega_ij / sqrt(omega_ii * omega_jj)`, diagonal set to 1.
pub fn partial_correlation(omega: &Mat) -> Result<Mat> {
    check_symmetric(omega, SYM_TOL)?;
    let d = omega.rows();
    for i in 0..d {
        if !(omega[(i, i)] > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: i });
        }
    }
    let mut out = Mat::zeros(d, d);
    for i in 0..d {
        out[(i, i)] = 1.0;
        for j in (i + 1)..d {
            let r = -omega[(i, j)] / fm::sqrt(omega[(i, i)] * omega[(j, j)]);
            out[(i, j)] = r;
            out[(j, i)] = r;
        }
    }
    Ok(out)
}

/// Row-major upper triangle (diagonal included) of a symmetric matrix;
/// length d(d+1)/2.
pub fn upper_tri_vec(s: &Mat) -> Result<Vec<f64>> {
    if !s.is_square() {
        return Err(Error::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let d = s.rows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            out.push(s[(i, j)]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::jacobi_eigh;
    use crate::rng::SplitMix64;

    fn descriptors(d: usize, n: usize, rng: &mut SplitMix64) -> DescriptorSet {
        DescriptorSet::new(Mat::from_fn(d, n, |_, _| rng.next_range(-2.0, 2.0))).unwrap()
    }

    // Reference: two-pass mean, then (1/n) sum of outer products of the
    // centered columns, accumulated sample by sample.
    fn covariance_two_pass(x: &DescriptorSet) -> Mat {
        let (d, n) = (x.channels(), x.samples());
        let m = x.mat();
        let mut mean = alloc::vec![0.0; d];
        for i in 0..d {
            for j in 0..n {
                mean[i] += m[(i, j)];
            }
            mean[i] /= n as f64;
        }
        let mut cov = Mat::zeros(d, d);
        for k in 0..n {
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += (m[(i, k)] - mean[i]) * (m[(j, k)] - mean[j]) / n as f64;
                }
            }
        }
        cov
    }

    #[test]
    fn constant_columns_give_zero() {
        let x = DescriptorSet::new(Mat::from_fn(3, 5, |i, _| i as f64 + 1.0)).unwrap();
        assert_eq!(covariance(&x), Mat::zeros(3, 3));
    }

    #[test]
    fn hand_computed_2x2() {
        let x = DescriptorSet::new(Mat::from_rows(&[&[1.0, -1.0], &[0.0, 0.0]])).unwrap();
        assert_eq!(
            covariance(&x),
            Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]])
        );
    }

    #[test]
    fn matches_two_pass_reference() {
        let mut rng = SplitMix64::new(79);
        let x = descriptors(4, 50, &mut rng);
        let a = covariance(&x);
        let b = covariance_two_pass(&x);
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn single_sample_is_zero() {
        let x = DescriptorSet::new(Mat::from_rows(&[&[3.0], &[-1.0]])).unwrap();
        assert_eq!(covariance(&x), Mat::zeros(2, 2));
    }

    #[test]
    fn covariance_is_psd_up_to_roundoff() {
        let mut rng = SplitMix64::new(83);
        for _ in 0..100 {
            let d = 2 + (rng.next_below(5) as usize);
            let n = 1 + (rng.next_below(12) as usize);
            let x = descriptors(d, n, &mut rng);
            let cov = covariance(&x);
            let eig = jacobi_eigh(&cov).unwrap();
            assert!(eig.eigenvalues[0] >= -1e-10, "min eig {}", eig.eigenvalues[0]);
        }
    }

    #[test]
    fn covariance_invariant_to_column_shift() {
        let mut rng = SplitMix64::new(89);
        let x = descriptors(4, 20, &mut rng);
        let shift: Vec<f64> = (0..4).map(|_| rng.next_range(-5.0, 5.0)).collect();
        let shifted = DescriptorSet::new(Mat::from_fn(4, 20, |i, j| {
            x.mat()[(i, j)] + shift[i]
        }))
        .unwrap();
        let a = covariance(&x);
        let b = covariance(&shifted);
        assert!(a.sub(&b).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn trace_normalize_cases() {
        let (s, t) = trace_normalize(&Mat::from_diag(&[2.0, 2.0])).unwrap();
        assert_eq!(t, 4.0);
        assert_eq!(s, Mat::from_diag(&[0.5, 0.5]));

        let unit = Mat::from_diag(&[0.25, 0.75]);
        let (s, t) = trace_normalize(&unit).unwrap();
        assert_eq!(t, 1.0);
        assert_eq!(s, unit);

        let mut rng = SplitMix64::new(97);
        let a = Mat::from_fn(8, 8, |_, _| rng.next_range(-1.0, 1.0));
        let spd = a
            .matmul(&a.transpose())
            .unwrap()
            .add(&Mat::scaled_identity(8, 1.0))
            .unwrap()
            .sym()
            .unwrap();
        let (sp, _) = trace_normalize(&spd).unwrap();
        assert!((sp.trace().unwrap() - 1.0).abs() <= 1e-12);

        assert!(matches!(
            trace_normalize(&Mat::zeros(3, 3)),
            Err(Error::DegenerateTrace { .. })
        ));
    }

    #[test]
    fn partial_correlation_cases() {
        assert_eq!(
            partial_correlation(&Mat::identity(3)).unwrap(),
            Mat::identity(3)
        );
        let omega = Mat::from_rows(&[&[1.0, -0.5], &[-0.5, 1.0]]);
        let p = partial_correlation(&omega).unwrap();
        assert!((p[(0, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(p[(0, 0)], 1.0);

        let bad = Mat::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!(matches!(
            partial_correlation(&bad),
            Err(Error::NonPositiveDiagonal { .. })
        ));
    }

    #[test]
    fn partial_correlation_scale_invariant() {
        let mut rng = SplitMix64::new(101);
        let a = Mat::from_fn(4, 4, |_, _| rng.next_range(-1.0, 1.0));
        let omega = a
            .matmul(&a.transpose())
            .unwrap()
            .add(&Mat::scaled_identity(4, 2.0))
            .unwrap()
            .sym()
            .unwrap();
        let p1 = partial_correlation(&omega).unwrap();
        let p2 = partial_correlation(&omega.mul_scalar(3.7)).unwrap();
        assert!(p1.sub(&p2).unwrap().max_abs() < 1e-12);
    }

    // Partial correlation equals the correlation of regression residuals:
    // regress x and y on the remaining variable (plus intercept), then
    // correlate the residuals.
    #[test]
    fn partial_correlation_matches_residual_regression() {
        let mut rng = SplitMix64::new(103);
        let n = 200;
        // correlated 3-channel data
        let base = descriptors(3, n, &mut rng);
        let x = DescriptorSet::new(Mat::from_fn(3, n, |i, j| {
            let z = base.mat()[(2, j)];
            match i {
                0 => base.mat()[(0, j)] + 0.8 * z,
                1 => base.mat()[(1, j)] - 0.6 * z,
                _ => z,
            }
        }))
        .unwrap();
        let sigma = covariance(&x);
        let omega = crate::eigen::sym_inverse_eig(&sigma).unwrap();
        let p = partial_correlation(&omega).unwrap();

        // residual-regression reference for the pair (0, 1) given 2
        let m = x.mat();
        let resid = |target: usize| -> Vec<f64> {
            // least squares of row `target` on [row 2, intercept]
            let mut szz = 0.0;
            let mut sz = 0.0;
            let mut szt = 0.0;
            let mut st = 0.0;
            for j in 0..n {
                let z = m[(2, j)];
                let t = m[(target, j)];
                szz += z * z;
                sz += z;
                szt += z * t;
                st += t;
            }
            let nf = n as f64;
            let det = szz * nf - sz * sz;
            let w = (szt * nf - sz * st) / det;
            let b = (szz * st - sz * szt) / det;
            (0..n).map(|j| m[(target, j)] - w * m[(2, j)] - b).collect()
        };
        let rx = resid(0);
        let ry = resid(1);
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for j in 0..n {
            sxy += rx[j] * ry[j];
            sxx += rx[j] * rx[j];
            syy += ry[j] * ry[j];
        }
        let rho_ref = sxy / (sxx.sqrt() * syy.sqrt());
        assert!(
            (p[(0, 1)] - rho_ref).abs() < 1e-8,
            "partial {} vs residual {}",
            p[(0, 1)],
            rho_ref
        );
    }

    #[test]
    fn upper_tri_cases() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 3.0]]);
        assert_eq!(upper_tri_vec(&m).unwrap(), alloc::vec![1.0, 2.0, 3.0]);
        assert_eq!(
            upper_tri_vec(&Mat::identity(3)).unwrap(),
            alloc::vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn upper_tri_roundtrip() {
        let mut rng = SplitMix64::new(107);
        let d = 10;
        let s = Mat::from_fn(d, d, |_, _| rng.next_range(-1.0, 1.0))
            .sym()
            .unwrap();
        let v = upper_tri_vec(&s).unwrap();
        assert_eq!(v.len(), d * (d + 1) / 2);
        // inverse packing
        let mut back = Mat::zeros(d, d);
        let mut idx = 0;
        for i in 0..d {
            for j in i..d {
                back[(i, j)] = v[idx];
                back[(j, i)] = v[idx];
                idx += 1;
            }
        }
        assert_eq!(back, s);
    }
}
