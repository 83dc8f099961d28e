//! Dense row-major matrix type and elementwise/structural primitives.
//!
//! `Mat` is the universal carrier for covariances, descriptor sets,
//! gradients and every intermediate of the solvers. Storage is a flat
//! `Vec<f64>` with `data[i * cols + j] = a[i][j]`. All operations are
//! pure functions on immutable inputs; values are safe to share across
//! threads.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::fm;

/// Absolute tolerance on `max |a_ij - a_ji|` when validating symmetry of
/// user-supplied matrices. Internally produced symmetric matrices are
/// exact by construction, so this only guards file input and test data.
pub const SYM_TOL: f64 = 1e-10;

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Matrix with every entry set to `v`.
    pub fn filled(rows: usize, cols: usize, v: f64) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    /// d x d identity.
    pub fn identity(d: usize) -> Mat {
        Mat::scaled_identity(d, 1.0)
    }

    /// d x d diagonal matrix `v * I`.
    pub fn scaled_identity(d: usize, v: f64) -> Mat {
        let mut m = Mat::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = v;
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diag(diag: &[f64]) -> Mat {
        let d = diag.len();
        let mut m = Mat::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * d + i] = v;
        }
        m
    }

    /// Builds a matrix from row-major data, validating length and finiteness.
    ///
    /// This is the constructor for user-supplied values; non-finite entries
    /// are rejected here so the numeric kernels can assume finite input.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Mat> {
        if data.len() != rows * cols {
            return Err(Error::InvalidLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "matrix data" });
        }
        Ok(Mat { rows, cols, data })
    }

    /// Builds a matrix by evaluating `f(i, j)` at every position.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(rows: usize, cols: usize, mut f: F) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Test/helper constructor from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Mat {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Standard matrix product.
    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::DimMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Mat::zeros(m, n);
        for i in 0..m {
            let arow = &self.data[i * k..(i + 1) * k];
            let crow = &mut out.data[i * n..(i + 1) * n];
            for (l, &a) in arow.iter().enumerate() {
                let brow = &other.data[l * n..(l + 1) * n];
                for (c, &b) in crow.iter_mut().zip(brow.iter()) {
                    *c += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Elementwise sum.
    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    /// Elementwise difference.
    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Mat, op: &'static str, f: F) -> Result<Mat> {
        if self.shape() != other.shape() {
            return Err(Error::DimMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Entrywise `a * s`.
    pub fn mul_scalar(&self, s: f64) -> Mat {
        self.map(|v| v * s)
    }

    /// Entrywise `a / s`.
    pub fn div_scalar(&self, s: f64) -> Mat {
        self.map(|v| v / s)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Symmetric part `(M + M^T) / 2`. The result is bitwise symmetric:
    /// entry (i, j) and entry (j, i) are computed from the same two
    /// addends, so they round identically.
    pub fn sym(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let d = self.rows;
        let mut out = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                out.data[i * d + j] = 0.5 * (self.data[i * d + j] + self.data[j * d + i]);
            }
        }
        Ok(out)
    }

    /// Elementwise `max(0, x)`; exactly-zero entries map to +0.
    pub fn relu_elem(&self) -> Mat {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    /// Elementwise soft threshold `sign(x) * max(|x| - t, 0)`.
    pub fn soft_threshold(&self, t: f64) -> Result<Mat> {
        if !(t >= 0.0) {
            return Err(Error::BadParameter {
                name: "soft_threshold t",
                value: t,
            });
        }
        Ok(self.map(|v| {
            if v > t {
                v - t
            } else if v < -t {
                v + t
            } else {
                0.0
            }
        }))
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut t = 0.0;
        for i in 0..self.rows {
            t += self.data[i * self.cols + i];
        }
        Ok(t)
    }

    /// Frobenius norm.
    pub fn frob_norm(&self) -> f64 {
        let mut s = 0.0;
        for &v in &self.data {
            s += v * v;
        }
        fm::sqrt(s)
    }

    /// Sum of absolute values of all entries (vectorized l1 norm).
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|&v| fm::abs(v)).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(fm::abs(v)))
    }

    /// Frobenius inner product `sum_ij a_ij * b_ij`.
    pub fn dot(&self, other: &Mat) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::DimMismatch {
                op: "dot",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        let mut s = 0.0;
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            s += a * b;
        }
        Ok(s)
    }

    /// Largest |a_ij - a_ji| over all pairs.
    pub fn max_asymmetry(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let d = self.rows;
        let mut m = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                m = m.max(fm::abs(self.data[i * d + j] - self.data[j * d + i]));
            }
        }
        Ok(m)
    }

    /// Fraction of off-diagonal entries with |value| below `tol`.
    /// Returns 0 when there are no off-diagonal entries (d <= 1).
    pub fn off_diag_sparsity(&self, tol: f64) -> f64 {
        let d = self.rows.min(self.cols);
        if d <= 1 {
            return 0.0;
        }
        let mut zero = 0usize;
        let mut total = 0usize;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    total += 1;
                    if fm::abs(self.data[i * self.cols + j]) < tol {
                        zero += 1;
                    }
                }
            }
        }
        zero as f64 / total as f64
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Validates that `m` is square and symmetric within `tol` (absolute).
pub fn check_symmetric(m: &Mat, tol: f64) -> Result<()> {
    let asym = m.max_asymmetry()?;
    if asym > tol {
        return Err(Error::NotSymmetric { max_asym: asym });
    }
    Ok(())
}
