//! Dense row-major matrices, least-squares solves and the seeded generator
//! shared by every model family.
//!
//! Factorizations are delegated to `nalgebra`: Householder QR for general
//! least squares and Cholesky for the damped normal equations of the
//! Levenberg-Marquardt step.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense matrix of `f64` stored in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Every entry must be finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    /// Column vector from a slice.
    pub fn column_vector(values: &[f64]) -> Result<Self> {
        Matrix::from_vec(values.len(), 1, values.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self.row_iter().map(|r| dot(r, v)).collect())
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply transpose of {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &s) in self.row_iter().zip(v) {
            for (o, &a) in out.iter_mut().zip(r) {
                *o += a * s;
            }
        }
        Ok(out)
    }

    /// Gram matrix `selfᵀ · self`.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for r in self.row_iter() {
            for i in 0..n {
                let ri = r[i];
                if ri == 0.0 {
                    continue;
                }
                let g_row = &mut g.data[i * n..(i + 1) * n];
                for j in i..n {
                    g_row[j] += ri * r[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.data[i * n + j] = g.data[j * n + i];
            }
        }
        g
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot subtract {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        let mut out = Matrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Relative pivot size below which QR treats `A` as rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

/// Ridge added to `AᵀA` (scaled by its mean diagonal) before giving up on a
/// rank-deficient system.
const RIDGE_SCALE: f64 = 1e-10;

/// Returns `X` minimizing `‖AX − B‖` in the Frobenius norm.
///
/// Full-column-rank systems are solved by Householder QR. Otherwise the
/// normal equations are solved with a small ridge `1e-10·trace(AᵀA)/n`; if
/// that is still not positive definite the system is reported singular.
pub fn solve_least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows but B has {}",
            a.rows(),
            b.rows()
        )));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::DimensionMismatch(
            "least squares needs at least one row and one column".into(),
        ));
    }
    let n = a.cols();

    if a.rows() >= n {
        let qr = a.to_nalgebra().qr();
        let r = qr.r();
        let max_pivot = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let full_rank = max_pivot > 0.0 && (0..n).all(|i| r[(i, i)].abs() > RANK_TOLERANCE * max_pivot * n as f64);
        if full_rank {
            let mut rhs = b.to_nalgebra();
            qr.q_tr_mul(&mut rhs);
            let rhs = rhs.rows(0, n).into_owned();
            if let Some(x) = r.solve_upper_triangular(&rhs) {
                if x.iter().all(|v| v.is_finite()) {
                    return Ok(Matrix::from_nalgebra(&x));
                }
            }
        }
    }

    let mut g = a.gram();
    let ridge = RIDGE_SCALE * g.trace() / n as f64;
    if !(ridge > 0.0) {
        return Err(Error::SingularSystem);
    }
    for i in 0..n {
        g[(i, i)] += ridge;
    }
    let rhs = a.transpose().matmul(b)?;
    let chol = g.to_nalgebra().cholesky().ok_or(Error::SingularSystem)?;
    let x = chol.solve(&rhs.to_nalgebra());
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(Matrix::from_nalgebra(&x))
}

/// Solves `(JᵀJ + mu·I) Δ = Jᵀe`, the Levenberg-Marquardt direction.
pub fn solve_damped_normal(j: &Matrix, e: &[f64], mu: f64) -> Result<Vec<f64>> {
    if j.rows() != e.len() {
        return Err(Error::DimensionMismatch(format!(
            "Jacobian has {} rows but error vector has length {}",
            j.rows(),
            e.len()
        )));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Config(format!("damping must be positive, got {mu}")));
    }
    let mut g = j.gram();
    for i in 0..g.rows() {
        g[(i, i)] += mu;
    }
    let rhs = j.tr_mul_vec(e)?;
    damped_solve(g, rhs)
}

/// Cholesky solve of an already assembled damped Gram system.
pub(crate) fn damped_solve(g: Matrix, rhs: Vec<f64>) -> Result<Vec<f64>> {
    let chol = g.to_nalgebra().cholesky().ok_or(Error::SingularSystem)?;
    let x = chol.solve(&DVector::from_vec(rhs));
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(x.iter().copied().collect())
}

/// Deterministic pseudo-random generator.
///
/// Backed by ChaCha8 (`rand_chacha`), whose output stream is fixed by the
/// seed and identical on every platform. All randomness in the crate
/// (initial weights, random splits, synthetic data) flows through this type.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.inner);
        mean + sd * z
    }
}

/// Fisher-Yates shuffle of `0..n`.
pub fn rand_permutation(rng: &mut SeededRng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.index(i + 1);
        perm.swap(i, j);
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_system() {
        let x = solve_least_squares(&Matrix::identity(2), &m(&[&[3.0], &[4.0]])).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[(1, 0)], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn mean_minimizes_squared_error() {
        let a = m(&[&[1.0], &[1.0]]);
        let b = m(&[&[1.0], &[3.0]]);
        // grid scan oracle over x in [0, 4]
        let sse = |x: f64| (x - 1.0).powi(2) + (x - 3.0).powi(2);
        let best = (0..=4000)
            .map(|k| k as f64 * 1e-3)
            .min_by(|p, q| sse(*p).total_cmp(&sse(*q)))
            .unwrap();
        assert_abs_diff_eq!(best, 2.0, epsilon = 1e-12);
        let x = solve_least_squares(&a, &b).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], best, epsilon = 1e-12);
    }

    #[test]
    fn overdetermined_consistent_system() {
        // normal equations: [[2,1],[1,2]] x = [3,3] -> x = (1,1)
        let a = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let b = m(&[&[1.0], &[1.0], &[2.0]]);
        let x = solve_least_squares(&a, &b).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[(1, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_rejects_row_mismatch() {
        let err = solve_least_squares(&Matrix::identity(2), &Matrix::zeros(3, 1)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn zero_matrix_is_singular() {
        let err = solve_least_squares(&Matrix::zeros(3, 2), &Matrix::zeros(3, 1)).unwrap_err();
        assert!(matches!(err, Error::SingularSystem));
    }

    #[test]
    fn duplicated_column_falls_back_to_ridge() {
        let a = m(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]);
        let b = m(&[&[2.0], &[4.0], &[6.0]]);
        let x = solve_least_squares(&a, &b).unwrap();
        // ridge picks the symmetric minimum-norm split
        assert_abs_diff_eq!(x[(0, 0)], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[(1, 0)], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn damped_normal_examples() {
        let j = Matrix::identity(2);
        let d = solve_damped_normal(&j, &[2.0, 4.0], 1.0).unwrap();
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d[1], 2.0, epsilon = 1e-14);

        let d = solve_damped_normal(&j, &[2.0, 4.0], 1e-12).unwrap();
        assert_abs_diff_eq!(d[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d[1], 4.0, epsilon = 1e-10);

        // (2 + 2) d = 4
        let d = solve_damped_normal(&m(&[&[1.0], &[1.0]]), &[1.0, 3.0], 2.0).unwrap();
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn damped_normal_rejects_length_mismatch() {
        let err = solve_damped_normal(&Matrix::identity(2), &[1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn permutation_edge_cases() {
        let mut rng = SeededRng::new(1);
        assert!(rand_permutation(&mut rng, 0).is_empty());
        assert_eq!(rand_permutation(&mut rng, 1), vec![0]);
        let a = rand_permutation(&mut SeededRng::new(42), 5);
        let b = rand_permutation(&mut SeededRng::new(42), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn permutation_is_exhaustive() {
        let mut rng = SeededRng::new(9);
        for n in 0..=1000 {
            let p = rand_permutation(&mut rng, n);
            let mut seen = vec![false; n];
            for &i in &p {
                assert!(!seen[i]);
                seen[i] = true;
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    #[test]
    fn gram_matches_transpose_product() {
        let a = m(&[&[1.0, 2.0, 0.5], &[-1.0, 0.0, 3.0]]);
        let g = a.gram();
        let g2 = a.transpose().matmul(&a).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0]).is_err());
    }
}
