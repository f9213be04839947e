//! Minimal dense linear algebra for covariance-sized matrices.
//!
//! The statistics in this crate only ever need a handful of operations on
//! symmetric `p × p` matrices (Cholesky, a symmetric eigendecomposition for
//! semidefinite square roots, SPD solves, log-determinants, traces and
//! quadratic forms), and `p` stays in the hundreds. A small row-major
//! implementation keeps the cost model obvious and the crate free of heavy
//! dependencies; the performance-critical code in this crate is the pairwise
//! sample geometry, not these factorizations.

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput { what: "matrix rows" });
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::EmptyInput { what: "matrix columns" });
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row length",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Take ownership of a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix buffer length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Contiguous view of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Raw row-major buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute asymmetry `max |a_ij − a_ji|`; zero for non-square.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.at(i, j) - self.at(j, i)).abs());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.at(i, i)).sum()
    }

    /// Squared Frobenius norm `Σ a_ij²`. For symmetric `A` this equals
    /// `tr(A²)`.
    pub fn frob_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Entrywise product sum `Σ a_ij b_ij`; equals `tr(A Bᵀ)`, which for
    /// symmetric inputs is `tr(AB)`.
    pub fn dot_entrywise(&self, other: &Matrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                what: "entrywise product",
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Quadratic form `vᵀ A v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        if !self.is_square() || v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                what: "quadratic form vector",
                expected: self.rows,
                got: v.len(),
            });
        }
        let mut total = 0.0;
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += row[j] * v[j];
            }
            total += v[i] * acc;
        }
        Ok(total)
    }

    /// Matrix-vector product `A v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                what: "matrix-vector product",
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Product `A Bᵀ`; both operands are walked row-major so each output
    /// entry is a dot of two contiguous rows.
    pub fn mul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                what: "inner dimension of A·Bᵀ",
                expected: self.cols,
                got: other.cols,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                let b = other.row(j);
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += a[k] * b[k];
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix,
/// or `None` if a pivot fails (the matrix is not numerically PD).
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    if !a.is_square() {
        return None;
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.at(i, j);
            for k in 0..j {
                sum -= l.at(i, k) * l.at(j, k);
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l.set(i, i, sum.sqrt());
            } else {
                l.set(i, j, sum / l.at(j, j));
            }
        }
    }
    Some(l)
}

/// Solve `L Lᵀ x = b` given the Cholesky factor `L`.
pub fn chol_solve(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = l.rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            what: "solve right-hand side",
            expected: n,
            got: b.len(),
        });
    }
    // Forward substitution L y = b.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.at(i, k) * y[k];
        }
        y[i] = sum / l.at(i, i);
    }
    // Back substitution Lᵀ x = y.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l.at(k, i) * x[k];
        }
        x[i] = sum / l.at(i, i);
    }
    Ok(x)
}

/// `ln det(L Lᵀ)` from the Cholesky factor.
pub fn chol_logdet(l: &Matrix) -> f64 {
    (0..l.rows()).map(|i| 2.0 * l.at(i, i).ln()).sum()
}

/// Check `λ_min(A) ≥ −shift` for symmetric `A` by attempting a Cholesky
/// factorization of `A + shift·I`. Exact in arithmetic (the shifted matrix is
/// PD iff every eigenvalue exceeds `−shift`); in floating point the boundary
/// is fuzzy at machine-epsilon scale, which is fine for the `1e-8` tolerance
/// used by the covariance validators.
pub fn is_near_psd(a: &Matrix, shift: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let n = a.rows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted.set(i, i, shifted.at(i, i) + shift);
    }
    cholesky(&shifted).is_some()
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, V)` with `A = V · diag(λ) · Vᵀ`; eigenvalues are in
/// no particular order, matching the raw rotation output. Intended for the
/// modest matrix orders this crate works with.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            what: "eigendecomposition input (square)",
            expected: a.rows(),
            got: a.cols(),
        });
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let frob = m.frob_sq().sqrt();
    if frob == 0.0 || n == 1 {
        return Ok(((0..n).map(|i| m.at(i, i)).collect(), v));
    }
    let tol = 1e-14 * frob;
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.at(i, j) * m.at(i, j);
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotate rows and columns p, q of m.
                for k in 0..n {
                    let mkp = m.at(k, p);
                    let mkq = m.at(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.at(p, k);
                    let mqk = m.at(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                // Accumulate the rotation into the eigenvector columns.
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    Ok(((0..n).map(|i| m.at(i, i)).collect(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn cholesky_known_factor() {
        // Hand-factored: A = L Lᵀ with L = [[2,0,0],[1,2,0],[1,1,2]].
        let a = sym(&[
            vec![4.0, 2.0, 2.0],
            vec![2.0, 5.0, 3.0],
            vec![2.0, 3.0, 6.0],
        ]);
        let l = cholesky(&a).unwrap();
        let expect = [
            [2.0, 0.0, 0.0],
            [1.0, 2.0, 0.0],
            [1.0, 1.0, 2.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((l.at(i, j) - expect[i][j]).abs() < 1e-14);
            }
        }
        assert!((chol_logdet(&l) - 64.0_f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = sym(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(cholesky(&a).is_none());
        assert!(!is_near_psd(&a, 1e-8));
        // Eigenvalues are 3 and −1; a generous shift flips the verdict.
        assert!(is_near_psd(&a, 1.5));
    }

    #[test]
    fn near_psd_accepts_tiny_negative_eigenvalue() {
        // diag(1, -5e-9): smallest eigenvalue within the -1e-8 tolerance.
        let a = sym(&[vec![1.0, 0.0], vec![0.0, -5e-9]]);
        assert!(is_near_psd(&a, 1e-8));
        let b = sym(&[vec![1.0, 0.0], vec![0.0, -5e-8]]);
        assert!(!is_near_psd(&b, 1e-8));
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = sym(&[
            vec![4.0, 2.0, 2.0],
            vec![2.0, 5.0, 3.0],
            vec![2.0, 3.0, 6.0],
        ]);
        let l = cholesky(&a).unwrap();
        let x_true = [1.0, -2.0, 3.0];
        let b = a.mul_vec(&x_true).unwrap();
        let x = chol_solve(&l, &b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_eigen_two_by_two() {
        let a = sym(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (mut vals, _) = symmetric_eigen(&a).unwrap();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigen_reconstructs_random_symmetric() {
        // Deterministic pseudo-random symmetric matrix.
        let n = 12;
        let mut a = Matrix::zeros(n, n);
        let mut state = 42u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let (vals, v) = symmetric_eigen(&a).unwrap();
        // Rebuild A = V diag(vals) Vᵀ and compare entrywise.
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += v.at(i, k) * vals[k] * v.at(j, k);
                }
                assert!(
                    (acc - a.at(i, j)).abs() < 1e-10,
                    "reconstruction off at ({i},{j})"
                );
            }
        }
        // Eigenvalue sum equals the trace.
        let sum: f64 = vals.iter().sum();
        assert!((sum - a.trace()).abs() < 1e-10);
    }

    #[test]
    fn entrywise_dot_is_trace_of_product() {
        let a = sym(&[vec![1.0, 2.0], vec![2.0, 5.0]]);
        let b = sym(&[vec![3.0, -1.0], vec![-1.0, 4.0]]);
        // tr(AB) computed by hand: AB = [[1,7],[1,18]] so trace = 19.
        assert!((a.dot_entrywise(&b).unwrap() - 19.0).abs() < 1e-14);
        assert!((a.frob_sq() - (1.0 + 4.0 + 4.0 + 25.0)).abs() < 1e-14);
    }

    #[test]
    fn quad_form_and_mul_vec() {
        let a = sym(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let v = [1.0, -1.0];
        // vᵀAv = 2 - 1 - 1 + 3 = 3.
        assert!((a.quad_form(&v).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(a.mul_vec(&v).unwrap(), vec![1.0, -2.0]);
    }

    #[test]
    fn shape_errors() {
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Matrix::from_rows(&[]).is_err());
        let a = Matrix::zeros(2, 3);
        assert!(a.quad_form(&[1.0, 2.0]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn mul_nt_matches_hand_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, -1.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![2.0, 0.0, 1.0]]).unwrap();
        let c = a.mul_nt(&b).unwrap();
        assert_eq!(c.rows(), 2);
        assert_eq!(c.cols(), 1);
        assert_eq!(c.at(0, 0), 5.0);
        assert_eq!(c.at(1, 0), -1.0);
    }
}
