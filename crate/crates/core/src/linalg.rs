//! Dense column-major matrices and Householder-QR least squares.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{dot, norm2, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("design has {rows} rows but {cols} columns; need rows > columns")]
    Underdetermined { rows: usize, cols: usize },
    #[error("response length {response} does not match design rows {rows}")]
    ShapeMismatch { rows: usize, response: usize },
    #[error("design contains non-finite entries")]
    NonFinite,
    #[error("singular design: columns {dependent:?} are linearly dependent on earlier columns")]
    Singular { dependent: Vec<usize> },
}

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Builds a matrix from a list of equally sized columns.
    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            assert_eq!(c.len(), rows, "ragged columns");
            data.extend_from_slice(c);
        }
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[col * self.rows + row] = value;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * beta`.
    pub fn mul_vec(&self, beta: &[T]) -> Vec<T> {
        assert_eq!(beta.len(), self.cols);
        let mut out = vec![T::zero(); self.rows];
        for (j, &b) in beta.iter().enumerate() {
            if b == T::zero() {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.col(j)) {
                *o += x * b;
            }
        }
        out
    }

    /// `selfᵀ * v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols).map(|j| dot(self.col(j), v)).collect()
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * keep.len());
        for &j in keep {
            data.extend_from_slice(self.col(j));
        }
        Self {
            rows: self.rows,
            cols: keep.len(),
            data,
        }
    }
}

/// Ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSquares<T> {
    pub coefficients: Vec<T>,
    pub residuals: Vec<T>,
    /// Residual sum of squares.
    pub ssr: T,
    /// Diagonal of `(XᵀX)⁻¹`, used for coefficient standard errors.
    pub inverse_gram_diagonal: Vec<T>,
}

impl<T: Scalar> LeastSquares<T> {
    pub fn observations(&self) -> usize {
        self.residuals.len()
    }

    /// Residual degrees of freedom `n - k`.
    pub fn residual_dof(&self) -> usize {
        self.residuals.len() - self.coefficients.len()
    }

    /// Classical standard error of coefficient `j`.
    pub fn standard_error(&self, j: usize) -> T {
        let s2 = self.ssr / T::from_usize_lossy(self.residual_dof());
        (s2 * self.inverse_gram_diagonal[j]).sqrt()
    }
}

/// Solves `min ‖y − Xβ‖²` with an unpivoted Householder QR.
///
/// A column whose diagonal entry of `R` falls below `√ε · ‖x_j‖` (relative to
/// the largest column norm) is reported as dependent on the columns before it.
pub fn least_squares<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<LeastSquares<T>, LinalgError> {
    let (n, k) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(LinalgError::ShapeMismatch {
            rows: n,
            response: y.len(),
        });
    }
    if n <= k {
        return Err(LinalgError::Underdetermined { rows: n, cols: k });
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }

    let col_norms: Vec<T> = (0..k).map(|j| norm2(x.col(j))).collect();
    let scale = col_norms.iter().copied().fold(T::zero(), T::max);
    let tol = T::epsilon().sqrt() * T::lit(1e-2);

    let mut a = x.clone();
    let mut qty = y.to_vec();
    let mut dependent = Vec::new();

    for j in 0..k {
        let alpha_norm = norm2(&a.col(j)[j..]);
        let reference = col_norms[j].max(scale * T::epsilon());
        if alpha_norm <= tol * reference || alpha_norm == T::zero() {
            dependent.push(j);
            continue;
        }
        let x0 = a.get(j, j);
        let alpha = if x0 > T::zero() { -alpha_norm } else { alpha_norm };
        // v = x - alpha e1, stored in place below the diagonal
        let mut v: Vec<T> = a.col(j)[j..].to_vec();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for c in j..k {
            let col = &mut a.col_mut(c)[j..];
            let s = two * dot(&v, col) / vnorm2;
            for (ci, &vi) in col.iter_mut().zip(&v) {
                *ci -= s * vi;
            }
        }
        let s = two * dot(&v, &qty[j..]) / vnorm2;
        for (qi, &vi) in qty[j..].iter_mut().zip(&v) {
            *qi -= s * vi;
        }
    }
    if !dependent.is_empty() {
        return Err(LinalgError::Singular { dependent });
    }

    // back substitution on the k×k upper triangle
    let mut beta = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut acc = qty[i];
        for c in (i + 1)..k {
            acc -= a.get(i, c) * beta[c];
        }
        beta[i] = acc / a.get(i, i);
    }

    // diag((RᵀR)⁻¹) = row norms² of R⁻¹
    let mut rinv = Matrix::zeros(k, k);
    for c in 0..k {
        rinv.set(c, c, T::one() / a.get(c, c));
        for i in (0..c).rev() {
            let mut acc = T::zero();
            for m in (i + 1)..=c {
                acc += a.get(i, m) * rinv.get(m, c);
            }
            rinv.set(i, c, -acc / a.get(i, i));
        }
    }
    let inverse_gram_diagonal = (0..k)
        .map(|i| (i..k).map(|c| rinv.get(i, c) * rinv.get(i, c)).sum())
        .collect();

    let fitted = x.mul_vec(&beta);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let ssr = dot(&residuals, &residuals);

    Ok(LeastSquares {
        coefficients: beta,
        residuals,
        ssr,
        inverse_gram_diagonal,
    })
}
