//! Dense linear-algebra primitives for small matrices (n up to a few hundred).
//!
//! Everything here is deterministic and allocation-simple: matrices are dense
//! row-major `Vec<T>` buffers, vectors are plain slices. The symmetric kernels
//! (Cholesky, cyclic Jacobi eigen-decomposition, PSD projection) live in
//! [`sym`]; a pivoted LU for general square systems lives in [`lu`].

mod lu;
mod sym;

pub use lu::LuFactor;
pub use sym::{cholesky_spd, psd_project, solve_spd, sym_eigen, CholeskyFactor, EigenDecomposition, SymMatrix};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Errors raised by the dense kernels.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    /// Cholesky hit a nonpositive pivot: the matrix is not positive definite.
    /// Callers probing the feasible set of a dual problem must treat this as
    /// "infeasible", not as a fatal condition.
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: String },
    /// Incompatible dimensions between operands.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// An iterative kernel hit its sweep/iteration cap.
    #[error("{kernel} did not converge within {iterations} iterations")]
    NoConvergence { kernel: &'static str, iterations: usize },
    /// LU factorization met a (numerically) singular pivot.
    #[error("matrix is singular to working precision (pivot index {0})")]
    Singular(usize),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Build from row-major data; panics if the buffer length mismatches.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// y = A x
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// y = Aᵀ x
    pub fn t_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows, "t_matvec dimension mismatch");
        let mut y = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (yj, aij) in y.iter_mut().zip(self.row(i)) {
                *yj = *yj + *aij * xi;
            }
        }
        y
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn frob_norm(&self) -> T {
        self.data.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| *v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    /// self += s * other, in place.
    pub fn add_scaled_assign(&mut self, s: T, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * *b;
        }
    }

    /// self += s * I, in place (square only).
    pub fn add_diag_assign(&mut self, s: T) {
        assert!(self.is_square());
        for i in 0..self.rows {
            self[(i, i)] = self[(i, i)] + s;
        }
    }

    /// (A + Aᵀ)/2
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square());
        let half = T::of(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

// ── vector helpers ──────────────────────────────────────────────────

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x + *y).collect()
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn scale<T: Scalar>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|x| *x * s).collect()
}

/// y += s * x, in place.
pub fn axpy<T: Scalar>(y: &mut [T], s: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + s * *xi;
    }
}

/// x / ‖x‖, or the zero vector when ‖x‖ ≤ floor.
pub fn normalize_or_zero<T: Scalar>(a: &[T], floor: T) -> Vec<T> {
    let n = norm(a);
    if n <= floor {
        vec![T::zero(); a.len()]
    } else {
        scale(a, T::one() / n)
    }
}

/// Projection onto the Euclidean ball of radius `r` centered at the origin.
pub fn project_ball<T: Scalar>(a: &[T], r: T) -> Vec<T> {
    let n = norm(a);
    if n <= r {
        a.to_vec()
    } else {
        scale(a, r / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose_agree() {
        let a = Matrix::from_rows(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = vec![1.0, -1.0, 2.0];
        assert_eq!(a.matvec(&x), vec![5.0, 11.0]);
        let y = vec![1.0, 1.0];
        assert_eq!(a.t_matvec(&y), a.transpose().matvec(&y));
    }

    #[test]
    fn ball_projection() {
        let v = vec![3.0, 4.0];
        let p = project_ball(&v, 1.0);
        assert!((norm(&p) - 1.0f64).abs() < 1e-15);
        let q = project_ball(&v, 10.0);
        assert_eq!(q, v);
    }

    #[test]
    fn f32_instantiation_compiles_and_runs() {
        let a: Matrix<f32> = Matrix::identity(3);
        let x = vec![1.0f32, 2.0, 3.0];
        assert_eq!(a.matvec(&x), x);
    }
}
