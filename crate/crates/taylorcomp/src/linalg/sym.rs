//! Symmetric kernels: Cholesky factorization, cyclic Jacobi eigen-decomposition
//! and projection onto the PSD cone.
//!
//! Positive definiteness is decided solely by Cholesky success with a pivot
//! threshold of `1e-12 · ‖A‖`; the eigen-decomposition is reserved for the
//! cone projection and diagnostics.

use serde::{Deserialize, Serialize};

use super::{LinalgError, Matrix};
use crate::scalar::Scalar;

/// Dense symmetric matrix. Entries are symmetrized on construction so that
/// `a[(i,j)] == a[(j,i)]` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix<T> {
    mat: Matrix<T>,
}

impl<T: Scalar> SymMatrix<T> {
    /// Symmetrize a square matrix: (A + Aᵀ)/2.
    pub fn new(mat: Matrix<T>) -> Self {
        assert!(mat.is_square(), "symmetric matrix must be square");
        assert!(mat.rows() >= 1, "dimension must be at least 1");
        Self { mat: mat.symmetrized() }
    }

    pub fn zeros(n: usize) -> Self {
        Self { mat: Matrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: Matrix::identity(n) }
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        Self { mat: m }
    }

    /// Build from `f(i, j)`; only the lower triangle is evaluated.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.mat
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        self.mat.matvec(x)
    }

    /// xᵀ A x
    pub fn quad_form(&self, x: &[T]) -> T {
        super::dot(&self.mat.matvec(x), x)
    }

    pub fn frob_norm(&self) -> T {
        self.mat.frob_norm()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { mat: self.mat.scale(s) }
    }

    pub fn add_scaled_assign(&mut self, s: T, other: &Self) {
        self.mat.add_scaled_assign(s, &other.mat);
    }

    pub fn add_diag_assign(&mut self, s: T) {
        self.mat.add_diag_assign(s);
    }

    /// Largest eigenvalue magnitude (spectral norm), via the eigen kernel.
    pub fn spectral_norm(&self) -> Result<T, LinalgError> {
        let eig = sym_eigen(self)?;
        Ok(eig.eigenvalues.iter().fold(T::zero(), |acc, v| acc.max(v.abs())))
    }
}

/// Lower-triangular Cholesky factor L with L·Lᵀ = A.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<T> {
    dim: usize,
    lower: Matrix<T>,
}

impl<T: Scalar> CholeskyFactor<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    /// Solve A x = b via forward/back substitution.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        if b.len() != self.dim {
            return Err(LinalgError::DimensionMismatch(format!(
                "rhs has length {}, factor dimension is {}",
                b.len(),
                self.dim
            )));
        }
        let n = self.dim;
        // L y = b
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s = s - self.lower[(i, j)] * y[j];
            }
            y[i] = s / self.lower[(i, i)];
        }
        // Lᵀ x = y
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s = s - self.lower[(j, i)] * x[j];
            }
            x[i] = s / self.lower[(i, i)];
        }
        Ok(x)
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Fails with [`LinalgError::NotPositiveDefinite`] when a pivot drops below
/// `1e-12 · ‖A‖`. That failure is the membership test for dual feasible sets,
/// so callers generally treat it as a signal rather than an error.
pub fn cholesky_spd<T: Scalar>(a: &SymMatrix<T>) -> Result<CholeskyFactor<T>, LinalgError> {
    let n = a.dim();
    let threshold = T::of(1e-12) * a.frob_norm();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.as_matrix()[(j, j)];
        for k in 0..j {
            diag = diag - l[(j, k)] * l[(j, k)];
        }
        if diag <= threshold || !diag.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: format!("{diag:?}") });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a.as_matrix()[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(CholeskyFactor { dim: n, lower: l })
}

/// Solve A x = b given the Cholesky factor of A.
pub fn solve_spd<T: Scalar>(chol: &CholeskyFactor<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    chol.solve(b)
}

/// Eigen-decomposition of a symmetric matrix: `A = V diag(λ) Vᵀ` with the
/// eigenvalues sorted in descending order and orthonormal columns in `V`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Matrix<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    /// Reassemble V diag(f(λ)) Vᵀ.
    pub fn reassemble(&self, mut f: impl FnMut(T) -> T) -> SymMatrix<T> {
        let n = self.eigenvalues.len();
        let mapped: Vec<T> = self.eigenvalues.iter().map(|l| f(*l)).collect();
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let lk = mapped[k];
            if lk == T::zero() {
                continue;
            }
            for i in 0..n {
                let vik = self.eigenvectors[(i, k)] * lk;
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + vik * self.eigenvectors[(j, k)];
                }
            }
        }
        SymMatrix::new(out)
    }

    pub fn min_eigenvalue(&self) -> T {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigen-decomposition. Deterministic and accurate for the
/// small dense matrices used throughout this crate.
pub fn sym_eigen<T: Scalar>(a: &SymMatrix<T>) -> Result<EigenDecomposition<T>, LinalgError> {
    let n = a.dim();
    let mut m = a.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let tol = T::of(1e-30).max(T::epsilon() * T::epsilon()) * a.frob_norm() * a.frob_norm();

    let off = |m: &Matrix<T>| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                s = s + m[(i, j)] * m[(i, j)];
            }
        }
        s
    };

    let mut sweeps = 0;
    while off(&m) > tol {
        sweeps += 1;
        if sweeps > JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { kernel: "jacobi eigen", iterations: JACOBI_MAX_SWEEPS });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // rotation angle from the 2x2 block
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                // A <- Jᵀ A J applied to rows/cols p and q
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                // keep the block exactly symmetric
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)].partial_cmp(&m[(i, i)]).unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Vec<T> = order.iter().map(|&i| m[(i, i)]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Projection onto `{X symmetric : λ_min(X) ≥ floor}`: clamps the spectrum
/// from below at `floor`.
pub fn psd_project<T: Scalar>(a: &SymMatrix<T>, floor: T) -> Result<SymMatrix<T>, LinalgError> {
    assert!(floor >= T::zero(), "floor must be nonnegative");
    let eig = sym_eigen(a)?;
    if eig.min_eigenvalue() >= floor {
        return Ok(a.clone());
    }
    Ok(eig.reassemble(|l| l.max(floor)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    fn max_entry_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        a.data().iter().zip(b.data()).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
    }

    #[test]
    fn cholesky_identity_and_diag() {
        let id = SymMatrix::<f64>::identity(2);
        let f = cholesky_spd(&id).unwrap();
        assert_eq!(f.lower(), id.as_matrix());

        let d = SymMatrix::diag(&[4.0, 9.0]);
        let f = cholesky_spd(&d).unwrap();
        assert_eq!(f.lower(), SymMatrix::diag(&[2.0, 3.0]).as_matrix());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SymMatrix::new(Matrix::from_rows(2, 2, vec![2.0, 1.0, 1.0, -1.0]));
        assert!(matches!(cholesky_spd(&a), Err(LinalgError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn solve_identity_and_diag() {
        let id = cholesky_spd(&SymMatrix::<f64>::identity(2)).unwrap();
        assert_eq!(solve_spd(&id, &[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);
        let d = cholesky_spd(&SymMatrix::diag(&[2.0f64, 4.0])).unwrap();
        let x = solve_spd(&d, &[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    // construct-and-verify oracle: A = MᵀM + I with known x
    #[test]
    fn solve_random_spd_roundtrip() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..20 {
            let n = 5;
            let m = Matrix::from_fn(n, n, |_, _| next());
            let a = SymMatrix::new(m.transpose().matmul(&m).add(&Matrix::identity(n)));
            let x: Vec<f64> = (0..n).map(|_| next()).collect();
            let b = a.matvec(&x);
            let f = cholesky_spd(&a).unwrap();
            let x_hat = solve_spd(&f, &b).unwrap();
            let err: f64 = x.iter().zip(&x_hat).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            assert!(err <= 1e-9 * (1.0 + norm(&x)), "solve error {err}");
            // reconstruction L·Lᵀ = A within 1e-10 relative
            let rec = f.lower().matmul(&f.lower().transpose());
            assert!(max_entry_diff(&rec, a.as_matrix()) <= 1e-10 * a.frob_norm());
        }
    }

    #[test]
    fn eigen_known_cases() {
        let d = sym_eigen(&SymMatrix::diag(&[1.0, 3.0])).unwrap();
        assert_eq!(d.eigenvalues, vec![3.0, 1.0]);

        let id = sym_eigen(&SymMatrix::<f64>::identity(3)).unwrap();
        assert_eq!(id.eigenvalues, vec![1.0, 1.0, 1.0]);

        let swap = sym_eigen(&SymMatrix::new(Matrix::from_rows(2, 2, vec![0.0f64, 1.0, 1.0, 0.0]))).unwrap();
        assert!((swap.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((swap.eigenvalues[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstruction_orthonormality_and_trace() {
        let a = SymMatrix::new(Matrix::from_rows(
            3,
            3,
            vec![2.0, -1.0, 0.5, -1.0, 3.0, 0.25, 0.5, 0.25, -1.0],
        ));
        let eig = sym_eigen(&a).unwrap();
        let rec = eig.reassemble(|l| l);
        assert!(max_entry_diff(rec.as_matrix(), a.as_matrix()) <= 1e-9 * a.frob_norm());
        // Vᵀ V = I
        let vtv = eig.eigenvectors.transpose().matmul(&eig.eigenvectors);
        assert!(max_entry_diff(&vtv, &Matrix::identity(3)) <= 1e-10);
        // eigenvalue sum equals trace
        let trace = a.as_matrix()[(0, 0)] + a.as_matrix()[(1, 1)] + a.as_matrix()[(2, 2)];
        let sum: f64 = eig.eigenvalues.iter().sum();
        assert!((sum - trace).abs() <= 1e-9 * a.frob_norm());
    }

    #[test]
    fn psd_projection_cases() {
        let a = psd_project(&SymMatrix::diag(&[2.0, -1.0]), 0.0).unwrap();
        assert!(max_entry_diff(a.as_matrix(), SymMatrix::diag(&[2.0, 0.0]).as_matrix()) <= 1e-12);

        let neg = SymMatrix::<f64>::identity(2).scale(-1.0);
        let z = psd_project(&neg, 0.0).unwrap();
        assert!(z.frob_norm() <= 1e-12);

        // fixed point on a PSD input
        let p = SymMatrix::new(Matrix::from_rows(2, 2, vec![2.0, 0.5, 0.5, 1.0]));
        let q = psd_project(&p, 0.0).unwrap();
        assert!(max_entry_diff(q.as_matrix(), p.as_matrix()) <= 1e-10 * p.frob_norm());

        // idempotence
        let r = SymMatrix::new(Matrix::from_rows(2, 2, vec![1.0, 2.0, 2.0, -3.0]));
        let p1 = psd_project(&r, 0.0).unwrap();
        let p2 = psd_project(&p1, 0.0).unwrap();
        assert!(max_entry_diff(p1.as_matrix(), p2.as_matrix()) <= 1e-10);
        let emin = sym_eigen(&p1).unwrap().min_eigenvalue();
        assert!(emin >= -1e-10);
    }
}
