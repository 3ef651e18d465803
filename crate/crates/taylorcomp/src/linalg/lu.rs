//! Partially pivoted LU for small general square systems (Lyapunov solves,
//! fixture tooling). Not meant for large or ill-conditioned problems.

use super::{LinalgError, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct LuFactor<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> LuFactor<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self, LinalgError> {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = T::of(1e-14) * a.max_abs().max(T::one());
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= tiny {
                return Err(LinalgError::Singular(k));
            }
            if piv != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
                perm.swap(k, piv);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - f * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                let f = self.lu[(i, j)];
                y[i] = y[i] - f * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let f = self.lu[(i, j)];
                y[i] = y[i] - f * y[j];
            }
            y[i] = y[i] / self.lu[(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = Matrix::from_rows(3, 3, vec![2.0f64, 1.0, -1.0, -3.0, -1.0, 2.0, -2.0, 1.0, 2.0]);
        let f = LuFactor::new(&a).unwrap();
        let x = f.solve(&[8.0, -11.0, -3.0]);
        let expect = [2.0, 3.0, -1.0];
        for (xi, ei) in x.iter().zip(&expect) {
            assert!((xi - ei).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_flags_singular() {
        let a = Matrix::from_rows(2, 2, vec![1.0f64, 2.0, 2.0, 4.0]);
        assert!(matches!(LuFactor::new(&a), Err(LinalgError::Singular(_))));
    }
}
