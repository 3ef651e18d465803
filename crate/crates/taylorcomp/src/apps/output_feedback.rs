//! Static output-feedback stabilization as a composite problem: minimize
//! `‖(A + BKC)ᵀX + X(A + BKC) + Q‖_F` over `X ≻ 0, K, Q ≻ 0`, flattened into
//! a single variable vector `[vec(X); vec(K); vec(Q)]`. The strict cones are
//! implemented as spectra floored at ε.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{psd_project, LuFactor, Matrix, SymMatrix};
use crate::problem::{
    CompositeProblem, ConvexSet, InnerTerm, Order, OuterFunction, ProblemError, SmoothMap,
};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum OfcError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// System data `ẋ = Ax + Bu, y = Cx` plus the PSD floor for the cone blocks.
#[derive(Debug, Clone)]
pub struct OutputFeedbackInstance<T> {
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub c: Matrix<T>,
    pub psd_floor: T,
}

impl<T: Scalar> OutputFeedbackInstance<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>, c: Matrix<T>) -> Result<Self, OfcError> {
        if !a.is_square() || b.rows() != a.rows() || c.cols() != a.rows() {
            return Err(OfcError::Parse {
                line: 0,
                message: format!(
                    "inconsistent dimensions: A {}x{}, B {}x{}, C {}x{}",
                    a.rows(),
                    a.cols(),
                    b.rows(),
                    b.cols(),
                    c.rows(),
                    c.cols()
                ),
            });
        }
        Ok(Self { a, b, c, psd_floor: T::of(1e-6) })
    }

    pub fn nx(&self) -> usize {
        self.a.rows()
    }

    pub fn nu(&self) -> usize {
        self.b.cols()
    }

    pub fn ny(&self) -> usize {
        self.c.rows()
    }

    /// Total flattened dimension: vec(X) + vec(K) + vec(Q).
    pub fn var_dim(&self) -> usize {
        2 * self.nx() * self.nx() + self.nu() * self.ny()
    }

    pub fn flatten(&self, x: &Matrix<T>, k: &Matrix<T>, q: &Matrix<T>) -> Vec<T> {
        let mut v = Vec::with_capacity(self.var_dim());
        v.extend_from_slice(x.data());
        v.extend_from_slice(k.data());
        v.extend_from_slice(q.data());
        v
    }

    pub fn unflatten(&self, v: &[T]) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
        let nx = self.nx();
        let (nu, ny) = (self.nu(), self.ny());
        assert_eq!(v.len(), self.var_dim(), "flattened length mismatch");
        let x = Matrix::from_rows(nx, nx, v[..nx * nx].to_vec());
        let k = Matrix::from_rows(nu, ny, v[nx * nx..nx * nx + nu * ny].to_vec());
        let q = Matrix::from_rows(nx, nx, v[nx * nx + nu * ny..].to_vec());
        (x, k, q)
    }

    pub fn closed_loop(&self, k: &Matrix<T>) -> Matrix<T> {
        self.a.add(&self.b.matmul(k).matmul(&self.c))
    }

    /// F(X, K, Q) = (A + BKC)ᵀX + X(A + BKC) + Q
    pub fn residual_matrix(&self, x: &Matrix<T>, k: &Matrix<T>, q: &Matrix<T>) -> Matrix<T> {
        let acl = self.closed_loop(k);
        acl.transpose().matmul(x).add(&x.matmul(&acl)).add(q)
    }

    /// Directional derivative of F along `(dx, dk, dq)` at `(x, k, _)`.
    pub fn apply_jacobian(
        &self,
        x: &Matrix<T>,
        k: &Matrix<T>,
        dx: &Matrix<T>,
        dk: &Matrix<T>,
        dq: &Matrix<T>,
    ) -> Matrix<T> {
        let acl = self.closed_loop(k);
        let bdkc = self.b.matmul(dk).matmul(&self.c);
        acl.transpose()
            .matmul(dx)
            .add(&dx.matmul(&acl))
            .add(&bdkc.transpose().matmul(x))
            .add(&x.matmul(&bdkc))
            .add(dq)
    }

    /// Adjoint of the directional derivative: given `U` (n_x×n_x, not
    /// necessarily symmetric), returns the gradient blocks
    /// `(A_cl U + U A_clᵀ, Bᵀ(X Uᵀ + Xᵀ U)Cᵀ, U)`.
    pub fn apply_jacobian_adjoint(
        &self,
        x: &Matrix<T>,
        k: &Matrix<T>,
        u: &Matrix<T>,
    ) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
        let acl = self.closed_loop(k);
        let gx = acl.matmul(u).add(&u.matmul(&acl.transpose()));
        let inner = x.matmul(&u.transpose()).add(&x.transpose().matmul(u));
        let gk = self.b.transpose().matmul(&inner).matmul(&self.c.transpose());
        (gx, gk, u.clone())
    }

    /// Materialize the flattened Jacobian (m = n_x², n = var_dim) by applying
    /// the operator to coordinate directions.
    pub fn jacobian_matrix(&self, x: &Matrix<T>, k: &Matrix<T>) -> Matrix<T> {
        let nx = self.nx();
        let (nu, ny) = (self.nu(), self.ny());
        let m = nx * nx;
        let n = self.var_dim();
        let mut jac = Matrix::zeros(m, n);
        let mut col = 0usize;
        let zero_x = Matrix::zeros(nx, nx);
        let zero_k = Matrix::zeros(nu, ny);
        for idx in 0..nx * nx {
            let mut dx = Matrix::zeros(nx, nx);
            dx[(idx / nx, idx % nx)] = T::one();
            let out = self.apply_jacobian(x, k, &dx, &zero_k, &zero_x);
            for (row, v) in out.data().iter().enumerate() {
                jac[(row, col)] = *v;
            }
            col += 1;
        }
        for idx in 0..nu * ny {
            let mut dk = Matrix::zeros(nu, ny);
            dk[(idx / ny, idx % ny)] = T::one();
            let out = self.apply_jacobian(x, k, &zero_x, &dk, &zero_x);
            for (row, v) in out.data().iter().enumerate() {
                jac[(row, col)] = *v;
            }
            col += 1;
        }
        for idx in 0..nx * nx {
            let mut dq = Matrix::zeros(nx, nx);
            dq[(idx / nx, idx % nx)] = T::one();
            let out = self.apply_jacobian(x, k, &zero_x, &zero_k, &dq);
            for (row, v) in out.data().iter().enumerate() {
                jac[(row, col)] = *v;
            }
            col += 1;
        }
        jac
    }

    /// Lyapunov-constructed zero-residual point for a stabilizing gain:
    /// solves `A_clᵀX + X A_cl = −Q₀` by the Kronecker linear system and
    /// returns `(X, K, Q₀)` with `F(X, K, Q₀) = 0`.
    pub fn lyapunov_point(
        &self,
        k: &Matrix<T>,
        q0: &Matrix<T>,
    ) -> Result<(Matrix<T>, Matrix<T>, Matrix<T>), crate::linalg::LinalgError> {
        let nx = self.nx();
        let acl = self.closed_loop(k);
        // vec(A_clᵀ X) = (I ⊗ A_clᵀ) vec(X); vec(X A_cl) = (A_clᵀ ⊗ I) vec(X)
        let mut big = Matrix::zeros(nx * nx, nx * nx);
        for i in 0..nx {
            for j in 0..nx {
                let row = i * nx + j;
                for l in 0..nx {
                    big[(row, l * nx + j)] = big[(row, l * nx + j)] + acl[(l, i)];
                    big[(row, i * nx + l)] = big[(row, i * nx + l)] + acl[(l, j)];
                }
            }
        }
        let rhs: Vec<T> = q0.data().iter().map(|v| -*v).collect();
        let lu = LuFactor::new(&big)?;
        let xv = lu.solve(&rhs);
        let x = Matrix::from_rows(nx, nx, xv).symmetrized();
        Ok((x, k.clone(), q0.clone()))
    }
}

/// Cone `{(X, K, Q) : X, Q symmetric with λ_min ≥ ε}` in flattened coordinates.
pub struct PsdBlockCone<T> {
    nx: usize,
    k_len: usize,
    floor: T,
}

impl<T: Scalar> ConvexSet<T> for PsdBlockCone<T> {
    fn project(&self, v: &[T]) -> Vec<T> {
        let nn = self.nx * self.nx;
        let mut out = Vec::with_capacity(v.len());
        let x = Matrix::from_rows(self.nx, self.nx, v[..nn].to_vec());
        let xp = psd_project(&SymMatrix::new(x), self.floor).expect("psd projection");
        out.extend_from_slice(xp.as_matrix().data());
        out.extend_from_slice(&v[nn..nn + self.k_len]);
        let q = Matrix::from_rows(self.nx, self.nx, v[nn + self.k_len..].to_vec());
        let qp = psd_project(&SymMatrix::new(q), self.floor).expect("psd projection");
        out.extend_from_slice(qp.as_matrix().data());
        out
    }
}

struct OfcMap<T> {
    inst: OutputFeedbackInstance<T>,
}

impl<T: Scalar> SmoothMap<T> for OfcMap<T> {
    fn input_dim(&self) -> usize {
        self.inst.var_dim()
    }

    fn output_dim(&self) -> usize {
        self.inst.nx() * self.inst.nx()
    }

    fn value(&self, v: &[T]) -> Vec<T> {
        let (x, k, q) = self.inst.unflatten(v);
        self.inst.residual_matrix(&x, &k, &q).data().to_vec()
    }

    fn jacobian(&self, v: &[T]) -> Matrix<T> {
        let (x, k, _) = self.inst.unflatten(v);
        self.inst.jacobian_matrix(&x, &k)
    }
}

/// Build the order-1 composite problem with the PSD-block indicator term.
/// The Frobenius norm of the residual block is the Euclidean norm of its
/// flattening, so the generic machinery applies unchanged.
pub fn build_ofc_problem<T: Scalar>(
    inst: &OutputFeedbackInstance<T>,
) -> Result<CompositeProblem<T>, OfcError> {
    let cone = Arc::new(PsdBlockCone {
        nx: inst.nx(),
        k_len: inst.nu() * inst.ny(),
        floor: inst.psd_floor,
    });
    let map: Arc<dyn SmoothMap<T>> = Arc::new(OfcMap { inst: inst.clone() });
    Ok(CompositeProblem::new(map, OuterFunction::norm(), InnerTerm::Indicator(cone), Order::First)?)
}

/// Default starting point `(X, K, Q) = (I, 0, I)`.
pub fn default_start<T: Scalar>(inst: &OutputFeedbackInstance<T>) -> Vec<T> {
    inst.flatten(
        &Matrix::identity(inst.nx()),
        &Matrix::zeros(inst.nu(), inst.ny()),
        &Matrix::identity(inst.nx()),
    )
}

/// Parse the labeled text format:
///
/// ```text
/// n_x n_u n_y
/// A
/// <n_x rows of n_x decimal floats>
/// B
/// <n_x rows of n_u floats>
/// C
/// <n_y rows of n_x floats>
/// ```
///
/// Whitespace-separated; parse errors carry line numbers.
pub fn parse_system<T: Scalar>(text: &str) -> Result<OutputFeedbackInstance<T>, OfcError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines
        .next()
        .ok_or(OfcError::Parse { line: 0, message: "empty file".into() })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>().map_err(|_| OfcError::Parse {
                line: hline,
                message: format!("expected integer dimension, found `{t}`"),
            })
        })
        .collect::<Result<_, _>>()?;
    if dims.len() != 3 {
        return Err(OfcError::Parse {
            line: hline,
            message: format!("header must be `n_x n_u n_y`, found {} tokens", dims.len()),
        });
    }
    let (nx, nu, ny) = (dims[0], dims[1], dims[2]);
    if nx == 0 || nu == 0 || ny == 0 {
        return Err(OfcError::Parse { line: hline, message: "dimensions must be positive".into() });
    }

    let mut read_block = |label: &str, rows: usize, cols: usize| -> Result<Matrix<T>, OfcError> {
        let (lline, ltext) = lines
            .next()
            .ok_or(OfcError::Parse { line: 0, message: format!("missing `{label}` block") })?;
        if ltext != label {
            return Err(OfcError::Parse {
                line: lline,
                message: format!("expected block label `{label}`, found `{ltext}`"),
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (rline, rtext) = lines.next().ok_or(OfcError::Parse {
                line: lline,
                message: format!("`{label}` block ends prematurely"),
            })?;
            let row: Vec<T> = rtext
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map(T::of).map_err(|_| OfcError::Parse {
                        line: rline,
                        message: format!("expected decimal float, found `{t}`"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if row.len() != cols {
                return Err(OfcError::Parse {
                    line: rline,
                    message: format!("`{label}` row has {} entries, expected {cols}", row.len()),
                });
            }
            data.extend(row);
        }
        Ok(Matrix::from_rows(rows, cols, data))
    };

    let a = read_block("A", nx, nx)?;
    let b = read_block("B", nx, nu)?;
    let c = read_block("C", ny, nx)?;
    OutputFeedbackInstance::new(a, b, c)
}

pub fn parse_system_file<T: Scalar>(path: &Path) -> Result<OutputFeedbackInstance<T>, OfcError> {
    let text = std::fs::read_to_string(path)?;
    parse_system(&text)
}

/// Named small stabilizable systems used by the test suites and as CLI
/// defaults, with a regularization weight that works well on each.
pub struct EmbeddedSystem<T> {
    pub name: &'static str,
    pub instance: OutputFeedbackInstance<T>,
    pub reg_m: T,
}

impl<T> fmt::Debug for EmbeddedSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EmbeddedSystem({})", self.name)
    }
}

pub fn embedded_systems<T: Scalar>() -> Vec<EmbeddedSystem<T>> {
    let m = |rows: usize, cols: usize, v: &[f64]| {
        Matrix::from_rows(rows, cols, v.iter().map(|x| T::of(*x)).collect())
    };
    vec![
        // unstable 2-state plant with a mixed position+velocity measurement
        EmbeddedSystem {
            name: "chain2",
            instance: OutputFeedbackInstance::new(
                m(2, 2, &[0.0, 1.0, 1.0, 0.0]),
                m(2, 1, &[0.0, 1.0]),
                m(1, 2, &[1.0, 1.0]),
            )
            .expect("consistent dims"),
            reg_m: T::of(0.5),
        },
        // 3-state cascade, two actuated/measured channels
        EmbeddedSystem {
            name: "cascade3",
            instance: OutputFeedbackInstance::new(
                m(3, 3, &[0.5, 1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.2]),
                m(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
                m(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            )
            .expect("consistent dims"),
            reg_m: T::of(0.5),
        },
        // two coupled oscillators, one unstable mode, aggregate measurements
        EmbeddedSystem {
            name: "oscpair4",
            instance: OutputFeedbackInstance::new(
                m(
                    4,
                    4,
                    &[
                        0.0, 1.0, 0.0, 0.0, //
                        -1.0, 0.1, 0.3, 0.0, //
                        0.0, 0.0, 0.0, 1.0, //
                        0.2, 0.0, 2.0, 0.0,
                    ],
                ),
                m(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
                m(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]),
            )
            .expect("consistent dims"),
            reg_m: T::of(0.5),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::eig::spectral_abscissa;
    use crate::linalg::{self};
    use crate::problem::jacobian_fd_error;

    fn frob(m: &Matrix<f64>) -> f64 {
        m.frob_norm()
    }

    #[test]
    fn lyapunov_point_has_zero_residual() {
        let sys = &embedded_systems::<f64>()[0];
        // K = −2 stabilizes chain2: A_cl = [[0,1],[−1,−2]]
        let k = Matrix::from_rows(1, 1, vec![-2.0]);
        assert!(spectral_abscissa(&sys.instance.closed_loop(&k)).unwrap() < 0.0);
        let (x, k, q) = sys.instance.lyapunov_point(&k, &Matrix::identity(2)).unwrap();
        let f = sys.instance.residual_matrix(&x, &k, &q);
        assert!(frob(&f) <= 1e-10, "residual {}", frob(&f));
        // X from a Lyapunov identity with Q ≻ 0 is positive definite
        assert!(linalg::cholesky_spd(&SymMatrix::new(x)).is_ok());
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        let sys = &embedded_systems::<f64>()[1];
        let inst = &sys.instance;
        let mut state = 0x5eed_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let (nx, nu, ny) = (inst.nx(), inst.nu(), inst.ny());
        for _ in 0..20 {
            let x = Matrix::from_fn(nx, nx, |_, _| next());
            let k = Matrix::from_fn(nu, ny, |_, _| next());
            let dx = Matrix::from_fn(nx, nx, |_, _| next());
            let dk = Matrix::from_fn(nu, ny, |_, _| next());
            let dq = Matrix::from_fn(nx, nx, |_, _| next());
            let u = Matrix::from_fn(nx, nx, |_, _| next());

            let ldelta = inst.apply_jacobian(&x, &k, &dx, &dk, &dq);
            let (gx, gk, gq) = inst.apply_jacobian_adjoint(&x, &k, &u);
            let lhs = linalg::dot(ldelta.data(), u.data());
            let rhs = linalg::dot(dx.data(), gx.data())
                + linalg::dot(dk.data(), gk.data())
                + linalg::dot(dq.data(), gq.data());
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "⟨LΔ,U⟩ = {lhs} vs ⟨Δ,L*U⟩ = {rhs}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sys = &embedded_systems::<f64>()[0];
        let map = OfcMap { inst: sys.instance.clone() };
        let mut state = 0xfeed_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..5 {
            let v: Vec<f64> = (0..sys.instance.var_dim()).map(|_| next()).collect();
            let err = jacobian_fd_error(&map, &v);
            assert!(err <= 1e-5, "fd error {err}");
        }
    }

    #[test]
    fn residual_is_symmetric_for_symmetric_blocks() {
        let sys = &embedded_systems::<f64>()[2];
        let inst = &sys.instance;
        let x = SymMatrix::new(Matrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1))
            .into_matrix();
        let q = Matrix::identity(4);
        let k = Matrix::from_fn(2, 2, |i, j| 0.3 * (i as f64) - 0.2 * (j as f64));
        let f = inst.residual_matrix(&x, &k, &q);
        let asym = f.add(&f.transpose().scale(-1.0));
        assert!(frob(&asym) <= 1e-12);
    }

    #[test]
    fn parser_roundtrip_and_errors() {
        let text = "2 1 1\nA\n0 1\n1 0\nB\n0\n1\nC\n1 1\n";
        let inst = parse_system::<f64>(text).unwrap();
        assert_eq!((inst.nx(), inst.nu(), inst.ny()), (2, 1, 1));
        assert_eq!(inst.a[(0, 1)], 1.0);

        let bad = "2 1 1\nA\n0 1\n1 0 3\nB\n0\n1\nC\n1 1\n";
        match parse_system::<f64>(bad) {
            Err(OfcError::Parse { line, message }) => {
                assert_eq!(line, 4, "error reports the offending line");
                assert!(message.contains("expected 2"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let bad_label = "2 1 1\nA\n0 1\n1 0\nX\n0\n1\nC\n1 1\n";
        assert!(matches!(parse_system::<f64>(bad_label), Err(OfcError::Parse { line: 5, .. })));
    }

    #[test]
    fn cone_projection_floors_blocks() {
        let sys = &embedded_systems::<f64>()[0];
        let inst = &sys.instance;
        let cone = PsdBlockCone { nx: 2, k_len: 1, floor: inst.psd_floor };
        let v = inst.flatten(
            &Matrix::from_rows(2, 2, vec![-1.0, 0.0, 0.0, 2.0]),
            &Matrix::from_rows(1, 1, vec![5.0]),
            &Matrix::identity(2),
        );
        let p = cone.project(&v);
        let (x, k, q) = inst.unflatten(&p);
        let xe = crate::linalg::sym_eigen(&SymMatrix::new(x)).unwrap();
        assert!(xe.min_eigenvalue() >= inst.psd_floor - 1e-10);
        assert_eq!(k[(0, 0)], 5.0, "K block passes through");
        let qe = crate::linalg::sym_eigen(&SymMatrix::new(q)).unwrap();
        assert!(qe.min_eigenvalue() >= inst.psd_floor - 1e-10);
    }
}
