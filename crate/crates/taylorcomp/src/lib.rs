//! Composite-optimization toolkit for `min g(F(x)) + h(x)` with a scaled
//! Euclidean outer norm, built around regularized higher-order Taylor models:
//!
//! * order-1 and order-2 model subproblems solved globally through concave
//!   duals (the nonconvex cubic-regularized case included) or primal-dual
//!   splitting for cone-constrained inner terms;
//! * the RHOTA outer loop (fixed regularization) and its adaptive A-RHOTA
//!   variant with a doubling/halving line search;
//! * the HOPP higher-order proximal-point method for quadratic-map objectives
//!   such as phase retrieval;
//! * stationarity diagnostics: a proximal probe with a certified minimum-norm
//!   subgradient bound and a ball-constrained criticality measure;
//! * application generators for phase retrieval, static output-feedback
//!   stabilization and equality-constrained problems via exact penalty.
//!
//! Numeric kernels are generic over the scalar type (`f32`/`f64`) through
//! [`scalar::Scalar`]; the drivers, history records and the CLI run in `f64`.
//! Concrete aliases for the common types live at the crate root.

pub mod apps;
pub mod cli;
pub mod history;
pub mod hopp;
pub mod linalg;
pub mod problem;
pub mod rhota;
pub mod scalar;
pub mod stationarity;
pub mod subproblem;

pub use scalar::Scalar;

/// Dense matrix in working precision.
pub type Matrix64 = linalg::Matrix<f64>;
/// Symmetric matrix in working precision.
pub type SymMatrix64 = linalg::SymMatrix<f64>;
/// Composite problem in working precision.
pub type CompositeProblem64 = problem::CompositeProblem<f64>;
/// Taylor model in working precision.
pub type TaylorModel64 = problem::TaylorModel<f64>;
/// Dual subproblem data in working precision.
pub type DualSubproblem64 = subproblem::DualSubproblem<f64>;
/// Dual solution in working precision.
pub type DualSolution64 = subproblem::DualSolution<f64>;
/// Quadratic-map problem in working precision.
pub type QuadraticMapProblem64 = hopp::QuadraticMapProblem<f64>;
