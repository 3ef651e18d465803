//! Solvers for the regularized Taylor model subproblem.
//!
//! Four routes are provided:
//!
//! * [`solve_p2_dual`] — the order-2 model with zero/quadratic `h`, solved
//!   globally through its concave dual over `{‖u‖ ≤ 1, H(u,w) ≻ 0}` with the
//!   cubic regularizer encoded by an extra scalar `w`;
//! * [`solve_p1_dual`] — the linearized (order-1) model with zero/quadratic
//!   `h`, a convex problem with the same dual machinery minus `w`;
//! * [`solve_split_cone`] — the order-1 model with an indicator `h`, solved by
//!   an accelerated primal-dual splitting with a computable duality gap;
//! * [`solve_linearized_ball`] — the ball-constrained linearized problem that
//!   defines the criticality measure.

mod ball;
mod dual;
mod splitting;

pub use ball::{ball_iteration_budget, solve_linearized_ball, BallSolution};
pub use dual::{solve_dual, solve_p1_dual, solve_p2_dual, solve_w_fixed_point};
pub use splitting::{solve_split_cone, SplitSolution};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix, SymMatrix};
use crate::problem::{CompositeProblem, InnerTerm, Order, TaylorModel};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SubproblemError {
    /// The dual route only covers zero or quadratic inner terms.
    #[error("the dual route does not support indicator inner terms")]
    UnsupportedInnerTerm,
    /// No positive-definite H(u,w) was found before numeric overflow.
    #[error("no feasible w found before overflow (‖W‖ ≈ {w_scale})")]
    NoFeasibleW { w_scale: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The anchor of a cone-constrained subproblem must itself be feasible.
    #[error("anchor point lies outside the inner-term set")]
    InfeasibleAnchor,
}

/// Regularizer attached to the model: `m/6·‖d‖³` (order-2 models) or
/// `m/2·‖d‖²` (order-1 models and quadratic proximal subproblems).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regularization<T> {
    Cubic { m: T },
    Quadratic { m: T },
}

impl<T: Scalar> Regularization<T> {
    pub fn m(&self) -> T {
        match self {
            Regularization::Cubic { m } | Regularization::Quadratic { m } => *m,
        }
    }

    pub fn eval(&self, r: T) -> T {
        match self {
            Regularization::Cubic { m } => *m / T::of(6.0) * r * r * r,
            Regularization::Quadratic { m } => *m / T::of(2.0) * r * r,
        }
    }
}

/// Solver tolerances shared by the dual and splitting routes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverTolerances<T> {
    /// Projected-gradient norm at which the dual ascent stops.
    pub grad_tol: T,
    /// Relative tolerance of the inner w search.
    pub w_tol: T,
    /// Outer iteration cap (ascent steps / splitting iterations).
    pub max_iters: usize,
    /// Positive-definiteness margin forwarded to Cholesky-based membership.
    pub pd_margin: T,
}

impl<T: Scalar> Default for SolverTolerances<T> {
    fn default() -> Self {
        Self { grad_tol: T::of(1e-8), w_tol: T::of(1e-10), max_iters: 500, pd_margin: T::of(1e-12) }
    }
}

impl<T: Scalar> SolverTolerances<T> {
    pub fn with_grad_tol(mut self, tol: T) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn validate(&self) {
        assert!(self.grad_tol > T::zero());
        assert!(self.w_tol > T::zero());
        assert!(self.max_iters > 0);
        assert!(self.pd_margin > T::zero());
    }
}

/// Data of the dual subproblem at an anchor `x_k`, with the outer scale ρ
/// absorbed into the residual, the Jacobian and the Hessian stack so that the
/// solvers always see ρ = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct DualSubproblem<T> {
    /// ρ·F(x_k)
    pub c: Vec<T>,
    /// ρ·∇F(x_k), one row per component.
    pub jacobian: Matrix<T>,
    /// ρ·∇²F_i(x_k); empty when the model is linear in F.
    pub hessians: Vec<SymMatrix<T>>,
    /// B of the quadratic inner term, if any.
    pub b: Option<SymMatrix<T>>,
    /// Effective linear coefficient of h at the anchor: a + B·x_k.
    pub h_lin: Vec<T>,
    pub reg: Regularization<T>,
    pub anchor: Vec<T>,
}

impl<T: Scalar> DualSubproblem<T> {
    /// Build from a Taylor model and its problem; fails for indicator inner
    /// terms (those go through the splitting route).
    pub fn from_model(
        model: &TaylorModel<T>,
        prob: &CompositeProblem<T>,
    ) -> Result<Self, SubproblemError> {
        let rho = prob.outer().rho();
        let (b, h_lin) = match prob.inner() {
            InnerTerm::Zero => (None, vec![T::zero(); prob.dim()]),
            InnerTerm::Quadratic { b, a } => {
                let mut lin = b.matvec(model.anchor());
                for (l, ai) in lin.iter_mut().zip(a) {
                    *l = *l + *ai;
                }
                (Some(b.clone()), lin)
            }
            InnerTerm::Indicator(_) => return Err(SubproblemError::UnsupportedInnerTerm),
        };
        let hessians = match model.order() {
            Order::First => Vec::new(),
            Order::Second => model
                .hessians()
                .expect("order-2 model carries hessians")
                .iter()
                .map(|h| h.scale(rho))
                .collect(),
        };
        let reg = match model.order() {
            Order::First => Regularization::Quadratic { m: model.reg_m() },
            Order::Second => Regularization::Cubic { m: model.reg_m() },
        };
        Ok(Self {
            c: linalg::scale(model.anchor_value(), rho),
            jacobian: model.jacobian().scale(rho),
            hessians,
            b,
            h_lin,
            reg,
            anchor: model.anchor().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.jacobian.cols()
    }

    pub fn residual_dim(&self) -> usize {
        self.c.len()
    }

    /// W(u) = Σ u_i · Hess_i + B (without any regularization shift).
    pub fn curvature(&self, u: &[T]) -> SymMatrix<T> {
        let n = self.dim();
        let mut w = match &self.b {
            Some(b) => b.clone(),
            None => SymMatrix::zeros(n),
        };
        for (ui, h) in u.iter().zip(&self.hessians) {
            if *ui != T::zero() {
                w.add_scaled_assign(*ui, h);
            }
        }
        w
    }

    /// G(u) = Aᵀu + (a + B x_k)
    pub fn gradient(&self, u: &[T]) -> Vec<T> {
        let mut g = self.jacobian.t_matvec(u);
        for (gi, hi) in g.iter_mut().zip(&self.h_lin) {
            *gi = *gi + *hi;
        }
        g
    }

    /// Taylor residual of the model at step `d`:
    /// `T_i(d) = c_i + (A d)_i + ½ dᵀ Hess_i d`.
    pub fn residual_at(&self, d: &[T]) -> Vec<T> {
        let mut t = linalg::add(&self.c, &self.jacobian.matvec(d));
        if !self.hessians.is_empty() {
            let half = T::of(0.5);
            for (ti, h) in t.iter_mut().zip(&self.hessians) {
                *ti = *ti + half * h.quad_form(d);
            }
        }
        t
    }

    /// Inner-term part of the reduced model: `⟨a + Bx_k, d⟩ + ½dᵀBd`.
    pub fn inner_quad(&self, d: &[T]) -> T {
        let mut q = linalg::dot(&self.h_lin, d);
        if let Some(b) = &self.b {
            q = q + T::of(0.5) * b.quad_form(d);
        }
        q
    }

    /// Primal model value (relative to the anchor value of `h`):
    /// `θ(d) = ‖T(d)‖ + inner_quad(d) + reg(‖d‖)`.
    pub fn model_value(&self, d: &[T]) -> T {
        linalg::norm(&self.residual_at(d)) + self.inner_quad(d) + self.reg.eval(linalg::norm(d))
    }

    /// u-parameterized model value `θ(d, u) = ⟨u, T(d)⟩ + inner_quad + reg`.
    /// Used by the Eq.-level gap identity checks.
    pub fn model_value_with_u(&self, d: &[T], u: &[T]) -> T {
        linalg::dot(u, &self.residual_at(d)) + self.inner_quad(d) + self.reg.eval(linalg::norm(d))
    }
}

/// Convergence status of a dual solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualStatus {
    Converged,
    /// Iteration cap hit; the best iterate so far is returned.
    IterationCap,
    /// Ascent stalled against the positive-definiteness boundary.
    BoundaryStall,
}

/// One accepted ascent iterate, kept so that gap identities can be audited
/// a posteriori.
#[derive(Debug, Clone)]
pub struct DualTraceEntry<T> {
    pub beta: T,
    pub theta_u: T,
    pub step_norm: T,
    pub w: Option<T>,
    /// `(θ(d,u) − β) − closed-form gap`; the closed form is
    /// `M/12·(w/M + 2r)(r − w/M)²` for cubic regularizers and `0` for
    /// quadratic ones.
    pub gap_identity_residual: T,
}

/// Solution of a dual solve: multiplier, optional w, step and certified gap.
#[derive(Debug, Clone)]
pub struct DualSolution<T> {
    pub u: Vec<T>,
    pub w: Option<T>,
    /// d = x⁺ − x_k
    pub step: Vec<T>,
    /// Primal model value at `step` (reduced form, anchor h-constant dropped).
    pub theta: T,
    /// Dual value at (u, w).
    pub beta: T,
    /// θ − β ≥ 0 up to round-off; certifies global optimality of `step`.
    pub gap: T,
    pub status: DualStatus,
    pub iterations: usize,
    pub trace: Vec<DualTraceEntry<T>>,
}

impl<T: Scalar> DualSolution<T> {
    pub fn converged(&self) -> bool {
        self.status == DualStatus::Converged
    }
}
