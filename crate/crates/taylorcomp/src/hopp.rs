//! Higher-order proximal-point method for quadratic-map objectives
//! `f(x) = ‖xᵀQx − z‖`.
//!
//! Each step solves `min_x f(x) + M/(p+1)·‖x − x_k‖^{p+1}` globally through
//! the dual route: a quadratic map equals its own order-2 Taylor expansion, so
//! the model machinery is exact here. The step is a thin instantiation over
//! the dual solvers with the Hessian stack `{2Q_i}`.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{self, Matrix, SymMatrix};
use crate::problem::{CompositeProblem, InnerTerm, Order, OuterFunction, ProblemError, SmoothMap};
use crate::scalar::Scalar;
use crate::subproblem::{
    solve_dual, DualSolution, DualSubproblem, Regularization, SolverTolerances, SubproblemError,
};

#[derive(Debug, Error)]
pub enum HoppError {
    #[error("subproblem solve failed at iteration {iteration}: {source}")]
    Subproblem { iteration: usize, source: SubproblemError },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Raw data of a quadratic map `F_i(x) = xᵀ Q_i x − z_i`.
#[derive(Debug, Clone)]
pub struct QuadraticMapData<T> {
    pub matrices: Vec<SymMatrix<T>>,
    pub targets: Vec<T>,
}

impl<T: Scalar> QuadraticMapData<T> {
    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, |q| q.dim())
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn value(&self, x: &[T]) -> Vec<T> {
        self.matrices.iter().zip(&self.targets).map(|(q, z)| q.quad_form(x) - *z).collect()
    }
}

/// Quadratic-map problem with its derived weak-convexity constant
/// `L_f = 2‖(‖Q_1‖, …, ‖Q_m‖)‖` (spectral norms).
#[derive(Debug, Clone)]
pub struct QuadraticMapProblem<T> {
    data: Arc<QuadraticMapData<T>>,
    weak_convexity: T,
}

impl<T: Scalar> QuadraticMapProblem<T> {
    pub fn new(matrices: Vec<SymMatrix<T>>, targets: Vec<T>) -> Result<Self, HoppError> {
        if matrices.len() != targets.len() {
            return Err(HoppError::DimensionMismatch(format!(
                "{} matrices vs {} targets",
                matrices.len(),
                targets.len()
            )));
        }
        if matrices.is_empty() {
            return Err(HoppError::DimensionMismatch("empty quadratic map".into()));
        }
        let n = matrices[0].dim();
        if matrices.iter().any(|q| q.dim() != n) {
            return Err(HoppError::DimensionMismatch("inconsistent matrix dimensions".into()));
        }
        let spectral: Vec<T> = matrices
            .iter()
            .map(|q| q.spectral_norm().expect("spectral norm of a small symmetric matrix"))
            .collect();
        let weak_convexity = T::of(2.0) * linalg::norm(&spectral);
        Ok(Self { data: Arc::new(QuadraticMapData { matrices, targets }), weak_convexity })
    }

    pub fn data(&self) -> &Arc<QuadraticMapData<T>> {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn measurements(&self) -> usize {
        self.data.len()
    }

    /// L_f = 2‖(‖Q_i‖)_i‖
    pub fn weak_convexity(&self) -> T {
        self.weak_convexity
    }

    /// Per-component Lipschitz constants of the Jacobian: `L_1^i = 2‖Q_i‖`.
    pub fn jacobian_lipschitz(&self) -> Vec<T> {
        self.data
            .matrices
            .iter()
            .map(|q| T::of(2.0) * q.spectral_norm().expect("spectral norm"))
            .collect()
    }

    /// f(x) = ‖xᵀQx − z‖
    pub fn eval_f(&self, x: &[T]) -> T {
        linalg::norm(&self.data.value(x))
    }

    /// View as a generic composite problem of the given order (h = 0).
    pub fn to_composite(&self, order: Order) -> Result<CompositeProblem<T>, ProblemError> {
        let map: Arc<dyn SmoothMap<T>> = Arc::new(QuadraticSmoothMap { data: self.data.clone() });
        CompositeProblem::new(map, OuterFunction::norm(), InnerTerm::Zero, order)
    }

    /// Dual data of the proximal subproblem
    /// `min ‖xᵀQx − z‖ + reg(‖x − x_k‖)` at the anchor.
    pub fn prox_subproblem(&self, x_k: &[T], reg: Regularization<T>) -> DualSubproblem<T> {
        assert_eq!(x_k.len(), self.dim(), "anchor dimension mismatch");
        let m = self.measurements();
        let n = self.dim();
        let c = self.data.value(x_k);
        let mut jac = Matrix::zeros(m, n);
        for (i, q) in self.data.matrices.iter().enumerate() {
            let row = linalg::scale(&q.matvec(x_k), T::of(2.0));
            jac.row_mut(i).copy_from_slice(&row);
        }
        let hessians: Vec<SymMatrix<T>> =
            self.data.matrices.iter().map(|q| q.scale(T::of(2.0))).collect();
        DualSubproblem {
            c,
            jacobian: jac,
            hessians,
            b: None,
            h_lin: vec![T::zero(); n],
            reg,
            anchor: x_k.to_vec(),
        }
    }
}

struct QuadraticSmoothMap<T> {
    data: Arc<QuadraticMapData<T>>,
}

impl<T: Scalar> SmoothMap<T> for QuadraticSmoothMap<T> {
    fn input_dim(&self) -> usize {
        self.data.dim()
    }

    fn output_dim(&self) -> usize {
        self.data.len()
    }

    fn value(&self, x: &[T]) -> Vec<T> {
        self.data.value(x)
    }

    fn jacobian(&self, x: &[T]) -> Matrix<T> {
        let mut jac = Matrix::zeros(self.data.len(), self.data.dim());
        for (i, q) in self.data.matrices.iter().enumerate() {
            let row = linalg::scale(&q.matvec(x), T::of(2.0));
            jac.row_mut(i).copy_from_slice(&row);
        }
        jac
    }

    fn hessians(&self, _x: &[T]) -> Option<Vec<SymMatrix<T>>> {
        Some(self.data.matrices.iter().map(|q| q.scale(T::of(2.0))).collect())
    }

    fn lipschitz_p(&self, p: u32) -> Option<Vec<T>> {
        match p {
            // ∇F_i has Lipschitz constant 2‖Q_i‖
            1 => Some(
                self.data
                    .matrices
                    .iter()
                    .map(|q| T::of(2.0) * q.spectral_norm().expect("spectral norm"))
                    .collect(),
            ),
            // the order-2 model is exact
            2 => Some(vec![T::zero(); self.data.len()]),
            _ => None,
        }
    }

    fn as_quadratic(&self) -> Option<&QuadraticMapData<T>> {
        Some(&self.data)
    }
}

/// Configuration of a HOPP run. The default stopping rule follows the
/// experiment protocol: stop once `f(x_k) ≤ 1e-4` or `k ≥ 100`.
#[derive(Debug, Clone)]
pub struct HoppConfig<T> {
    pub reg_m: T,
    pub order: Order,
    pub f_tol: T,
    pub step_tol: Option<T>,
    pub max_iters: usize,
    pub tolerances: SolverTolerances<T>,
}

impl<T: Scalar> HoppConfig<T> {
    pub fn new(reg_m: T, order: Order) -> Self {
        assert!(reg_m > T::zero());
        Self {
            reg_m,
            order,
            f_tol: T::of(1e-4),
            step_tol: None,
            max_iters: 100,
            tolerances: SolverTolerances::default(),
        }
    }

    fn regularization(&self) -> Regularization<T> {
        match self.order {
            // M/(p+1)·‖d‖^{p+1} = M/2·‖d‖² for p = 1
            Order::First => Regularization::Quadratic { m: self.reg_m },
            // M/3·‖d‖³ maps onto the cubic solver's m/6·‖d‖³ with m = 2M
            Order::Second => Regularization::Cubic { m: T::of(2.0) * self.reg_m },
        }
    }
}

/// One proximal step: the global minimizer of
/// `‖xᵀQx − z‖ + M/(p+1)·‖x − x_k‖^{p+1}`, certified by the dual gap.
pub fn hopp_step<T: Scalar>(
    prob: &QuadraticMapProblem<T>,
    x_k: &[T],
    cfg: &HoppConfig<T>,
) -> Result<(Vec<T>, DualSolution<T>), HoppError> {
    let dsp = prob.prox_subproblem(x_k, cfg.regularization());
    let sol = solve_dual(&dsp, &cfg.tolerances)
        .map_err(|source| HoppError::Subproblem { iteration: 0, source })?;
    Ok((linalg::add(x_k, &sol.step), sol))
}

/// Per-iteration record of a HOPP run, in solver precision.
#[derive(Debug, Clone)]
pub struct HoppIterate<T> {
    pub k: usize,
    pub x: Vec<T>,
    pub f: T,
    pub step_norm: T,
    pub dual_gap: T,
    /// min(‖x − x*‖, ‖x + x*‖) when a ground truth is supplied.
    pub recovery_error: Option<T>,
}

#[derive(Debug, Clone)]
pub struct HoppRun<T> {
    pub iterates: Vec<HoppIterate<T>>,
    pub terminated_by_f_tol: bool,
}

impl<T: Scalar> HoppRun<T> {
    pub fn final_x(&self) -> &[T] {
        &self.iterates.last().expect("run has at least the initial iterate").x
    }
}

/// Run HOPP from `x0`; `ground_truth` enables recovery-error logging with the
/// sign-invariant distance.
pub fn hopp_run<T: Scalar>(
    prob: &QuadraticMapProblem<T>,
    cfg: &HoppConfig<T>,
    x0: &[T],
    ground_truth: Option<&[T]>,
) -> Result<HoppRun<T>, HoppError> {
    let recovery = |x: &[T]| ground_truth.map(|xs| crate::apps::recovery_error(x, xs));
    let mut x = x0.to_vec();
    let mut f = prob.eval_f(&x);
    let mut iterates = vec![HoppIterate {
        k: 0,
        x: x.clone(),
        f,
        step_norm: T::zero(),
        dual_gap: T::zero(),
        recovery_error: recovery(&x),
    }];
    let mut terminated_by_f_tol = f <= cfg.f_tol;

    let mut k = 0;
    while !terminated_by_f_tol && k < cfg.max_iters {
        let (x_new, sol) = hopp_step(prob, &x, cfg).map_err(|e| match e {
            HoppError::Subproblem { source, .. } => HoppError::Subproblem { iteration: k, source },
            other => other,
        })?;
        let f_new = prob.eval_f(&x_new);
        let step_norm = linalg::norm(&sol.step);

        // the global minimizer of the prox model never increases
        // f + M/(p+1)·‖Δ‖^{p+1}; reject (and stop) if numerics say otherwise
        let p1 = cfg.order.p() + 1;
        let decrease_lhs = f_new + cfg.reg_m / T::of(p1 as f64) * step_norm.powi(p1 as i32);
        if decrease_lhs > f + T::of(1e-12) * (T::one() + f.abs()) {
            break;
        }

        k += 1;
        x = x_new;
        f = f_new;
        iterates.push(HoppIterate {
            k,
            x: x.clone(),
            f,
            step_norm,
            dual_gap: sol.gap,
            recovery_error: recovery(&x),
        });
        if f <= cfg.f_tol {
            terminated_by_f_tol = true;
        }
        if let Some(st) = cfg.step_tol {
            if step_norm <= st {
                break;
            }
        }
    }

    Ok(HoppRun { iterates, terminated_by_f_tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem() -> QuadraticMapProblem<f64> {
        QuadraticMapProblem::new(vec![SymMatrix::diag(&[1.0])], vec![1.0]).unwrap()
    }

    #[test]
    fn weak_convexity_constant() {
        let q = QuadraticMapProblem::new(
            vec![SymMatrix::diag(&[3.0, 1.0]), SymMatrix::diag(&[0.0, 4.0])],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert!((q.weak_convexity() - 2.0 * (9.0f64 + 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_at_solution() {
        let prob = scalar_problem();
        let cfg = HoppConfig::new(1.0, Order::First);
        let (x_new, sol) = hopp_step(&prob, &[1.0], &cfg).unwrap();
        assert!((x_new[0] - 1.0).abs() <= 1e-10);
        assert!(sol.gap.abs() <= 1e-8);

        let run = hopp_run(&prob, &cfg, &[1.0], Some(&[1.0])).unwrap();
        assert_eq!(run.iterates.len(), 1, "terminates at k = 0 from a solution");
        assert!(run.terminated_by_f_tol);
    }

    #[test]
    fn scalar_step_grid_oracle() {
        // min |x² − 1| + ½(x − 2)² → x* = 1 (verified against the dense grid
        // in the dual module's oracle test as well)
        let prob = scalar_problem();
        let cfg = HoppConfig::new(1.0, Order::First);
        let (x_new, sol) = hopp_step(&prob, &[2.0], &cfg).unwrap();
        assert!((x_new[0] - 1.0).abs() < 1e-6, "x⁺ = {}", x_new[0]);
        // residual alignment at the optimum: u = (xᵀQx − z)/‖·‖ unless zero
        let resid = x_new[0] * x_new[0] - 1.0;
        if resid.abs() > 1e-8 {
            assert!((sol.u[0] - resid.signum()).abs() < 1e-6);
        }
    }

    #[test]
    fn p2_step_agrees_with_model_route() {
        // T_2^F = F exactly, so the p=2 prox step with weight M/3 equals the
        // cubic dual solve with m = 2M on the same data.
        let prob = QuadraticMapProblem::new(
            vec![
                SymMatrix::new(Matrix::from_rows(2, 2, vec![1.0, 0.3, 0.3, -0.5])),
                SymMatrix::new(Matrix::from_rows(2, 2, vec![0.2, -0.7, -0.7, 1.1])),
            ],
            vec![0.4, -0.3],
        )
        .unwrap();
        let x_k = vec![0.8, -0.6];
        let cfg = HoppConfig::new(1.5, Order::Second);
        let (x_new, _) = hopp_step(&prob, &x_k, &cfg).unwrap();

        let dsp = prob.prox_subproblem(&x_k, Regularization::Cubic { m: 3.0 });
        let sol = crate::subproblem::solve_p2_dual(&dsp, &SolverTolerances::default()).unwrap();
        let alt = linalg::add(&x_k, &sol.step);
        assert!(linalg::norm(&linalg::sub(&x_new, &alt)) <= 1e-8);
    }
}
