//! Equality-constrained optimization via exact penalty: minimize
//! `h(x) + ρ‖F(x)‖` with the Taylor driver, recover a multiplier estimate
//! from the final dual vector, and report KKT residuals plus the
//! smallest-singular-value constraint-qualification diagnostic.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::history::RunHistory;
use crate::linalg::{self, sym_eigen, Matrix, SymMatrix};
use crate::problem::{
    CompositeProblem, FnMap, InnerTerm, Order, OuterFunction, ProblemError, SmoothMap,
};
use crate::rhota::{rhota_run, RhotaConfig, RhotaError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PenaltyError {
    #[error(transparent)]
    Rhota(#[from] RhotaError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("penalty schedule exhausted at rho = {rho}; feasibility still {feasibility}")]
    ScheduleExhausted { rho: f64, feasibility: f64 },
}

/// Penalty parameter schedule.
#[derive(Debug, Clone, Copy)]
pub enum RhoSchedule<T> {
    Fixed,
    /// Multiply ρ by `factor` (up to `cap`) until the recovered multiplier
    /// direction is strictly interior: `‖u‖ < 1 − margin`.
    Geometric { factor: T, cap: T, margin: T },
}

/// An equality-constrained problem `min h(x) s.t. F(x) = 0`.
pub struct PenaltyInstance<T: Scalar> {
    pub constraint: Arc<dyn SmoothMap<T>>,
    pub objective: InnerTerm<T>,
    pub rho0: T,
    pub schedule: RhoSchedule<T>,
    /// Declared lower bound on σ_min(∇F) near the solution, if known.
    pub sigma_declared: Option<T>,
}

/// KKT residual report at the returned point.
#[derive(Debug, Clone)]
pub struct KktReport<T> {
    /// ‖F(x)‖
    pub feasibility: T,
    /// λ̂ = ρ·u from the final subproblem dual vector.
    pub multiplier: Vec<T>,
    /// ‖∇F(x)ᵀλ̂ + ĥ‖ with ĥ the inner-term gradient witness.
    pub stationarity_residual: T,
    /// σ_min(∇F(x)) — the constraint-qualification diagnostic.
    pub sigma_min: T,
    pub rho_final: T,
    /// ‖u‖ of the final dual vector (interior ⇔ feasibility mechanism fired).
    pub multiplier_direction_norm: T,
}

/// σ_min(J) for an m×n Jacobian with m ≤ n, via the spectrum of JJᵀ.
pub fn sigma_min<T: Scalar>(jac: &Matrix<T>) -> T {
    let m = jac.rows();
    let jjt = SymMatrix::from_fn(m, |i, j| linalg::dot(jac.row(i), jac.row(j)));
    let eig = sym_eigen(&jjt).expect("small symmetric eigenproblem");
    eig.min_eigenvalue().max(T::zero()).sqrt()
}

/// Run the Taylor driver on the exact penalty reformulation, escalating ρ per
/// the schedule, and assemble the KKT report.
pub fn penalty_solve<T: Scalar>(
    inst: &PenaltyInstance<T>,
    cfg: &RhotaConfig<T>,
    order: Order,
    x0: &[T],
) -> Result<(Vec<T>, KktReport<T>, RunHistory), PenaltyError> {
    let mut rho = inst.rho0;
    let mut x_start = x0.to_vec();
    let feas_tol = T::of(1e-6);

    loop {
        let prob = CompositeProblem::new(
            inst.constraint.clone(),
            OuterFunction::scaled_norm(rho),
            inst.objective.clone(),
            order,
        )?;
        let outcome = rhota_run(&prob, cfg, &x_start)?;
        let x = outcome.final_x.clone();
        let u = outcome.final_u.clone().unwrap_or_else(|| vec![T::zero(); 0]);
        let u_norm = linalg::norm(&u);

        let f_val = inst.constraint.value(&x);
        let feasibility = linalg::norm(&f_val);
        let jac = inst.constraint.jacobian(&x);
        let multiplier = linalg::scale(&u, rho);
        let witness = match &inst.objective {
            InnerTerm::Quadratic { b, a } => linalg::add(&b.matvec(&x), a),
            _ => vec![T::zero(); x.len()],
        };
        let stationarity = linalg::add(&jac.t_matvec(&multiplier), &witness);
        let report = KktReport {
            feasibility,
            multiplier,
            stationarity_residual: linalg::norm(&stationarity),
            sigma_min: sigma_min(&jac),
            rho_final: rho,
            multiplier_direction_norm: u_norm,
        };

        match inst.schedule {
            RhoSchedule::Fixed => return Ok((x, report, outcome.history)),
            RhoSchedule::Geometric { factor, cap, margin } => {
                if u_norm < T::one() - margin {
                    return Ok((x, report, outcome.history));
                }
                if rho >= cap {
                    if feasibility <= feas_tol {
                        return Ok((x, report, outcome.history));
                    }
                    return Err(PenaltyError::ScheduleExhausted {
                        rho: rho.as_f64(),
                        feasibility: feasibility.as_f64(),
                    });
                }
                rho = (rho * factor).min(cap);
                x_start = x;
            }
        }
    }
}

/// Constructed equality-constrained quadratic program with a known KKT pair.
///
/// `h(x) = ½xᵀBx + aᵀx` with B ≻ 0; constraints are affine
/// (`F(x) = A_c x − b`), optionally perturbed by a small quadratic term that
/// keeps `σ_min(∇F) ≥ 0.5` near `x*`. The data is reverse-engineered from a
/// chosen `(x*, λ*)`: `a = −Bx* − ∇F(x*)ᵀλ*`, `b = A_c x* (+ quadratic part)`.
pub struct ConstructedQp<T: Scalar> {
    pub instance: PenaltyInstance<T>,
    pub x_star: Vec<T>,
    pub lambda_star: Vec<T>,
}

pub fn constructed_qp<T: Scalar>(n: usize, m_eq: usize, seed: u64, nonlinear: bool) -> ConstructedQp<T> {
    assert!(m_eq < n, "strictly fewer constraints than variables");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };

    // B = MᵀM/n + I ≻ 0
    let mraw = Matrix::from_fn(n, n, |_, _| T::of(gauss()));
    let mut bmat = mraw.transpose().matmul(&mraw).scale(T::one() / T::of(n as f64));
    bmat.add_diag_assign(T::one());
    let b_sym = SymMatrix::new(bmat);

    // A_c rescaled so σ_min(A_c) = 1 exactly; the quadratic perturbation is
    // kept small enough that σ_min(∇F) stays above 0.5 near x*.
    let mut a_c = Matrix::from_fn(m_eq, n, |_, _| T::of(gauss()) * T::of(0.3));
    for i in 0..m_eq {
        a_c[(i, i)] = a_c[(i, i)] + T::one();
    }
    let s = sigma_min(&a_c);
    let a_c = a_c.scale(T::one() / s);

    let x_star: Vec<T> = (0..n).map(|_| T::of(gauss())).collect();
    let lambda_star: Vec<T> = (0..m_eq).map(|_| T::of(gauss())).collect();

    // quadratic perturbation: γ·(xᵀP_i x − x*ᵀP_i x*), γ small
    let gamma = if nonlinear { T::of(0.02) } else { T::zero() };
    let perts: Vec<SymMatrix<T>> = (0..m_eq)
        .map(|_| {
            let raw = Matrix::from_fn(n, n, |_, _| T::of(gauss()));
            SymMatrix::new(raw).scale(T::one() / T::of(n as f64))
        })
        .collect();
    let pert_at_star: Vec<T> = perts.iter().map(|p| p.quad_form(&x_star)).collect();

    let b_rhs: Vec<T> = a_c.matvec(&x_star);
    let a_c2 = a_c.clone();
    let perts2 = perts.clone();
    let x_star2 = x_star.clone();
    let pert_at_star2 = pert_at_star.clone();

    let constraint: Arc<dyn SmoothMap<T>> = Arc::new(FnMap {
        n,
        m: m_eq,
        value: Box::new(move |x: &[T]| {
            let mut v = linalg::sub(&a_c.matvec(x), &b_rhs);
            if gamma > T::zero() {
                for ((vi, p), p0) in v.iter_mut().zip(&perts).zip(&pert_at_star) {
                    *vi = *vi + gamma * (p.quad_form(x) - *p0);
                }
            }
            v
        }),
        jacobian: Box::new(move |x: &[T]| {
            let mut j = a_c2.clone();
            if gamma > T::zero() {
                for (i, p) in perts2.iter().enumerate() {
                    let grad = linalg::scale(&p.matvec(x), T::of(2.0) * gamma);
                    for (jj, g) in grad.iter().enumerate() {
                        j[(i, jj)] = j[(i, jj)] + *g;
                    }
                }
            }
            j
        }),
        hessians: None,
        lipschitz: Some(vec![T::zero(); m_eq]), // exact for the affine family
        lipschitz_order: 1,
    });

    // a = −Bx* − ∇F(x*)ᵀλ*
    let jac_star = constraint.jacobian(&x_star2);
    let mut a_lin = linalg::scale(&b_sym.matvec(&x_star2), -T::one());
    let jtl = jac_star.t_matvec(&lambda_star);
    for (ai, ji) in a_lin.iter_mut().zip(&jtl) {
        *ai = *ai - *ji;
    }
    let _ = pert_at_star2;

    let objective = InnerTerm::quadratic(b_sym, a_lin).expect("B is positive definite");
    let rho0 = T::of(2.0) * linalg::norm(&lambda_star) + T::one();
    ConstructedQp {
        instance: PenaltyInstance {
            constraint,
            objective,
            rho0,
            schedule: RhoSchedule::Fixed,
            sigma_declared: Some(T::of(0.5)),
        },
        x_star,
        lambda_star,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_min_of_orthogonal_rows() {
        let j = Matrix::from_rows(2, 3, vec![2.0f64, 0.0, 0.0, 0.0, 3.0, 0.0]);
        assert!((sigma_min(&j) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn point_constraint_exact_penalty() {
        // n = 1, F(x) = x − 1, h = 0, ρ = 1: minimizer is x = 1 from any start
        let constraint: Arc<dyn SmoothMap<f64>> = Arc::new(FnMap {
            n: 1,
            m: 1,
            value: Box::new(|x: &[f64]| vec![x[0] - 1.0]),
            jacobian: Box::new(|_x: &[f64]| Matrix::identity(1)),
            hessians: None,
            lipschitz: Some(vec![0.0]),
            lipschitz_order: 1,
        });
        let inst = PenaltyInstance {
            constraint,
            objective: InnerTerm::Zero,
            rho0: 1.0,
            schedule: RhoSchedule::Fixed,
            sigma_declared: Some(1.0),
        };
        let mut cfg = RhotaConfig::new(1.0);
        cfg.step_tol = Some(1e-12);
        cfg.max_iters = 300;
        let (x, report, _) = penalty_solve(&inst, &cfg, Order::First, &[7.5]).unwrap();
        assert!((x[0] - 1.0).abs() <= 1e-8, "x = {}", x[0]);
        assert!(report.feasibility <= 1e-8);
    }

    #[test]
    fn constructed_qp_recovers_kkt_pair() {
        let qp = constructed_qp::<f64>(4, 2, 99, false);
        let mut cfg = RhotaConfig::new(2.0);
        cfg.step_tol = Some(1e-12);
        cfg.max_iters = 500;
        // the exact-penalty optimum sits at the norm kink, so the dual needs
        // a tight gradient tolerance to certify progress all the way in
        cfg.tolerances.grad_tol = 1e-12;
        let x0 = vec![0.0; 4];
        let (x, report, _) = penalty_solve(&qp.instance, &cfg, Order::First, &x0).unwrap();
        let err = linalg::norm(&linalg::sub(&x, &qp.x_star));
        assert!(err <= 1e-4, "x error {err}");
        assert!(report.feasibility <= 1e-6);
        let lam_err = linalg::norm(&linalg::sub(&report.multiplier, &qp.lambda_star));
        assert!(lam_err <= 1e-3, "multiplier error {lam_err}");
        assert!(report.sigma_min >= 0.5);
        assert!(linalg::norm(&report.multiplier) <= report.rho_final);
    }
}
