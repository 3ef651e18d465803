//! Stationarity probe: the proximal sequence
//! `y_{k+1} = argmin_y f(y) + μ/(p+1)!·‖y − x_k‖^{p+1}` and the certified
//! bound `S(y_{k+1}) ≤ μ/p!·‖y_{k+1} − x_k‖^p` on the minimum-norm
//! subgradient at the proximal point.
//!
//! The probe needs the proximal subproblem solved globally, which is possible
//! exactly when the map is quadratic (the order-2 model is then the function
//! itself), so it is restricted to quadratic-map problems.

use thiserror::Error;

use crate::linalg::{self, Matrix, SymMatrix};
use crate::problem::{CompositeProblem, InnerTerm, Order};
use crate::scalar::Scalar;
use crate::subproblem::{
    solve_dual, DualSubproblem, Regularization, SolverTolerances, SubproblemError,
};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("the stationarity probe requires a quadratic-map problem")]
    UnsupportedProbe,
    #[error("probe subproblem failed: {0}")]
    Subproblem(#[from] SubproblemError),
}

/// Probe parameters. `mu` must exceed `M + L_g‖L_p‖` for the comparison bound
/// with a run's steps to hold; `delta` is the inexactness budget entering
/// `L_μ`. `f_star` is a declared lower bound of f (0 for norm objectives).
#[derive(Debug, Clone, Copy)]
pub struct StationarityProbe<T> {
    pub mu: T,
    pub delta: T,
    pub f_star: T,
    pub order: Order,
    pub tolerances: SolverTolerances<T>,
}

impl<T: Scalar> StationarityProbe<T> {
    pub fn new(mu: T, order: Order) -> Self {
        assert!(mu > T::zero());
        Self { mu, delta: T::zero(), f_star: T::zero(), order, tolerances: SolverTolerances::default() }
    }

    /// Trust radius `D_k = ((p+1)!·(f(x_k) − f*)/μ)^{1/(p+1)}` of the
    /// inexactness condition.
    pub fn trust_radius(&self, f_x: T) -> T {
        let fact = self.order.reg_factorial::<T>();
        let gap = (f_x - self.f_star).max(T::zero());
        (fact * gap / self.mu).powf(T::one() / T::of((self.order.p() + 1) as f64))
    }

    /// `L_μ = (μ + δ + L_g‖L_p‖ − M)/(μ − (M + L_g‖L_p‖))`, defined when
    /// `μ > M + L_g‖L_p‖`.
    pub fn l_mu(&self, composite_lipschitz: T, reg_m: T) -> Option<T> {
        let denom = self.mu - (reg_m + composite_lipschitz);
        if denom <= T::zero() {
            return None;
        }
        Some((self.mu + self.delta + composite_lipschitz - reg_m) / denom)
    }
}

/// Result of one probe: the proximal point and its subgradient bound.
#[derive(Debug, Clone)]
pub struct ProbeResult<T> {
    pub y: Vec<T>,
    pub step_norm: T,
    /// `μ/p!·‖y − x_k‖^p ≥ dist(0, ∂f(y))`
    pub s_bound: T,
    pub dual_gap: T,
}

/// Solve the proximal subproblem at `x_k` globally and certify the
/// minimum-norm-subgradient bound at the proximal point.
pub fn stationarity_probe<T: Scalar>(
    prob: &CompositeProblem<T>,
    probe: &StationarityProbe<T>,
    x_k: &[T],
) -> Result<ProbeResult<T>, ProbeError> {
    let quad = prob.map().as_quadratic().ok_or(ProbeError::UnsupportedProbe)?;
    let rho = prob.outer().rho();

    // h must be dual-route compatible
    let (b, h_lin) = match prob.inner() {
        InnerTerm::Zero => (None, vec![T::zero(); prob.dim()]),
        InnerTerm::Quadratic { b, a } => {
            let mut lin = b.matvec(x_k);
            for (l, ai) in lin.iter_mut().zip(a) {
                *l = *l + *ai;
            }
            (Some(b.clone()), lin)
        }
        InnerTerm::Indicator(_) => return Err(ProbeError::UnsupportedProbe),
    };

    let m = quad.len();
    let n = quad.dim();
    let c = linalg::scale(&quad.value(x_k), rho);
    let mut jac = Matrix::zeros(m, n);
    for (i, q) in quad.matrices.iter().enumerate() {
        let row = linalg::scale(&q.matvec(x_k), T::of(2.0) * rho);
        jac.row_mut(i).copy_from_slice(&row);
    }
    let hessians: Vec<SymMatrix<T>> =
        quad.matrices.iter().map(|q| q.scale(T::of(2.0) * rho)).collect();

    // μ/(p+1)!·‖d‖^{p+1} is μ/2·‖d‖² for p = 1 and μ/6·‖d‖³ for p = 2,
    // matching the canonical regularizers directly.
    let reg = match probe.order {
        Order::First => Regularization::Quadratic { m: probe.mu },
        Order::Second => Regularization::Cubic { m: probe.mu },
    };
    let dsp = DualSubproblem { c, jacobian: jac, hessians, b, h_lin, reg, anchor: x_k.to_vec() };
    let sol = solve_dual(&dsp, &probe.tolerances)?;

    let step_norm = linalg::norm(&sol.step);
    let p = probe.order.p();
    let p_fact = if p == 1 { T::one() } else { T::of(2.0) };
    let s_bound = probe.mu / p_fact * step_norm.powi(p as i32);
    Ok(ProbeResult {
        y: linalg::add(x_k, &sol.step),
        step_norm,
        s_bound,
        dual_gap: sol.gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopp::QuadraticMapProblem;

    fn scalar_problem() -> QuadraticMapProblem<f64> {
        QuadraticMapProblem::new(vec![SymMatrix::diag(&[1.0])], vec![1.0]).unwrap()
    }

    #[test]
    fn probe_fixed_point_at_global_minimizer() {
        let prob = scalar_problem().to_composite(Order::First).unwrap();
        let probe = StationarityProbe::new(8.0, Order::First);
        let res = stationarity_probe(&prob, &probe, &[1.0]).unwrap();
        assert!(res.step_norm <= 1e-9, "y = x_k at a global minimizer");
        assert!(res.s_bound <= 1e-8);
    }

    #[test]
    fn probe_bound_is_direct_arithmetic() {
        let prob = scalar_problem().to_composite(Order::First).unwrap();
        let probe = StationarityProbe::new(5.0, Order::First);
        let res = stationarity_probe(&prob, &probe, &[2.0]).unwrap();
        // S_bound = μ/p!·|y − x_k|^p with p = 1
        assert!((res.s_bound - 5.0 * res.step_norm).abs() <= 1e-12);
        // and the proximal point actually improves the prox objective
        let f = |x: f64| (x * x - 1.0f64).abs();
        let prox = |y: f64| f(y) + 2.5 * (y - 2.0) * (y - 2.0);
        assert!(prox(res.y[0]) <= prox(2.0) + 1e-10);
    }

    #[test]
    fn probe_second_order_uses_cubic_weight() {
        let prob = scalar_problem().to_composite(Order::Second).unwrap();
        let probe = StationarityProbe::new(5.0, Order::Second);
        let res = stationarity_probe(&prob, &probe, &[2.0]).unwrap();
        // S_bound = μ/2·|y−x|²
        assert!((res.s_bound - 2.5 * res.step_norm * res.step_norm).abs() <= 1e-12);
        // grid check of the global prox minimum: min |y²−1| + 5/6·|y−2|³
        let prox = |y: f64| (y * y - 1.0f64).abs() + 5.0 / 6.0 * (y - 2.0f64).abs().powi(3);
        let mut best = (f64::INFINITY, 0.0);
        let mut y = -3.0;
        while y <= 3.0 {
            let v = prox(y);
            if v < best.0 {
                best = (v, y);
            }
            y += 1e-5;
        }
        assert!((res.y[0] - best.1).abs() <= 1e-4, "probe point {} vs grid {}", res.y[0], best.1);
    }

    #[test]
    fn probe_rejects_non_quadratic_maps() {
        use crate::problem::{FnMap, OuterFunction};
        use std::sync::Arc;
        let map: Arc<dyn crate::problem::SmoothMap<f64>> = Arc::new(FnMap {
            n: 1,
            m: 1,
            value: Box::new(|x: &[f64]| vec![x[0].sin()]),
            jacobian: Box::new(|x: &[f64]| Matrix::from_rows(1, 1, vec![x[0].cos()])),
            hessians: None,
            lipschitz: None,
            lipschitz_order: 1,
        });
        let prob =
            CompositeProblem::new(map, OuterFunction::norm(), InnerTerm::Zero, Order::First).unwrap();
        let probe = StationarityProbe::new(5.0, Order::First);
        assert!(matches!(
            stationarity_probe(&prob, &probe, &[0.3]),
            Err(ProbeError::UnsupportedProbe)
        ));
    }

    #[test]
    fn l_mu_requires_mu_above_threshold() {
        let probe = StationarityProbe::new(5.0, Order::First);
        assert!(probe.l_mu(2.0, 3.0).is_none()); // μ = M + L
        let l: f64 = probe.l_mu(1.0, 2.0).unwrap(); // (5+1−2)/(5−3) = 2
        assert!((l - 2.0).abs() < 1e-15);
    }
}
