//! Ball-constrained linearized subproblem behind the criticality measure:
//!
//! ```text
//! min_{‖y − x‖ ≤ r} ρ‖F(x) + ∇F(x)(y − x)‖ + h(y)
//! ```
//!
//! Solved by projected subgradient with iterate averaging. For zero/quadratic
//! inner terms the feasible set is the ball; for indicator terms it is the
//! intersection of the ball with the shifted set, handled by Dykstra's
//! alternating projections.

use crate::linalg;
use crate::problem::{CompositeProblem, InnerTerm};
use crate::scalar::Scalar;

use super::DualStatus;

#[derive(Debug, Clone)]
pub struct BallSolution<T> {
    pub value: T,
    pub minimizer: Vec<T>,
    pub status: DualStatus,
    pub iterations: usize,
}

/// Dykstra's algorithm for the intersection of the ball `‖d‖ ≤ r` with a
/// second convex set given by its projection in the d coordinates.
fn dykstra_project<T: Scalar>(
    d0: &[T],
    r: T,
    project_second: &dyn Fn(&[T]) -> Vec<T>,
) -> Vec<T> {
    let n = d0.len();
    let mut x = d0.to_vec();
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    for _ in 0..200 {
        let y = linalg::project_ball(&linalg::add(&x, &p), r);
        let p_new = linalg::sub(&linalg::add(&x, &p), &y);
        let z = project_second(&linalg::add(&y, &q));
        let q_new = linalg::sub(&linalg::add(&y, &q), &z);
        let delta = linalg::norm(&linalg::sub(&z, &x));
        x = z;
        p = p_new;
        q = q_new;
        if delta <= T::of(1e-13) * (T::one() + linalg::norm(&x)) {
            break;
        }
    }
    x
}

/// Solve the linearized ball problem at `x` with radius `r`.
///
/// `inner_tol` is the target accuracy (relative to 1 + |value|); `max_iters`
/// caps the subgradient iterations. Returns the best value seen among raw and
/// averaged iterates.
pub fn solve_linearized_ball<T: Scalar>(
    prob: &CompositeProblem<T>,
    x: &[T],
    r: T,
    inner_tol: T,
    max_iters: usize,
) -> BallSolution<T> {
    assert!(r > T::zero(), "ball radius must be positive");
    let f_x = prob.map().value(x);
    let jac = prob.map().jacobian(x);
    let rho = prob.outer().rho();

    let project: Box<dyn Fn(&[T]) -> Vec<T>> = match prob.inner() {
        InnerTerm::Indicator(set) => {
            let set = set.clone();
            let x_anchor = x.to_vec();
            Box::new(move |d: &[T]| {
                let shifted = {
                    let x_anchor = x_anchor.clone();
                    let set = set.clone();
                    move |d: &[T]| {
                        let y = set.project(&linalg::add(&x_anchor, d));
                        linalg::sub(&y, &x_anchor)
                    }
                };
                dykstra_project(d, r, &shifted)
            })
        }
        _ => Box::new(move |d: &[T]| linalg::project_ball(d, r)),
    };

    let objective = |d: &[T]| -> T {
        let y = linalg::add(x, d);
        let lin = linalg::add(&f_x, &jac.matvec(d));
        let h = prob.inner().eval(&y, T::of(1e-6));
        rho * linalg::norm(&lin) + h
    };

    // subgradient of the linearized objective in d
    let subgradient = |d: &[T]| -> Vec<T> {
        let lin = linalg::add(&f_x, &jac.matvec(d));
        let mut g = match prob.inner() {
            InnerTerm::Quadratic { b, a } => {
                let y = linalg::add(x, d);
                linalg::add(&b.matvec(&y), a)
            }
            _ => vec![T::zero(); d.len()],
        };
        let norm_lin = linalg::norm(&lin);
        if norm_lin > T::of(1e-15) {
            let u = linalg::scale(&lin, rho / norm_lin);
            let jt = jac.t_matvec(&u);
            for (gi, ji) in g.iter_mut().zip(&jt) {
                *gi = *gi + *ji;
            }
        }
        g
    };

    let mut d = project(&vec![T::zero(); x.len()]);
    let mut avg = d.clone();
    let mut best_val = objective(&d);
    let mut best_d = d.clone();
    let mut iterations = 0;
    let mut last_check = best_val;
    let mut stagnant = 0usize;

    // Diminishing steps scaled to the ball radius.
    for t in 0..max_iters {
        iterations = t + 1;
        let g = subgradient(&d);
        let gn = linalg::norm(&g);
        if gn <= T::of(1e-15) {
            break;
        }
        let alpha = r / (gn * T::of((t + 1) as f64).sqrt());
        d = project(&linalg::sub(&d, &linalg::scale(&g, alpha)));

        // running average of the tail (restarted every 512 steps)
        if t % 512 == 0 {
            avg = d.clone();
        } else {
            let k = T::of((t % 512 + 1) as f64);
            for (ai, di) in avg.iter_mut().zip(&d) {
                *ai = *ai + (*di - *ai) / k;
            }
        }

        if t % 64 == 0 || t + 1 == max_iters {
            let v = objective(&d);
            if v < best_val {
                best_val = v;
                best_d = d.clone();
            }
            let avg_proj = project(&avg);
            let va = objective(&avg_proj);
            if va < best_val {
                best_val = va;
                best_d = avg_proj;
            }
            // stop once progress stalls below a fraction of the target accuracy
            if t % 1024 == 0 && t > 0 {
                if last_check - best_val <= inner_tol * T::of(0.05) * (T::one() + best_val.abs()) {
                    stagnant += 1;
                    if stagnant >= 3 {
                        break;
                    }
                } else {
                    stagnant = 0;
                }
                last_check = best_val;
            }
        }
    }

    let status = if iterations < max_iters { DualStatus::Converged } else { DualStatus::IterationCap };
    BallSolution { value: best_val, minimizer: linalg::add(x, &best_d), status, iterations }
}

/// Iteration budget heuristic for a target tolerance: subgradient methods
/// converge like 1/√t, so the budget grows with 1/tol².
pub fn ball_iteration_budget<T: Scalar>(tol: T) -> usize {
    let t = tol.as_f64().max(1e-6);
    ((4.0 / t).powi(2) as usize).clamp(2_000, 400_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::{FnMap, Order, OuterFunction};
    use std::sync::Arc;

    fn linear_prob(c: Vec<f64>, a: Matrix<f64>) -> CompositeProblem<f64> {
        let n = a.cols();
        let m = a.rows();
        let a2 = a.clone();
        CompositeProblem::new(
            Arc::new(FnMap {
                n,
                m,
                value: Box::new(move |x: &[f64]| linalg::add(&c, &a.matvec(x))),
                jacobian: Box::new(move |_x: &[f64]| a2.clone()),
                hessians: None,
                lipschitz: Some(vec![0.0; m]),
                lipschitz_order: 1,
            }),
            OuterFunction::norm(),
            InnerTerm::Zero,
            Order::First,
        )
        .unwrap()
    }

    #[test]
    fn zero_residual_is_a_fixed_point() {
        let prob = linear_prob(vec![0.0], Matrix::from_rows(1, 1, vec![1.0]));
        let sol = solve_linearized_ball(&prob, &[0.0], 1.0, 1e-6, 5_000);
        assert!(sol.value.abs() <= 1e-8);
    }

    #[test]
    fn scalar_ball_constrained() {
        // F(x) = 1 + x, at x = 0 with r = 0.5: value 0.5 at d = −0.5
        let prob = linear_prob(vec![1.0], Matrix::from_rows(1, 1, vec![1.0]));
        let sol = solve_linearized_ball(&prob, &[0.0], 0.5, 1e-6, 20_000);
        assert!((sol.value - 0.5).abs() <= 1e-4, "value {}", sol.value);
        assert!((sol.minimizer[0] + 0.5).abs() <= 1e-3);
    }

    #[test]
    fn two_dim_grid_oracle() {
        // random-ish fixed c, A with r = 1: compare to a dense grid
        let a = Matrix::from_rows(2, 2, vec![1.2, -0.7, 0.4, 2.1]);
        let c = vec![0.9, -1.3];
        let prob = linear_prob(c.clone(), a.clone());
        let x = [0.0, 0.0];
        let sol = solve_linearized_ball(&prob, &x, 1.0, 1e-4, 400_000);

        let mut best = f64::INFINITY;
        let step = 1e-3;
        let mut d0 = -1.0;
        while d0 <= 1.0 {
            let mut d1 = -1.0;
            while d1 <= 1.0 {
                if d0 * d0 + d1 * d1 <= 1.0 {
                    let r0 = c[0] + a[(0, 0)] * d0 + a[(0, 1)] * d1;
                    let r1 = c[1] + a[(1, 0)] * d0 + a[(1, 1)] * d1;
                    let v = (r0 * r0 + r1 * r1).sqrt();
                    if v < best {
                        best = v;
                    }
                }
                d1 += step;
            }
            d0 += step;
        }
        assert!(
            (sol.value - best).abs() <= 2e-3,
            "subgradient value {} vs grid {best}",
            sol.value
        );
    }
}
