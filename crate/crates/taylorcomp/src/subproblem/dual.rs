//! Concave-dual solver for the regularized model subproblem.
//!
//! The dual of the cubic-regularized model maximizes
//! `β(u, w) = ⟨u, c⟩ − ½⟨H(u,w)⁻¹G(u), G(u)⟩ − w³/(12M²)` over
//! `{‖u‖ ≤ 1, w ≥ 0, H(u,w) ≻ 0}` with `H(u,w) = W(u) + (w/2)I`. The solver
//! runs projected gradient ascent jointly in `(u, w)` — the gradient is the
//! model residual `T(d)` in `u` and `¼‖d‖² − w²/(4M²)` in `w`, both free once
//! `d = −H⁻¹G` is solved — interleaved with exact 1-D refreshes of `w` from
//! the monotone stationarity equation `w/M = ‖d(u,w)‖`. When that equation
//! has no root above the positive-definiteness boundary (the hard case), the
//! step is completed along the near-null direction of `H` so that
//! `‖d‖ = w/M` holds and the closed-form duality-gap identity stays exact.
//!
//! A normalization polish then drives `u` onto the residual direction, where
//! the maximizer lies whenever the residual at the step is nonzero.

use crate::linalg::{self, cholesky_spd, CholeskyFactor, SymMatrix};
use crate::scalar::Scalar;

use super::{
    DualSolution, DualStatus, DualSubproblem, DualTraceEntry, Regularization, SolverTolerances,
    SubproblemError,
};

const MAX_HALVINGS: usize = 60;
const MAX_W_DOUBLINGS: usize = 400;
const POLISH_ITERS: usize = 120;

/// Evaluation of the dual at a fixed feasible point. `d_plain = −H⁻¹G`
/// drives β and the ascent gradients; `d_step` additionally carries the
/// hard-case null-direction completion and is what a caller should step
/// along. The two coincide away from the PD boundary.
struct PhiEval<T> {
    w: Option<T>,
    d_plain: Vec<T>,
    d_step: Vec<T>,
    /// ‖d_plain‖; the completed norm is w/M by construction.
    plain_norm: T,
    step_norm: T,
    beta: T,
    /// the w search converged to the PD boundary instead of an interior root
    boundary: bool,
}

fn eval_clone<T: Scalar>(e: &PhiEval<T>) -> PhiEval<T> {
    PhiEval {
        w: e.w,
        d_plain: e.d_plain.clone(),
        d_step: e.d_step.clone(),
        plain_norm: e.plain_norm,
        step_norm: e.step_norm,
        beta: e.beta,
        boundary: e.boundary,
    }
}

fn beta_value<T: Scalar>(dsp: &DualSubproblem<T>, u: &[T], g_neg_hd: T, w: Option<T>) -> T {
    // β = ⟨u, c⟩ − ½⟨H⁻¹G, G⟩ [ − w³/(12 M²) for the cubic case ];
    // g_neg_hd carries ⟨H⁻¹G, G⟩ = −⟨G, d⟩.
    let mut beta = linalg::dot(u, &dsp.c) - T::of(0.5) * g_neg_hd;
    if let (Some(w), Regularization::Cubic { m }) = (w, dsp.reg) {
        beta = beta - w * w * w / (T::of(12.0) * m * m);
    }
    beta
}

/// Near-null direction of `H` (smallest eigenvector) by inverse iteration on
/// an available Cholesky factor.
fn near_null_direction<T: Scalar>(chol: &CholeskyFactor<T>, n: usize) -> Vec<T> {
    let mut v = vec![T::one() / T::of(n as f64).sqrt(); n];
    for _ in 0..25 {
        let next = chol.solve(&v).expect("dimension checked");
        let nn = linalg::norm(&next);
        if nn <= T::of(1e-300) {
            break;
        }
        v = linalg::scale(&next, T::one() / nn);
    }
    v
}

/// Complete a boundary-case step along the near-null direction so that
/// `‖d‖ = w/M` holds (the trust-region hard-case correction). Both roots of
/// `‖d + τv‖ = target` satisfy the closed-form gap identity when `v` is an
/// exact null vector orthogonal to `G`; numerically each root is admitted
/// only if its identity-error bound (built from `Hv`, `⟨G,v⟩` and `⟨d,Hv⟩`)
/// stays at round-off level. Among admitted roots the smaller primal model
/// value decides.
fn hard_case_completion<T: Scalar>(
    dsp: &DualSubproblem<T>,
    d: &mut Vec<T>,
    v: &[T],
    h_v: &[T],
    g: &[T],
    target_norm: T,
    beta_scale: T,
) {
    let d_norm2 = linalg::dot(d, d);
    let target2 = target_norm * target_norm;
    let delta = target2 - d_norm2;
    if delta <= T::zero() {
        return;
    }
    let cross = linalg::dot(d, v);
    let s = (cross * cross + delta).sqrt();
    let g_v = linalg::dot(g, v).abs();
    let d_hv = linalg::dot(d, h_v).abs();
    let v_hv = linalg::dot(v, h_v).abs();
    let err = |tau: T| tau.abs() * (g_v + d_hv) + T::of(0.5) * tau * tau * v_hv;
    let cap = T::of(1e-9) * (T::one() + beta_scale.abs());

    let mut best: Option<(T, Vec<T>)> = None;
    for tau in [-cross + s, -cross - s] {
        if err(tau) > cap {
            continue;
        }
        let mut cand = d.clone();
        linalg::axpy(&mut cand, tau, v);
        let value = dsp.model_value(&cand);
        if best.as_ref().map_or(true, |(bv, _)| value < *bv) {
            best = Some((value, cand));
        }
    }
    if let Some((_, cand)) = best {
        *d = cand;
    }
}

/// Solve `w/M = ‖H(u,w)⁻¹G(u)‖` over `w ≥ max(0, w_pd(u))`.
///
/// In the hard case (no root above the positive-definiteness boundary) the
/// search converges onto the boundary, the returned step is completed along
/// the near-null direction of `H`, and the evaluation is flagged.
fn solve_w<T: Scalar>(
    dsp: &DualSubproblem<T>,
    u: &[T],
    curvature: &SymMatrix<T>,
    g: &[T],
    tol: &SolverTolerances<T>,
) -> Result<PhiEval<T>, SubproblemError> {
    let m = dsp.reg.m();
    let n = dsp.dim();
    let g_norm = linalg::norm(g);
    let scale = curvature.frob_norm() + m + T::one();

    let try_chol = |w: T| -> Option<CholeskyFactor<T>> {
        let mut h = curvature.clone();
        h.add_diag_assign(w * T::of(0.5));
        cholesky_spd(&h).ok()
    };

    // ψ(w) and the plain step at a feasible w
    let eval = |chol: &CholeskyFactor<T>, w: T| -> (Vec<T>, T, T) {
        let d = linalg::scale(&chol.solve(g).expect("dimension checked"), -T::one());
        let r = linalg::norm(&d);
        (d, r, w / m - r)
    };

    let finish = |chol: &CholeskyFactor<T>, w: T, d: Vec<T>, boundary: bool| -> PhiEval<T> {
        let plain_norm = linalg::norm(&d);
        let beta = beta_value(dsp, u, -linalg::dot(g, &d), Some(w));
        // complete only a genuine hard case; a boundary at noise level means
        // H(u, 0) is already (semi)definite and d stays as solved
        let mut d_step = d.clone();
        if boundary && w / m > T::of(1e4) * tol.w_tol * (T::one() + w) {
            let v = near_null_direction(chol, n);
            let mut h = curvature.clone();
            h.add_diag_assign(w * T::of(0.5));
            let h_v = h.matvec(&v);
            hard_case_completion(dsp, &mut d_step, &v, &h_v, g, w / m, beta);
        }
        let step_norm = linalg::norm(&d_step);
        PhiEval { w: Some(w), d_plain: d, d_step, plain_norm, step_norm, beta, boundary }
    };

    if g_norm == T::zero() {
        // Zero gradient: d = 0 for every w; the dual prefers the smallest
        // feasible w, which is 0 when H(u,0) is already PD.
        if let Some(_c) = try_chol(T::zero()) {
            return Ok(PhiEval {
                w: Some(T::zero()),
                d_plain: vec![T::zero(); n],
                d_step: vec![T::zero(); n],
                plain_norm: T::zero(),
                step_norm: T::zero(),
                beta: beta_value(dsp, u, T::zero(), Some(T::zero())),
                boundary: false,
            });
        }
        // find the PD boundary by doubling + bisection
        let mut hi = scale * T::of(1e-8);
        let mut doublings = 0;
        while try_chol(hi).is_none() {
            hi = hi * T::of(2.0);
            doublings += 1;
            if doublings > MAX_W_DOUBLINGS {
                return Err(SubproblemError::NoFeasibleW { w_scale: scale.as_f64() });
            }
        }
        let mut lo = T::zero();
        let mut chol = try_chol(hi).expect("feasible by construction");
        while hi - lo > tol.w_tol * (T::one() + hi) {
            let mid = (lo + hi) * T::of(0.5);
            match try_chol(mid) {
                Some(c) => {
                    hi = mid;
                    chol = c;
                }
                None => lo = mid,
            }
        }
        return Ok(finish(&chol, hi, vec![T::zero(); n], true));
    }

    // Find a feasible starting w.
    let mut lo = T::zero(); // infeasible or ψ < 0 (except when the root is at 0)
    let mut hi;
    let mut chol = match try_chol(T::zero()) {
        Some(c) => {
            hi = T::zero();
            c
        }
        None => {
            let mut w = scale * T::of(1e-8);
            let mut doublings = 0;
            loop {
                if let Some(c) = try_chol(w) {
                    lo = w * T::of(0.5);
                    hi = w;
                    break c;
                }
                w = w * T::of(2.0);
                doublings += 1;
                if doublings > MAX_W_DOUBLINGS {
                    return Err(SubproblemError::NoFeasibleW { w_scale: scale.as_f64() });
                }
            }
        }
    };

    let (mut d, mut r, mut psi) = eval(&chol, hi);

    if psi < T::zero() {
        // grow until ψ ≥ 0; ψ is increasing in w so this terminates
        let mut doublings = 0;
        loop {
            lo = hi;
            hi = (hi * T::of(2.0)).max(scale * T::of(1e-8));
            let c = try_chol(hi).expect("H(u, w) stays PD as w grows");
            let e = eval(&c, hi);
            chol = c;
            d = e.0;
            r = e.1;
            psi = e.2;
            if psi >= T::zero() {
                break;
            }
            doublings += 1;
            if doublings > MAX_W_DOUBLINGS {
                return Err(SubproblemError::NoFeasibleW { w_scale: scale.as_f64() });
            }
        }
    }

    // Safeguarded Newton from the ψ ≥ 0 side. ψ is concave on the feasible
    // interval, so Newton from above converges monotonically to the root;
    // bisection keeps the bracket valid when a candidate leaves it.
    let mut boundary = false;
    for _ in 0..200 {
        if psi.abs() <= tol.w_tol * (T::one() + hi / m) {
            break;
        }
        if hi - lo <= tol.w_tol * (T::one() + hi) {
            // converged onto the PD boundary without a root: hard case
            boundary = psi > tol.w_tol * (T::one() + hi / m);
            break;
        }
        let candidate = if r > T::zero() {
            // ψ'(w) = 1/M + ⟨d, H⁻¹d⟩ / (2‖d‖)
            let hinv_d = chol.solve(&d).expect("dimension checked");
            let dpsi = T::one() / m + linalg::dot(&d, &hinv_d) / (T::of(2.0) * r);
            hi - psi / dpsi
        } else {
            (lo + hi) * T::of(0.5)
        };
        let w_new = if candidate <= lo || candidate >= hi || !candidate.is_finite() {
            (lo + hi) * T::of(0.5)
        } else {
            candidate
        };
        match try_chol(w_new) {
            Some(c) => {
                let e = eval(&c, w_new);
                if e.2 < T::zero() {
                    lo = w_new;
                } else {
                    chol = c;
                    d = e.0;
                    r = e.1;
                    psi = e.2;
                    hi = w_new;
                }
            }
            None => lo = w_new,
        }
    }

    Ok(finish(&chol, hi, d, boundary))
}

/// Single-factorization evaluation of the dual at a fixed `(u, w)` (cubic) or
/// `u` (quadratic); `None` when `H` is not positive definite there.
fn eval_at<T: Scalar>(dsp: &DualSubproblem<T>, u: &[T], w: Option<T>) -> Option<PhiEval<T>> {
    let mut h = dsp.curvature(u);
    let g = dsp.gradient(u);
    let shift = match (dsp.reg, w) {
        (Regularization::Cubic { .. }, Some(w)) => w * T::of(0.5),
        (Regularization::Quadratic { m }, None) => m,
        _ => unreachable!("w is present exactly for cubic regularizers"),
    };
    h.add_diag_assign(shift);
    match cholesky_spd(&h) {
        Ok(chol) => {
            let d = linalg::scale(&chol.solve(&g).expect("dimension checked"), -T::one());
            let step_norm = linalg::norm(&d);
            let beta = beta_value(dsp, u, -linalg::dot(&g, &d), w);
            Some(PhiEval {
                w,
                d_plain: d.clone(),
                d_step: d,
                plain_norm: step_norm,
                step_norm,
                beta,
                boundary: false,
            })
        }
        Err(_) => None,
    }
}

/// Evaluate the w-eliminated dual at `u` (cubic: exact inner w solve;
/// quadratic: direct).
fn eval_phi<T: Scalar>(
    dsp: &DualSubproblem<T>,
    u: &[T],
    tol: &SolverTolerances<T>,
) -> Result<Option<PhiEval<T>>, SubproblemError> {
    match dsp.reg {
        Regularization::Cubic { .. } => {
            let curvature = dsp.curvature(u);
            let g = dsp.gradient(u);
            solve_w(dsp, u, &curvature, &g, tol).map(Some)
        }
        Regularization::Quadratic { .. } => Ok(eval_at(dsp, u, None)),
    }
}

fn trace_entry<T: Scalar>(dsp: &DualSubproblem<T>, u: &[T], eval: &PhiEval<T>) -> DualTraceEntry<T> {
    let theta_u = dsp.model_value_with_u(&eval.d_step, u);
    let closed_form = match (dsp.reg, eval.w) {
        (Regularization::Cubic { m }, Some(w)) => {
            let r = eval.step_norm;
            m / T::of(12.0) * (w / m + T::of(2.0) * r) * (r - w / m) * (r - w / m)
        }
        _ => T::zero(),
    };
    DualTraceEntry {
        beta: eval.beta,
        theta_u,
        step_norm: eval.step_norm,
        w: eval.w,
        gap_identity_residual: (theta_u - eval.beta) - closed_form,
    }
}

/// Shared projected-gradient ascent over the unit ball (joint over `(u, w)`
/// for cubic regularizers).
pub fn solve_dual<T: Scalar>(
    dsp: &DualSubproblem<T>,
    tol: &SolverTolerances<T>,
) -> Result<DualSolution<T>, SubproblemError> {
    tol.validate();
    let one = T::one();
    let cubic = matches!(dsp.reg, Regularization::Cubic { .. });
    let m_reg = dsp.reg.m();

    // start along the normalized residual (the optimal u aligns with it);
    // the best dual value on the halving ray t·u₀ picks the scale — for
    // small regularization the feasible well sits close to the origin.
    let u_raw = linalg::normalize_or_zero(&dsp.c, T::of(1e-14));
    let mut u = vec![T::zero(); dsp.residual_dim()];
    let mut eval: Option<PhiEval<T>> = None;
    let mut t = one;
    let mut declines = 0;
    for _ in 0..=48 {
        let u_t = linalg::scale(&u_raw, t);
        if let Some(e) = eval_phi(dsp, &u_t, tol)? {
            match &eval {
                Some(best) if e.beta <= best.beta => declines += 1,
                _ => {
                    declines = 0;
                    u = u_t;
                    eval = Some(e);
                }
            }
            if declines >= 3 {
                break;
            }
        }
        t = t * T::of(0.5);
    }
    let mut eval = match eval {
        Some(e) => e,
        // H(0) = B + mI is PD for PSD B and any w covers the cubic case, so
        // only numeric overflow lands here
        None => return Err(SubproblemError::NoFeasibleW { w_scale: f64::NAN }),
    };

    let mut trace = vec![trace_entry(dsp, &u, &eval)];
    let mut best_beta = eval.beta;
    let mut best = (u.clone(), eval_clone(&eval));

    let mut alpha = one / (one + linalg::norm(&dsp.c));
    let mut status = DualStatus::IterationCap;
    let mut iterations = 0;
    let mut prev_z: Option<Vec<T>> = None;
    let mut prev_g: Option<Vec<T>> = None;
    let noise = |b: T| T::of(1e-13) * (one + b.abs());

    for it in 0..tol.max_iters {
        iterations = it + 1;
        let grad_u = dsp.residual_at(&eval.d_plain);

        let pg_u = linalg::sub(&linalg::project_ball(&linalg::add(&u, &grad_u), one), &u);
        let pg_norm = linalg::norm(&pg_u);
        if pg_norm <= tol.grad_tol && !eval.boundary {
            status = DualStatus::Converged;
            break;
        }

        // Barzilai–Borwein scaling from the previous (u, gradient) pair
        if let (Some(pu), Some(pg)) = (&prev_z, &prev_g) {
            let dz = linalg::sub(&u, pu);
            let dg = linalg::sub(&grad_u, pg);
            let zz = linalg::dot(&dz, &dz);
            let zg = linalg::dot(&dz, &dg);
            if zg < -T::of(1e-300) && zz > T::zero() {
                alpha = (zz / -zg).min(alpha * T::of(64.0)).max(alpha * T::of(1e-4));
            }
        }
        prev_z = Some(u.clone());
        prev_g = Some(grad_u.clone());

        // backtracking over the w-eliminated dual: each trial re-solves the
        // inner w problem, which doubles as feasibility restoration when the
        // u move crosses the positive-definiteness boundary
        let mut halvings = 0;
        let mut accepted = false;
        loop {
            let u_try = linalg::project_ball(&linalg::add(&u, &linalg::scale(&grad_u, alpha)), one);
            match eval_phi(dsp, &u_try, tol)? {
                Some(e) if e.beta > eval.beta + noise(eval.beta) => {
                    u = u_try;
                    eval = e;
                    accepted = true;
                    alpha = alpha * T::of(1.3);
                    break;
                }
                _ => {
                    alpha = alpha * T::of(0.5);
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        break;
                    }
                }
            }
        }

        // alignment candidates: damped moves toward the residual direction
        // of the completed step, accepted on dual improvement only
        if !accepted || it % 8 == 7 {
            let resid = dsp.residual_at(&eval.d_step);
            let rn = linalg::norm(&resid);
            if rn > T::of(1e-14) {
                let aligned = linalg::scale(&resid, one / rn);
                let mut s = one;
                for _ in 0..5 {
                    let mixed: Vec<T> = u
                        .iter()
                        .zip(&aligned)
                        .map(|(ui, ai)| *ui + s * (*ai - *ui))
                        .collect();
                    let u_cand = linalg::project_ball(&mixed, one);
                    if let Some(e) = eval_phi(dsp, &u_cand, tol)? {
                        if e.beta > eval.beta + noise(eval.beta) {
                            u = u_cand;
                            eval = e;
                            accepted = true;
                            prev_z = None;
                            prev_g = None;
                            break;
                        }
                    }
                    s = s * T::of(0.5);
                }
            }
        }

        if std::env::var("TC_DUAL_DEBUG").is_ok() {
            eprintln!(
                "it={it} beta={:?} pg={:?} alpha={:?} accepted={accepted} boundary={} w={:?}",
                eval.beta, pg_norm, alpha, eval.boundary, eval.w
            );
        }
        trace.push(trace_entry(dsp, &u, &eval));
        if eval.beta > best_beta {
            best_beta = eval.beta;
            best = (u.clone(), eval_clone(&eval));
        }
        if !accepted {
            // neither gradient nor alignment moves improve the dual: treat
            // as converged-to-boundary and let the certificates speak
            status = if eval.boundary { DualStatus::BoundaryStall } else { DualStatus::Converged };
            break;
        }
    }

    // Re-solve w exactly at the best multiplier so that the returned step
    // sits on the fixed point w/M = ‖d‖ (joint steps can leave it off, which
    // degrades the primal extraction near a singular H).
    if cubic {
        if let Some(e) = eval_phi(dsp, &best.0, tol)? {
            if e.beta >= best_beta - T::of(1e-13) * (one + best_beta.abs()) {
                best_beta = best_beta.max(e.beta);
                best.1 = e;
            }
        }
    }

    // Normalization polish: at the maximizer with a nonzero residual, u is
    // the unit vector along T(d). Iterating the alignment map sharpens both
    // u and the gap certificate; guarded by the dual value.
    let mut u_pol = best.0.clone();
    let mut eval_pol = eval_clone(&best.1);
    for _ in 0..POLISH_ITERS {
        let resid = dsp.residual_at(&eval_pol.d_step);
        let rn = linalg::norm(&resid);
        if rn <= T::of(1e-14) {
            break;
        }
        let u_new = linalg::scale(&resid, one / rn);
        if linalg::norm(&linalg::sub(&u_new, &u_pol)) <= T::epsilon() {
            break;
        }
        match eval_phi(dsp, &u_new, tol)? {
            Some(e) if e.beta >= best_beta - T::of(1e-13) * (one + best_beta.abs()) => {
                if e.beta > best_beta {
                    best_beta = e.beta;
                    best = (u_new.clone(), eval_clone(&e));
                }
                u_pol = u_new;
                eval_pol = e;
            }
            _ => break,
        }
    }
    trace.push(trace_entry(dsp, &best.0, &best.1));

    let (u_final, eval_final) = best;
    let theta = dsp.model_value(&eval_final.d_step);
    let gap = theta - eval_final.beta;
    if status != DualStatus::Converged && eval_final.boundary {
        status = DualStatus::BoundaryStall;
    }
    Ok(DualSolution {
        u: u_final,
        w: eval_final.w,
        step: eval_final.d_step,
        theta,
        beta: eval_final.beta,
        gap,
        status,
        iterations,
        trace,
    })
}

/// Public wrapper around the w search: returns the `(w, d)` pair satisfying
/// the stationarity equation `w/M = ‖H(u,w)⁻¹G(u)‖` for a fixed multiplier
/// (the step is hard-case-completed when the equation has no interior root).
pub fn solve_w_fixed_point<T: Scalar>(
    dsp: &DualSubproblem<T>,
    u: &[T],
    tol: &SolverTolerances<T>,
) -> Result<(T, Vec<T>), SubproblemError> {
    assert!(
        matches!(dsp.reg, Regularization::Cubic { .. }),
        "w elimination only applies to the cubic regularizer"
    );
    let curvature = dsp.curvature(u);
    let g = dsp.gradient(u);
    let eval = solve_w(dsp, u, &curvature, &g, tol)?;
    Ok((eval.w.expect("cubic eval has w"), eval.d_step))
}

/// Global solve of the order-2 model with zero/quadratic inner term.
pub fn solve_p2_dual<T: Scalar>(
    dsp: &DualSubproblem<T>,
    tol: &SolverTolerances<T>,
) -> Result<DualSolution<T>, SubproblemError> {
    assert!(
        matches!(dsp.reg, Regularization::Cubic { .. }),
        "solve_p2_dual expects a cubic regularizer"
    );
    solve_dual(dsp, tol)
}

/// Solve of the linearized (order-1) model with zero/quadratic inner term.
pub fn solve_p1_dual<T: Scalar>(
    dsp: &DualSubproblem<T>,
    tol: &SolverTolerances<T>,
) -> Result<DualSolution<T>, SubproblemError> {
    assert!(
        matches!(dsp.reg, Regularization::Quadratic { .. }),
        "solve_p1_dual expects a quadratic regularizer"
    );
    assert!(dsp.hessians.is_empty(), "solve_p1_dual expects a linearized model");
    solve_dual(dsp, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn scalar_dsp(
        c: f64,
        a: f64,
        hess: Option<f64>,
        b: Option<f64>,
        reg: Regularization<f64>,
    ) -> DualSubproblem<f64> {
        DualSubproblem {
            c: vec![c],
            jacobian: Matrix::from_rows(1, 1, vec![a]),
            hessians: hess.map(|h| vec![SymMatrix::diag(&[h])]).unwrap_or_default(),
            b: b.map(|v| SymMatrix::diag(&[v])),
            h_lin: vec![0.0],
            reg,
            anchor: vec![0.0],
        }
    }

    #[test]
    fn w_fixed_point_zero_gradient() {
        // H(u, 0) = 1 at u = 1, G = 0: w = 0, d = 0
        let dsp = scalar_dsp(1.0, 0.0, Some(1.0), None, Regularization::Cubic { m: 2.0 });
        let tol = SolverTolerances::default();
        let (w, d) = solve_w_fixed_point(&dsp, &[1.0], &tol).unwrap();
        assert_eq!(w, 0.0);
        assert_eq!(d, vec![0.0]);
    }

    #[test]
    fn w_fixed_point_scalar_root() {
        // H₀ = −1, G = 1, M = 2: root of w/2 = 1/(w/2 − 1) on (2, ∞),
        // i.e. s² − s − 1 = 0 with s = w/2 — the golden ratio.
        // Independent bisection oracle to 1e-12:
        let psi = |w: f64| w / 2.0 - 1.0 / (w / 2.0 - 1.0);
        let (mut lo, mut hi) = (2.0 + 1e-9, 100.0);
        assert!(psi(lo) < 0.0 && psi(hi) > 0.0);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if psi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w_oracle = 0.5 * (lo + hi);
        assert!((w_oracle - (1.0 + 5.0f64.sqrt())).abs() < 1e-9);

        let dsp = scalar_dsp(1.0, 1.0, Some(-1.0), None, Regularization::Cubic { m: 2.0 });
        let tol = SolverTolerances { w_tol: 1e-12, ..Default::default() };
        let (w, d) = solve_w_fixed_point(&dsp, &[1.0], &tol).unwrap();
        assert!((w - w_oracle).abs() < 1e-8, "w = {w} vs oracle {w_oracle}");
        // both sides of the stationarity equation agree
        assert!((w / 2.0 - linalg::norm(&d)).abs() <= 1e-10 * (1.0 + w / 2.0));
    }

    #[test]
    fn hard_case_step_matches_w_over_m() {
        // u makes W(u) indefinite while G ⟂ the negative direction: the root
        // search lands on the PD boundary and the completed step satisfies
        // ‖d‖ = w/M exactly.
        let dsp: DualSubproblem<f64> = DualSubproblem {
            c: vec![1.0],
            jacobian: Matrix::from_rows(1, 2, vec![0.0, 1.0]),
            hessians: vec![SymMatrix::diag(&[-2.0, 1.0])],
            b: None,
            h_lin: vec![0.0, 0.0],
            reg: Regularization::Cubic { m: 0.5 },
            anchor: vec![0.0, 0.0],
        };
        // G(u) = (0, u); W(u) = diag(−2u, u): at u = 1 the PD boundary is
        // w_pd = 4 while ‖d‖ = 1/(1 + w/2) stays below w/M there → hard case
        let tol = SolverTolerances { w_tol: 1e-12, ..Default::default() };
        let (w, d) = solve_w_fixed_point(&dsp, &[1.0], &tol).unwrap();
        assert!((w - 4.0).abs() < 1e-6, "w converges to the PD boundary, got {w}");
        assert!(
            (linalg::norm(&d) - w / 0.5).abs() <= 1e-6 * (1.0 + w / 0.5),
            "completed step has norm w/M"
        );
        // the completion lives on the first coordinate (the null direction)
        assert!(d[0].abs() > 1.0);
    }

    #[test]
    fn p2_dual_zero_anchor_residual() {
        // F(x_k) = 0, a = 0 → d = 0, θ = β = 0
        let dsp = scalar_dsp(0.0, 1.0, Some(0.5), None, Regularization::Cubic { m: 3.0 });
        let sol = solve_p2_dual(&dsp, &SolverTolerances::default()).unwrap();
        assert!(linalg::norm(&sol.step) <= 1e-12);
        assert!(sol.theta.abs() <= 1e-12 && sol.beta.abs() <= 1e-12);
    }

    #[test]
    fn p2_dual_scalar_grid_oracle() {
        // min |1 + d| + |d|³ (m = 6): d* = −1/√3, value 1 − 2/(3√3)
        let dsp = scalar_dsp(1.0, 1.0, Some(0.0), None, Regularization::Cubic { m: 6.0 });
        let sol = solve_p2_dual(&dsp, &SolverTolerances::default()).unwrap();

        let f = |d: f64| (1.0 + d).abs() + d.abs().powi(3);
        let mut best = (f64::INFINITY, 0.0);
        let mut d = -3.0;
        while d <= 3.0 {
            let v = f(d);
            if v < best.0 {
                best = (v, d);
            }
            d += 1e-6;
        }
        let expect_d = -1.0 / 3.0f64.sqrt();
        let expect_v = 1.0 - 2.0 / (3.0 * 3.0f64.sqrt());
        assert!((best.1 - expect_d).abs() < 1e-5, "grid oracle locates the analytic minimizer");
        assert!((best.0 - expect_v).abs() < 1e-10);

        assert!((sol.step[0] - expect_d).abs() < 1e-6, "step {} vs {}", sol.step[0], expect_d);
        assert!((sol.theta - expect_v).abs() < 1e-8);
        assert!(sol.gap.abs() <= 1e-8);
        // alignment: u = T(d)/‖T(d)‖
        let resid = dsp.residual_at(&sol.step);
        assert!((sol.u[0] - resid[0] / resid[0].abs()).abs() < 1e-6);
        // w/M = ‖d‖ at convergence
        assert!((sol.w.unwrap() / 6.0 - linalg::norm(&sol.step)).abs() <= 1e-6);
    }

    #[test]
    fn gap_identity_zero_when_w_matches_step() {
        // any (u, w) with w = M·‖d‖ makes the closed-form gap vanish
        let dsp = scalar_dsp(2.0, 1.5, Some(0.3), None, Regularization::Cubic { m: 4.0 });
        let tol = SolverTolerances { w_tol: 1e-13, ..Default::default() };
        let u = [0.8];
        let (w, d) = solve_w_fixed_point(&dsp, &u, &tol).unwrap();
        let r = linalg::norm(&d);
        let closed = 4.0 / 12.0 * (w / 4.0 + 2.0 * r) * (r - w / 4.0) * (r - w / 4.0);
        assert!(closed.abs() <= 1e-10);
        // and θ(d, u) − β equals it
        let g = dsp.gradient(&u);
        let beta = beta_value(&dsp, &u, -linalg::dot(&g, &d), Some(w));
        let theta_u = dsp.model_value_with_u(&d, &u);
        assert!((theta_u - beta - closed).abs() <= 1e-10);
    }

    #[test]
    fn p1_dual_scalar_grid_oracle() {
        // min |1 + d| + ½d²: d* = −1, value ½; subgradient at the kink
        // contains 0 since u·A + d = 1·1 + (−1) = 0 with u ∈ [−1, 1].
        let dsp = scalar_dsp(1.0, 1.0, None, None, Regularization::Quadratic { m: 1.0 });
        let sol = solve_p1_dual(&dsp, &SolverTolerances::default()).unwrap();

        let f = |d: f64| (1.0 + d).abs() + 0.5 * d * d;
        let mut best = (f64::INFINITY, 0.0);
        let mut d = -3.0;
        while d <= 3.0 {
            let v = f(d);
            if v < best.0 {
                best = (v, d);
            }
            d += 1e-6;
        }
        assert!((best.1 + 1.0).abs() < 1e-5 && (best.0 - 0.5).abs() < 1e-10);

        assert!((sol.step[0] + 1.0).abs() < 1e-6);
        assert!((sol.theta - 0.5).abs() < 1e-8);
        assert!(sol.gap.abs() <= 1e-8 * (1.0 + sol.theta.abs()));
        let subgrad = sol.u[0] * 1.0 + sol.step[0];
        assert!(subgrad.abs() < 1e-6 && sol.u[0].abs() <= 1.0 + 1e-10);
    }

    #[test]
    fn p1_dual_gradient_matches_finite_differences() {
        // φ(u) = ⟨u,c⟩ − ½⟨H⁻¹G(u), G(u)⟩ on a 3×2 instance; the envelope
        // gradient is the model residual at d(u).
        let dsp = DualSubproblem {
            c: vec![1.0, -0.5, 0.25],
            jacobian: Matrix::from_rows(3, 2, vec![1.0, 2.0, -0.5, 1.0, 0.25, -1.5]),
            hessians: vec![],
            b: Some(SymMatrix::new(Matrix::from_rows(2, 2, vec![2.0, 0.5, 0.5, 1.0]))),
            h_lin: vec![0.3, -0.2],
            reg: Regularization::Quadratic { m: 1.5 },
            anchor: vec![0.0, 0.0],
        };
        let phi = |u: &[f64]| -> f64 {
            let e: PhiEval<f64> = eval_at(&dsp, u, None).unwrap();
            e.beta
        };
        let mut state = 77u64;
        let mut unit = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 0.9 - 0.45
        };
        for _ in 0..10 {
            let u = vec![unit(), unit(), unit()];
            let eval = eval_at(&dsp, &u, None).unwrap();
            let grad = dsp.residual_at(&eval.d_plain);
            let h = 1e-6;
            for i in 0..3 {
                let mut up = u.clone();
                let mut um = u.clone();
                up[i] += h;
                um[i] -= h;
                let fd = (phi(&up) - phi(&um)) / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "component {i}: fd {fd} vs analytic {}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn hopp_p1_curvature_factor_grid_oracle() {
        // Resolves the H factor for the quadratic proximal subproblem:
        // min |x² − 1| + (M/2)(x − x_k)² with Q = 1, z = 1.
        // Completing the square gives H(u) = 2u·Q + M·I; the grid oracle is
        // authoritative. Two instances: one with the minimizer at the kink
        // (x_k = 2, M = 1 → x* = 1) and a discriminating one with an interior
        // smooth minimizer (x_k = 0.5, M = 8 → x* = 2/3).
        let cases = [(2.0f64, 1.0f64, 1.0f64), (0.5, 8.0, 2.0 / 3.0)];
        for (xk, m, expect) in cases {
            let dsp = DualSubproblem {
                c: vec![xk * xk - 1.0],
                jacobian: Matrix::from_rows(1, 1, vec![2.0 * xk]),
                hessians: vec![SymMatrix::diag(&[2.0])],
                b: None,
                h_lin: vec![0.0],
                reg: Regularization::Quadratic { m },
                anchor: vec![xk],
            };
            let sol = solve_dual(&dsp, &SolverTolerances::default()).unwrap();
            let x_new = xk + sol.step[0];

            let f = |x: f64| (x * x - 1.0).abs() + 0.5 * m * (x - xk) * (x - xk);
            let mut best = (f64::INFINITY, 0.0);
            let mut x = -3.0;
            while x <= 3.0 {
                let v = f(x);
                if v < best.0 {
                    best = (v, x);
                }
                x += 1e-6;
            }
            assert!(
                (best.1 - expect).abs() < 1e-5,
                "oracle minimizer {} vs analytic {expect}",
                best.1
            );
            assert!((x_new - expect).abs() < 1e-6, "x⁺ = {x_new} vs oracle {expect} (M = {m})");
            assert!((sol.theta - best.0).abs() < 1e-6);
        }
    }
}
