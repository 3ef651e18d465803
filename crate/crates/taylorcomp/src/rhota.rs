//! Outer loops: the fixed-M regularized Taylor method, its adaptive variant
//! with a doubling/halving line search on M, and the radius-r criticality
//! measure used for stationarity diagnostics and stopping.

use std::time::Instant;

use thiserror::Error;

use crate::history::{IterationRecord, RunHistory, TerminationReason};
use crate::linalg;
use crate::problem::{CompositeProblem, InnerTerm, Order};
use crate::scalar::Scalar;
use crate::subproblem::{
    ball_iteration_budget, solve_dual, solve_linearized_ball, solve_split_cone, DualSubproblem,
    SolverTolerances, SubproblemError,
};

#[derive(Debug, Error)]
pub enum RhotaError {
    #[error("starting point lies outside dom h")]
    InfeasibleStart,
    #[error("subproblem failed at iteration {iteration}: {source}")]
    SubproblemFailure { iteration: usize, source: SubproblemError },
    #[error("no solver covers order {order} with this inner term")]
    UnsupportedCombination { order: u32 },
    #[error("line search divergence at iteration {iteration}: M doubled {doublings} times")]
    LineSearchDivergence { iteration: usize, doublings: usize },
    #[error(transparent)]
    Problem(#[from] crate::problem::ProblemError),
}

/// Radius configuration of the criticality measure `M_f^r`.
#[derive(Debug, Clone, Copy)]
pub struct CriticalityConfig<T> {
    pub r: T,
    pub r_min: T,
    pub r_max: T,
    pub inner_tol: T,
    /// Cap for the inner subgradient solver; `None` derives one from the
    /// tolerance.
    pub max_inner_iters: Option<usize>,
}

impl<T: Scalar> CriticalityConfig<T> {
    pub fn with_radius(r: T) -> Self {
        Self { r, r_min: r, r_max: r, inner_tol: T::of(1e-4), max_inner_iters: None }
    }

    pub fn validate(&self) {
        assert!(T::zero() < self.r_min && self.r_min <= self.r && self.r <= self.r_max);
        assert!(self.inner_tol > T::zero());
    }
}

/// `M_f^r(x) = f(x) − min_{‖y−x‖≤r} [ g(F(x) + ∇F(x)(y−x)) + h(y) ]`.
/// Nonnegative up to the inner solver tolerance; zero exactly at weak
/// stationary points.
pub fn criticality_measure<T: Scalar>(
    prob: &CompositeProblem<T>,
    x: &[T],
    cfg: &CriticalityConfig<T>,
) -> T {
    cfg.validate();
    let budget = cfg.max_inner_iters.unwrap_or_else(|| ball_iteration_budget(cfg.inner_tol));
    let inner = solve_linearized_ball(prob, x, cfg.r, cfg.inner_tol, budget);
    prob.eval_f(x) - inner.value
}

/// Configuration shared by the fixed-M and adaptive drivers.
#[derive(Debug, Clone)]
pub struct RhotaConfig<T> {
    /// Fixed regularization parameter (ignored by the adaptive driver).
    pub reg_m: T,
    pub f_tol: Option<T>,
    pub step_tol: Option<T>,
    pub crit_tol: Option<T>,
    pub criticality: Option<CriticalityConfig<T>>,
    /// Compute the criticality measure at every iterate for logging even when
    /// it is not a stopping rule.
    pub log_criticality: bool,
    pub max_iters: usize,
    pub tolerances: SolverTolerances<T>,
}

impl<T: Scalar> RhotaConfig<T> {
    /// Defaults: stop on step norm ≤ 1e-8 or 200 iterations.
    pub fn new(reg_m: T) -> Self {
        assert!(reg_m > T::zero());
        Self {
            reg_m,
            f_tol: None,
            step_tol: Some(T::of(1e-8)),
            crit_tol: None,
            criticality: None,
            log_criticality: false,
            max_iters: 200,
            tolerances: SolverTolerances::default(),
        }
    }

    fn validate(&self) {
        assert!(self.reg_m > T::zero());
        assert!(self.max_iters >= 1);
        if self.crit_tol.is_some() {
            assert!(self.criticality.is_some(), "crit_tol needs a criticality configuration");
        }
    }
}

/// Adaptive line-search state: M_{k+1} = 2^{i−1}·M_k after accepting the
/// trial 2^i·M_k.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveConfig<T> {
    pub m0: T,
    pub r0: T,
    pub max_doublings: usize,
}

impl<T: Scalar> AdaptiveConfig<T> {
    pub fn new(m0: T, r0: T) -> Self {
        assert!(m0 > T::zero() && r0 > T::zero());
        Self { m0, r0, max_doublings: 60 }
    }
}

/// Result of a driver run, in solver precision alongside the f64 history.
#[derive(Debug)]
pub struct RhotaOutcome<T> {
    pub history: RunHistory,
    pub final_x: Vec<T>,
    /// Dual multiplier of the last solved subproblem (‖u‖ ≤ 1), if any
    /// subproblem was solved; used for multiplier recovery in penalty runs.
    pub final_u: Option<Vec<T>>,
    /// Stored M_k sequence (adaptive runs record the value entering each
    /// iteration; fixed runs repeat the configured M).
    pub m_sequence: Vec<T>,
}

struct StepOutcome<T> {
    step: Vec<T>,
    model_value_at_step: T,
    gap: Option<T>,
    u: Option<Vec<T>>,
}

/// Solve the order/h-appropriate subproblem at `x` with regularization `m`.
fn solve_step<T: Scalar>(
    prob: &CompositeProblem<T>,
    x: &[T],
    m: T,
    tol: &SolverTolerances<T>,
    iteration: usize,
) -> Result<StepOutcome<T>, RhotaError> {
    let model = prob.taylor_model(x, m)?;
    match (prob.inner(), prob.order()) {
        (InnerTerm::Indicator(set), Order::First) => {
            let rho = prob.outer().rho();
            let c = linalg::scale(model.anchor_value(), rho);
            let a = model.jacobian().scale(rho);
            let split = solve_split_cone(&c, &a, x, m, set.as_ref(), tol, 20_000)
                .map_err(|source| RhotaError::SubproblemFailure { iteration, source })?;
            let trial = linalg::add(x, &split.step);
            Ok(StepOutcome {
                model_value_at_step: model.value(prob, &trial),
                step: split.step,
                gap: Some(split.gap),
                u: Some(split.u),
            })
        }
        (InnerTerm::Indicator(_), Order::Second) => {
            Err(RhotaError::UnsupportedCombination { order: 2 })
        }
        _ => {
            let dsp = DualSubproblem::from_model(&model, prob)
                .map_err(|source| RhotaError::SubproblemFailure { iteration, source })?;
            let sol = solve_dual(&dsp, tol)
                .map_err(|source| RhotaError::SubproblemFailure { iteration, source })?;
            let trial = linalg::add(x, &sol.step);
            Ok(StepOutcome {
                model_value_at_step: model.value(prob, &trial),
                step: sol.step,
                gap: Some(sol.gap),
                u: Some(sol.u),
            })
        }
    }
}

enum MRule<T> {
    Fixed(T),
    Adaptive { m_k: T, r0: T, max_doublings: usize },
}

fn run_driver<T: Scalar>(
    prob: &CompositeProblem<T>,
    cfg: &RhotaConfig<T>,
    mut m_rule: MRule<T>,
    x0: &[T],
) -> Result<RhotaOutcome<T>, RhotaError> {
    cfg.validate();
    let mut x = x0.to_vec();
    let mut f = prob.eval_f(&x);
    if !f.is_finite() {
        return Err(RhotaError::InfeasibleStart);
    }

    let mut history = RunHistory::new();
    let mut final_u: Option<Vec<T>> = None;
    let mut m_sequence: Vec<T> = Vec::new();
    let fact = prob.order().reg_factorial::<T>();
    let p1 = (prob.order().p() + 1) as i32;

    let crit_at = |x: &[T]| -> Option<T> {
        cfg.criticality.as_ref().map(|cc| criticality_measure(prob, x, cc))
    };

    let mut k = 0usize;
    let termination;
    loop {
        let crit = if cfg.log_criticality || cfg.crit_tol.is_some() { crit_at(&x) } else { None };
        let terminal_record = |f: f64, crit: Option<T>, m: T| IterationRecord {
            k,
            x: x.iter().map(|v| v.as_f64()).collect(),
            f,
            step_norm: 0.0,
            m_used: m.as_f64(),
            model_value: None,
            model_gap: None,
            crit_measure: crit.map(|c| c.as_f64()),
            recovery_error: None,
            time_ms: None,
        };
        let m_current = match &m_rule {
            MRule::Fixed(m) => *m,
            MRule::Adaptive { m_k, .. } => *m_k,
        };

        if let Some(ft) = cfg.f_tol {
            if f <= ft {
                history.push(terminal_record(f.as_f64(), crit, m_current));
                termination = TerminationReason::FTol;
                break;
            }
        }
        if let (Some(ct), Some(c)) = (cfg.crit_tol, crit) {
            if c <= ct {
                history.push(terminal_record(f.as_f64(), crit, m_current));
                termination = TerminationReason::CritTol;
                break;
            }
        }
        if k >= cfg.max_iters {
            history.push(terminal_record(f.as_f64(), crit, m_current));
            termination = TerminationReason::MaxIterations;
            break;
        }

        let started = Instant::now();
        let (outcome, m_used, accepted_f) = match &mut m_rule {
            MRule::Fixed(m) => {
                let out = solve_step(prob, &x, *m, &cfg.tolerances, k)?;
                let trial = linalg::add(&x, &out.step);
                let f_trial = prob.eval_f(&trial);
                // descent test (model value at the step never exceeds the
                // anchor value s_M(x;x) = f(x)); a numerical violation means
                // the step is noise-level, so stop at the current iterate
                if !(out.model_value_at_step <= f) {
                    history.push(terminal_record(f.as_f64(), crit, *m));
                    termination = TerminationReason::SubproblemStall;
                    break;
                }
                m_sequence.push(*m);
                (out, *m, f_trial)
            }
            MRule::Adaptive { m_k, r0, max_doublings } => {
                m_sequence.push(*m_k);
                let mut i = 0usize;
                loop {
                    let m_trial = T::of(2.0).powi(i as i32) * *m_k;
                    let out = solve_step(prob, &x, m_trial, &cfg.tolerances, k)?;
                    let trial = linalg::add(&x, &out.step);
                    let f_trial = prob.eval_f(&trial);
                    let step_norm = linalg::norm(&out.step);
                    // accept once f(x_k) − f(x_{k+1}) ≥ R0/(p+1)!·‖Δ‖^{p+1}
                    if f - f_trial >= *r0 / fact * step_norm.powi(p1) {
                        *m_k = m_trial * T::of(0.5);
                        break (out, m_trial, f_trial);
                    }
                    i += 1;
                    if i > *max_doublings {
                        return Err(RhotaError::LineSearchDivergence {
                            iteration: k,
                            doublings: i,
                        });
                    }
                }
            }
        };

        let step_norm = linalg::norm(&outcome.step);
        let elapsed = started.elapsed().as_secs_f64() * 1e3;
        history.push(IterationRecord {
            k,
            x: x.iter().map(|v| v.as_f64()).collect(),
            f: f.as_f64(),
            step_norm: step_norm.as_f64(),
            m_used: m_used.as_f64(),
            model_value: Some(outcome.model_value_at_step.as_f64()),
            model_gap: outcome.gap.map(|g| g.as_f64()),
            crit_measure: crit.map(|c| c.as_f64()),
            recovery_error: None,
            time_ms: Some(elapsed),
        });
        if outcome.u.is_some() {
            final_u = outcome.u;
        }
        x = linalg::add(&x, &outcome.step);
        f = accepted_f;
        k += 1;

        if let Some(st) = cfg.step_tol {
            if step_norm <= st {
                let crit = if cfg.log_criticality || cfg.crit_tol.is_some() {
                    crit_at(&x)
                } else {
                    None
                };
                history.push(IterationRecord {
                    k,
                    x: x.iter().map(|v| v.as_f64()).collect(),
                    f: f.as_f64(),
                    step_norm: 0.0,
                    m_used: m_used.as_f64(),
                    model_value: None,
                    model_gap: None,
                    crit_measure: crit.map(|c| c.as_f64()),
                    recovery_error: None,
                    time_ms: None,
                });
                termination = TerminationReason::StepTol;
                break;
            }
        }
    }

    history.finish(termination);
    Ok(RhotaOutcome { history, final_x: x, final_u, m_sequence })
}

/// Fixed-M driver: each accepted step satisfies the model descent test
/// `s_M(x_{k+1}; x_k) ≤ s_M(x_k; x_k) = f(x_k)`.
pub fn rhota_run<T: Scalar>(
    prob: &CompositeProblem<T>,
    cfg: &RhotaConfig<T>,
    x0: &[T],
) -> Result<RhotaOutcome<T>, RhotaError> {
    run_driver(prob, cfg, MRule::Fixed(cfg.reg_m), x0)
}

/// Adaptive driver: doubles `2^i·M_k` until the decrease test
/// `f(x_k) − f(x_{k+1}) ≥ R0/(p+1)!·‖x_{k+1}−x_k‖^{p+1}` passes, then sets
/// `M_{k+1} = 2^{i−1}·M_k`. When the composite Lipschitz constant is known,
/// the stored sequence satisfies `M_k ≤ 2(R0 + L_g‖L_p‖)`.
pub fn arhota_run<T: Scalar>(
    prob: &CompositeProblem<T>,
    cfg: &RhotaConfig<T>,
    adaptive: &AdaptiveConfig<T>,
    x0: &[T],
) -> Result<RhotaOutcome<T>, RhotaError> {
    run_driver(
        prob,
        cfg,
        MRule::Adaptive { m_k: adaptive.m0, r0: adaptive.r0, max_doublings: adaptive.max_doublings },
        x0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::{FnMap, OuterFunction};
    use std::sync::Arc;

    fn linear_map(c: Vec<f64>, a: Matrix<f64>) -> Arc<dyn crate::problem::SmoothMap<f64>> {
        let m = a.rows();
        let a2 = a.clone();
        Arc::new(FnMap {
            n: a.cols(),
            m,
            value: Box::new(move |x: &[f64]| linalg::add(&c, &a.matvec(x))),
            jacobian: Box::new(move |_x: &[f64]| a2.clone()),
            hessians: None,
            lipschitz: Some(vec![0.0; m]),
            lipschitz_order: 1,
        })
    }

    #[test]
    fn zero_residual_start_terminates_immediately() {
        let prob = CompositeProblem::new(
            linear_map(vec![0.0], Matrix::identity(1)),
            OuterFunction::norm(),
            InnerTerm::Zero,
            Order::First,
        )
        .unwrap();
        let cfg = RhotaConfig::new(1.0);
        let out = rhota_run(&prob, &cfg, &[0.0]).unwrap();
        let recs = out.history.records();
        assert_eq!(recs[0].step_norm, 0.0);
        assert!(recs.len() <= 2);
        assert_eq!(out.history.summary().termination, TerminationReason::StepTol);
    }

    #[test]
    fn linear_map_line_search_never_doubles() {
        // exact model (L_p = 0): the R0 test passes at the first trial, so
        // M halves every iteration and never exceeds M_0
        let prob = CompositeProblem::new(
            linear_map(vec![1.0, -2.0], Matrix::identity(2)),
            OuterFunction::norm(),
            InnerTerm::Zero,
            Order::First,
        )
        .unwrap();
        let mut cfg = RhotaConfig::new(1.0);
        cfg.max_iters = 30;
        let adaptive = AdaptiveConfig::new(4.0, 1.0);
        let out = arhota_run(&prob, &cfg, &adaptive, &[0.5, 0.5]).unwrap();
        for pair in out.m_sequence.windows(2) {
            assert!(pair[1] <= pair[0] * 0.5 + 1e-15, "M never increases on an exact model");
        }
        assert!(out.history.summary().final_f <= 1e-6);
    }

    #[test]
    fn criticality_zero_at_zero_residual() {
        let prob = CompositeProblem::new(
            linear_map(vec![0.0], Matrix::identity(1)),
            OuterFunction::norm(),
            InnerTerm::Zero,
            Order::First,
        )
        .unwrap();
        let cfg = CriticalityConfig::with_radius(0.5);
        let c = criticality_measure(&prob, &[0.0], &cfg);
        assert!(c.abs() <= 1e-6);
    }
}
