//! Experiment front end shared by the `taylorcomp` binary: flat JSON run
//! configurations, experiment dispatch, and history serialization.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apps::{
    self, build_ofc_problem, embedded_systems, gen_phase_retrieval, init_phase_retrieval,
    output_feedback, penalty, spectral_abscissa, InitMode,
};
use crate::history::{IterationRecord, RunHistory, TerminationReason};
use crate::hopp::{hopp_run, HoppConfig, QuadraticMapProblem};
use crate::linalg::{Matrix, SymMatrix};
use crate::problem::Order;
use crate::rhota::{arhota_run, rhota_run, AdaptiveConfig, CriticalityConfig, RhotaConfig};
use crate::subproblem::{solve_dual, DualSubproblem, SolverTolerances};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config error in `{path}`: {message}")]
    ConfigFile { path: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

/// Flat run configuration. Unknown keys are rejected so that typos surface
/// as errors naming the offending key.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algo: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(rename = "M0", skip_serializing_if = "Option::is_none")]
    pub m0: Option<f64>,
    #[serde(rename = "R0", skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "m_measurements", skip_serializing_if = "Option::is_none")]
    pub m_measurements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crit_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crit_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_tol: Option<f64>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Overlay non-empty fields of `other` (CLI flags) over `self` (file).
    pub fn merged_with(mut self, other: &RunConfig) -> Self {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field.clone(); })*
            };
        }
        take!(
            experiment, algo, p, m, m0, r0, seed, n, m_measurements, max_iters, f_tol, step_tol,
            crit_tol, crit_radius, init, init_ratio, mu, rho, rho_factor, rho_cap, system,
            system_file, fixture, out, timings, dual_tol
        );
        self
    }

    fn order(&self) -> Result<Order, CliError> {
        Order::from_p(self.p.unwrap_or(1)).map_err(|e| CliError::config(e.to_string()))
    }

    fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Outcome of one experiment run.
pub struct RunOutcome {
    pub history: RunHistory,
    pub exit_code: i32,
    /// Messages printed to stdout by the binary.
    pub report_lines: Vec<String>,
}

fn tolerances(cfg: &RunConfig) -> SolverTolerances<f64> {
    let mut t = SolverTolerances::default();
    if let Some(g) = cfg.dual_tol {
        t.grad_tol = g;
    }
    t
}

fn rhota_config(cfg: &RunConfig, default_m: f64) -> RhotaConfig<f64> {
    let mut rc = RhotaConfig::new(cfg.m.unwrap_or(default_m));
    rc.f_tol = cfg.f_tol;
    if let Some(st) = cfg.step_tol {
        rc.step_tol = Some(st);
    }
    if let Some(mi) = cfg.max_iters {
        rc.max_iters = mi;
    }
    if let Some(ct) = cfg.crit_tol {
        rc.crit_tol = Some(ct);
        rc.criticality = Some(CriticalityConfig::with_radius(cfg.crit_radius.unwrap_or(1.0)));
    } else if cfg.crit_radius.is_some() {
        rc.log_criticality = true;
        rc.criticality = Some(CriticalityConfig::with_radius(cfg.crit_radius.unwrap()));
    }
    rc.tolerances = tolerances(cfg);
    rc
}

fn gen_quadratic_system(n: usize, m: usize, seed: u64) -> (QuadraticMapProblem<f64>, Vec<f64>) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };
    let x_star: Vec<f64> = (0..n).map(|_| gauss()).collect();
    let mats: Vec<SymMatrix<f64>> = (0..m)
        .map(|_| SymMatrix::new(Matrix::from_fn(n, n, |_, _| gauss() / (n as f64).sqrt())))
        .collect();
    let targets: Vec<f64> = mats.iter().map(|q| q.quad_form(&x_star)).collect();
    (QuadraticMapProblem::new(mats, targets).expect("consistent"), x_star)
}

fn run_hopp_experiment(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let n = cfg.n.unwrap_or(16);
    let m = cfg.m_measurements.unwrap_or(2 * n);
    let seed = cfg.seed.unwrap_or(0);
    let order = cfg.order()?;
    let inst = gen_phase_retrieval::<f64>(n, m, seed);
    let prob = inst.to_problem();

    let init_mode = match cfg.init.as_deref() {
        None | Some("relative-error") => {
            InitMode::RelativeError { ratio: cfg.init_ratio.unwrap_or(0.1) }
        }
        Some("random") => InitMode::RandomGaussian,
        Some(other) => return Err(CliError::config(format!("unknown init mode `{other}`"))),
    };
    // protocol defaults: M = 0.1 near the solution, M = 0.01 for random starts
    let default_m = match init_mode {
        InitMode::RelativeError { .. } => 0.1,
        InitMode::RandomGaussian => 0.01,
    };
    let x0 = init_phase_retrieval(&inst, init_mode, seed.wrapping_add(1));

    let mut hopp_cfg = HoppConfig::new(cfg.m.unwrap_or(default_m), order);
    if let Some(ft) = cfg.f_tol {
        hopp_cfg.f_tol = ft;
    }
    if let Some(mi) = cfg.max_iters {
        hopp_cfg.max_iters = mi;
    }
    hopp_cfg.step_tol = cfg.step_tol;
    hopp_cfg.tolerances = tolerances(cfg);

    let run = hopp_run(&prob, &hopp_cfg, &x0, Some(&inst.ground_truth))
        .map_err(|e| CliError::Run(e.to_string()))?;

    let mut history = RunHistory::new();
    history.emit_times = cfg.timings.unwrap_or(false);
    for it in &run.iterates {
        history.push(IterationRecord {
            k: it.k,
            x: it.x.clone(),
            f: it.f,
            step_norm: it.step_norm,
            m_used: hopp_cfg.reg_m,
            model_value: None,
            model_gap: if it.k == 0 { None } else { Some(it.dual_gap) },
            crit_measure: None,
            recovery_error: it.recovery_error,
            time_ms: None,
        });
    }
    let termination = if run.terminated_by_f_tol {
        TerminationReason::FTol
    } else if run.iterates.len() > hopp_cfg.max_iters {
        TerminationReason::MaxIterations
    } else {
        TerminationReason::MaxIterations
    };
    history.finish(termination);
    let lines = vec![format!(
        "hopp p={} n={n} m={m} seed={seed}: f = {:.3e}, recovery = {:.3e} after {} iterations",
        order.p(),
        history.summary().final_f,
        history.summary().final_recovery_error.unwrap_or(f64::NAN),
        history.summary().iterations
    )];
    Ok(RunOutcome { exit_code: history.summary().termination.exit_code(), history, report_lines: lines })
}

fn run_phase_retrieval(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    match cfg.algo.as_deref() {
        None | Some("hopp") => run_hopp_experiment(cfg),
        Some("rhota") | Some("arhota") => run_nls_like(cfg, true),
        Some(other) => Err(CliError::config(format!("unknown algo `{other}`"))),
    }
}

/// Shared driver for `nls` and Taylor-driver phase retrieval: a quadratic-map
/// objective run through RHOTA / A-RHOTA with nondegeneracy diagnostics.
fn run_nls_like(cfg: &RunConfig, phase_retrieval: bool) -> Result<RunOutcome, CliError> {
    let n = cfg.n.unwrap_or(8);
    let seed = cfg.seed.unwrap_or(0);
    let order = cfg.order()?;
    let (prob_q, x_star, x0) = if phase_retrieval {
        let m = cfg.m_measurements.unwrap_or(2 * n);
        let inst = gen_phase_retrieval::<f64>(n, m, seed);
        let init_mode = match cfg.init.as_deref() {
            None | Some("relative-error") => {
                InitMode::RelativeError { ratio: cfg.init_ratio.unwrap_or(0.1) }
            }
            Some("random") => InitMode::RandomGaussian,
            Some(other) => return Err(CliError::config(format!("unknown init mode `{other}`"))),
        };
        let x0 = init_phase_retrieval(&inst, init_mode, seed.wrapping_add(1));
        (inst.to_problem(), inst.ground_truth.clone(), x0)
    } else {
        let m = cfg.m_measurements.unwrap_or(n / 2 + 1);
        let (prob_q, x_star) = gen_quadratic_system(n, m, seed);
        let x0: Vec<f64> = x_star.iter().map(|v| v + 0.5).collect();
        (prob_q, x_star, x0)
    };

    let lp = prob_q.jacobian_lipschitz();
    let lp_norm = crate::linalg::norm(&lp);
    let default_m = match order {
        Order::First => 2.0 * lp_norm + 1.0,
        Order::Second => 1.0,
    };
    let prob = prob_q.to_composite(order).map_err(|e| CliError::Run(e.to_string()))?;
    let rc = rhota_config(cfg, default_m);

    let outcome = match cfg.algo.as_deref() {
        Some("arhota") => {
            let ad = AdaptiveConfig::new(cfg.m0.unwrap_or(1.0), cfg.r0.unwrap_or(1.0));
            arhota_run(&prob, &rc, &ad, &x0)
        }
        _ => rhota_run(&prob, &rc, &x0),
    }
    .map_err(|e| CliError::Run(e.to_string()))?;

    let mut history = outcome.history;
    history.emit_times = cfg.timings.unwrap_or(false);
    if phase_retrieval {
        // recovery errors are derivable from the recorded iterates
        let gt = x_star.clone();
        let records: Vec<IterationRecord> = history
            .records()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.recovery_error = Some(apps::recovery_error(&r.x, &gt));
                r
            })
            .collect();
        let termination = history.summary().termination;
        let mut rebuilt = RunHistory::new();
        rebuilt.emit_times = history.emit_times;
        for r in records {
            rebuilt.push(r);
        }
        rebuilt.finish(termination);
        history = rebuilt;
    }

    // nondegeneracy diagnostic σ_min(∇F) at the final iterate, plus the
    // predicted finite-termination budget when the constants are declared
    let jac = prob.map().jacobian(&outcome.final_x);
    let sigma = penalty::sigma_min(&jac);
    let m_used = rc.reg_m;
    let mu = cfg.mu.unwrap_or(2.0 * (m_used + lp_norm));
    let summary = history.summary_mut();
    summary.diagnostics.insert("sigma_min_final".into(), sigma);
    if sigma > 0.0 && mu > m_used + lp_norm {
        let l_mu = (mu + lp_norm - m_used) / (mu - (m_used + lp_norm));
        let p = order.p() as f64;
        let p_fact = if order.p() == 1 { 1.0 } else { 2.0 };
        let fact = match order {
            Order::First => 2.0,
            Order::Second => 6.0,
        };
        let c_sigma = (m_used - lp_norm).max(f64::MIN_POSITIVE) / (fact * l_mu)
            * (p_fact * sigma / mu).powf((p + 1.0) / p);
        let f0 = history.records().first().map(|r| r.f).unwrap_or(0.0);
        history
            .summary_mut()
            .diagnostics
            .insert("predicted_finite_termination_budget".into(), (f0 / c_sigma).ceil());
    }

    let lines = vec![format!(
        "{} p={} n={n} seed={seed}: f = {:.3e} after {} iterations (sigma_min = {:.3e})",
        if phase_retrieval { "phase-retrieval" } else { "nls" },
        order.p(),
        history.summary().final_f,
        history.summary().iterations,
        sigma
    )];
    Ok(RunOutcome { exit_code: history.summary().termination.exit_code(), history, report_lines: lines })
}

fn run_output_feedback(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let systems = embedded_systems::<f64>();
    let (inst, default_m, name) = if let Some(path) = &cfg.system_file {
        let inst = output_feedback::parse_system_file::<f64>(Path::new(path))
            .map_err(|e| CliError::Run(e.to_string()))?;
        (inst, 0.5, path.clone())
    } else {
        let name = cfg.system.clone().unwrap_or_else(|| "chain2".to_string());
        let sys = systems
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| CliError::config(format!("unknown embedded system `{name}`")))?;
        (sys.instance.clone(), sys.reg_m, name)
    };

    let prob = build_ofc_problem(&inst).map_err(|e| CliError::Run(e.to_string()))?;
    let mut rc = rhota_config(cfg, default_m);
    // protocol default: stop at ‖F‖ ≤ 1e-3
    if cfg.f_tol.is_none() {
        rc.f_tol = Some(1e-3);
    }
    if cfg.max_iters.is_none() {
        rc.max_iters = 200;
    }
    let x0 = output_feedback::default_start(&inst);
    let outcome = rhota_run(&prob, &rc, &x0).map_err(|e| CliError::Run(e.to_string()))?;

    let (_, k_mat, _) = inst.unflatten(&outcome.final_x);
    let abscissa = spectral_abscissa(&inst.closed_loop(&k_mat))
        .map_err(|e| CliError::Run(e.to_string()))?;
    let mut history = outcome.history;
    history.emit_times = cfg.timings.unwrap_or(false);
    history.summary_mut().diagnostics.insert("spectral_abscissa".into(), abscissa);

    let lines = vec![format!(
        "output-feedback {name}: |F| = {:.3e}, spectral abscissa = {:.4} after {} iterations",
        history.summary().final_f,
        abscissa,
        history.summary().iterations
    )];
    Ok(RunOutcome { exit_code: history.summary().termination.exit_code(), history, report_lines: lines })
}

fn run_penalty(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let n = cfg.n.unwrap_or(6);
    let m = cfg.m_measurements.unwrap_or(2);
    let seed = cfg.seed.unwrap_or(0);
    let order = cfg.order()?;
    let mut qp = penalty::constructed_qp::<f64>(n, m, seed, false);
    if let Some(rho) = cfg.rho {
        qp.instance.rho0 = rho;
    }
    if let Some(factor) = cfg.rho_factor {
        qp.instance.schedule = penalty::RhoSchedule::Geometric {
            factor,
            cap: cfg.rho_cap.unwrap_or(1e6),
            margin: 0.05,
        };
    }
    let mut rc = rhota_config(cfg, 2.0);
    if cfg.step_tol.is_none() {
        rc.step_tol = Some(1e-11);
    }
    if cfg.max_iters.is_none() {
        rc.max_iters = 500;
    }
    if cfg.dual_tol.is_none() {
        // penalty optima sit at the norm kink; certify progress deep in
        rc.tolerances.grad_tol = 1e-12;
    }
    let x0 = vec![0.0; n];
    let (x, report, mut history) = penalty::penalty_solve(&qp.instance, &rc, order, &x0)
        .map_err(|e| CliError::Run(e.to_string()))?;
    history.emit_times = cfg.timings.unwrap_or(false);
    let s = history.summary_mut();
    s.diagnostics.insert("feasibility".into(), report.feasibility);
    s.diagnostics.insert("stationarity_residual".into(), report.stationarity_residual);
    s.diagnostics.insert("sigma_min".into(), report.sigma_min);
    s.diagnostics.insert("rho_final".into(), report.rho_final);
    s.diagnostics.insert("multiplier_norm".into(), crate::linalg::norm(&report.multiplier));
    let x_err = crate::linalg::norm(&crate::linalg::sub(&x, &qp.x_star));
    s.diagnostics.insert("x_error_vs_construction".into(), x_err);

    let lines = vec![format!(
        "penalty n={n} m={m} seed={seed}: feasibility = {:.3e}, stationarity = {:.3e}, rho = {}",
        report.feasibility, report.stationarity_residual, report.rho_final
    )];
    Ok(RunOutcome { exit_code: history.summary().termination.exit_code(), history, report_lines: lines })
}

fn run_subproblem(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let path = cfg
        .fixture
        .as_ref()
        .ok_or_else(|| CliError::config("`fixture` is required for the subproblem experiment"))?;
    let text = std::fs::read_to_string(path)?;
    let dsp: DualSubproblem<f64> = serde_json::from_str(&text)
        .map_err(|e| CliError::ConfigFile { path: path.clone(), message: e.to_string() })?;
    let tol = tolerances(cfg);
    let sol = solve_dual(&dsp, &tol).map_err(|e| CliError::Run(e.to_string()))?;

    let mut history = RunHistory::new();
    history.emit_times = cfg.timings.unwrap_or(false);
    history.push(IterationRecord {
        k: 0,
        x: sol.step.clone(),
        f: sol.theta,
        step_norm: crate::linalg::norm(&sol.step),
        m_used: dsp.reg.m(),
        model_value: Some(sol.theta),
        model_gap: Some(sol.gap),
        crit_measure: None,
        recovery_error: None,
        time_ms: None,
    });
    history.finish(if sol.converged() {
        TerminationReason::FTol
    } else {
        TerminationReason::MaxIterations
    });
    let s = history.summary_mut();
    s.diagnostics.insert("theta".into(), sol.theta);
    s.diagnostics.insert("beta".into(), sol.beta);
    s.diagnostics.insert("gap".into(), sol.gap);
    if let Some(w) = sol.w {
        s.diagnostics.insert("w".into(), w);
    }

    let lines = vec![
        format!("u = {:?}", sol.u),
        format!("w = {:?}", sol.w),
        format!("d = {:?}", sol.step),
        format!("theta = {} beta = {} gap = {:.3e}", sol.theta, sol.beta, sol.gap),
    ];
    Ok(RunOutcome { exit_code: history.summary().termination.exit_code(), history, report_lines: lines })
}

/// Run one experiment described by a full configuration.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let experiment = cfg.experiment.as_deref().unwrap_or("phase-retrieval");
    let mut outcome = match experiment {
        "phase-retrieval" => run_phase_retrieval(cfg)?,
        "nls" => run_nls_like(cfg, false)?,
        "output-feedback" => run_output_feedback(cfg)?,
        "penalty" => run_penalty(cfg)?,
        "subproblem" => run_subproblem(cfg)?,
        other => return Err(CliError::config(format!("unknown experiment `{other}`"))),
    };
    outcome.history.summary_mut().config_echo = Some(cfg.echo());
    if let Some(out) = &cfg.out {
        let (csv, json) = outcome.history.write(&PathBuf::from(out))?;
        outcome
            .report_lines
            .push(format!("wrote {} and {}", csv.display(), json.display()));
    }
    Ok(outcome)
}

/// Expand a `--seeds a..b` range into per-seed configs with suffixed outputs.
pub fn fan_out_seeds(cfg: &RunConfig, range: &str) -> Result<Vec<RunConfig>, CliError> {
    let (a, b) = range
        .split_once("..")
        .ok_or_else(|| CliError::config("`--seeds` expects a range `a..b`"))?;
    let a: u64 = a.trim().parse().map_err(|_| CliError::config("invalid seed range start"))?;
    let b: u64 = b.trim().parse().map_err(|_| CliError::config("invalid seed range end"))?;
    if b <= a {
        return Err(CliError::config("seed range must be nonempty"));
    }
    Ok((a..b)
        .map(|seed| {
            let mut c = cfg.clone();
            c.seed = Some(seed);
            if let Some(out) = &cfg.out {
                c.out = Some(format!("{out}-s{seed}"));
            }
            c
        })
        .collect())
}

/// Diagnostics map type re-exported for binary-side reporting.
pub type Diagnostics = BTreeMap<String, f64>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = serde_json::from_str::<RunConfig>(r#"{"experiment":"nls","bogus_key":1}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus_key"), "error names the key: {err}");
    }

    #[test]
    fn flags_override_file_values() {
        let file: RunConfig =
            serde_json::from_str(r#"{"experiment":"nls","n":8,"seed":1}"#).unwrap();
        let flags = RunConfig { seed: Some(9), ..Default::default() };
        let merged = file.merged_with(&flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.n, Some(8));
    }

    #[test]
    fn seed_fan_out() {
        let cfg = RunConfig { out: Some("runs/x".into()), ..Default::default() };
        let fanned = fan_out_seeds(&cfg, "3..6").unwrap();
        assert_eq!(fanned.len(), 3);
        assert_eq!(fanned[0].seed, Some(3));
        assert_eq!(fanned[2].out.as_deref(), Some("runs/x-s5"));
    }
}
