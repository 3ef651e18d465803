//! `taylorcomp` — experiment runner for the composite-optimization library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use taylorcomp::cli::{self, RunConfig};

/// Composite optimization experiments: regularized higher-order Taylor
/// methods, higher-order proximal point, and their applications.
#[derive(Debug, Parser)]
#[command(name = "taylorcomp", version, about)]
struct Args {
    /// Experiment kind: phase-retrieval | output-feedback | nls | penalty | subproblem
    #[arg(long)]
    experiment: Option<String>,
    /// Algorithm: rhota | arhota | hopp
    #[arg(long)]
    algo: Option<String>,
    /// Taylor order p (1 or 2)
    #[arg(long)]
    p: Option<u32>,
    /// Fixed regularization parameter M
    #[arg(long = "M")]
    m: Option<f64>,
    /// Adaptive line-search initial M_0
    #[arg(long = "M0")]
    m0: Option<f64>,
    /// Adaptive line-search decrease parameter R_0
    #[arg(long = "R0")]
    r0: Option<f64>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Run a seed range `a..b` (end exclusive), each seed on its own thread
    #[arg(long)]
    seeds: Option<String>,
    /// Problem dimension n
    #[arg(long)]
    n: Option<usize>,
    /// Measurement / constraint count m
    #[arg(long)]
    m_measurements: Option<usize>,
    /// Outer iteration cap
    #[arg(long)]
    max_iters: Option<usize>,
    /// Stop when f ≤ this value
    #[arg(long)]
    f_tol: Option<f64>,
    /// Stop when the step norm ≤ this value
    #[arg(long)]
    step_tol: Option<f64>,
    /// Stop when the criticality measure ≤ this value
    #[arg(long)]
    crit_tol: Option<f64>,
    /// Radius of the criticality measure
    #[arg(long)]
    crit_radius: Option<f64>,
    /// Initialization mode: relative-error | random
    #[arg(long)]
    init: Option<String>,
    /// Relative-error initialization ratio (fraction of ‖x*‖)
    #[arg(long)]
    init_ratio: Option<f64>,
    /// Proximal probe parameter μ
    #[arg(long)]
    mu: Option<f64>,
    /// Penalty parameter ρ
    #[arg(long)]
    rho: Option<f64>,
    /// Geometric penalty schedule factor
    #[arg(long)]
    rho_factor: Option<f64>,
    /// Geometric penalty schedule cap
    #[arg(long)]
    rho_cap: Option<f64>,
    /// Embedded output-feedback system name
    #[arg(long)]
    system: Option<String>,
    /// Output-feedback system file (labeled A/B/C text format)
    #[arg(long)]
    system_file: Option<String>,
    /// Serialized dual-subproblem fixture (JSON) for `--experiment subproblem`
    #[arg(long)]
    fixture: Option<String>,
    /// Output path prefix; writes `<out>.csv` and `<out>.json`
    #[arg(long)]
    out: Option<String>,
    /// Emit per-iteration wall-clock columns (defeats CSV byte determinism)
    #[arg(long)]
    timings: bool,
    /// Dual solver gradient tolerance
    #[arg(long)]
    dual_tol: Option<f64>,
    /// JSON config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Args {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            experiment: self.experiment.clone(),
            algo: self.algo.clone(),
            p: self.p,
            m: self.m,
            m0: self.m0,
            r0: self.r0,
            seed: self.seed,
            n: self.n,
            m_measurements: self.m_measurements,
            max_iters: self.max_iters,
            f_tol: self.f_tol,
            step_tol: self.step_tol,
            crit_tol: self.crit_tol,
            crit_radius: self.crit_radius,
            init: self.init.clone(),
            init_ratio: self.init_ratio,
            mu: self.mu,
            rho: self.rho,
            rho_factor: self.rho_factor,
            rho_cap: self.rho_cap,
            system: self.system.clone(),
            system_file: self.system_file.clone(),
            fixture: self.fixture.clone(),
            out: self.out.clone(),
            timings: if self.timings { Some(true) } else { None },
            dual_tol: self.dual_tol,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TAYLORCOMP_LOG")).init();
    let args = Args::parse();

    let flags = args.to_config();
    let cfg = match &args.config {
        Some(path) => match RunConfig::from_file(path) {
            Ok(file_cfg) => file_cfg.merged_with(&flags),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => flags,
    };

    let run_one = |cfg: &RunConfig| -> i32 {
        match cli::run(cfg) {
            Ok(outcome) => {
                for line in &outcome.report_lines {
                    println!("{line}");
                }
                outcome.exit_code
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        }
    };

    let code = match &args.seeds {
        Some(range) => match cli::fan_out_seeds(&cfg, range) {
            Ok(configs) => std::thread::scope(|scope| {
                let handles: Vec<_> =
                    configs.iter().map(|c| scope.spawn(move || run_one(c))).collect();
                handles.into_iter().map(|h| h.join().unwrap_or(1)).max().unwrap_or(0)
            }),
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        None => run_one(&cfg),
    };
    ExitCode::from(code as u8)
}
