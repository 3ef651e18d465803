// scratch: acceptance-1-style stress for the p2 dual
use taylorcomp::linalg::{Matrix, SymMatrix};
use taylorcomp::subproblem::{solve_p2_dual, DualSubproblem, Regularization, SolverTolerances};

fn main() {
    let mut state = 0x12345u64;
    let mut unit = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let t0 = std::time::Instant::now();
    let mut worst_gap = 0.0f64;
    let mut worst_id = 0.0f64;
    let mut worst_walign = 0.0f64;
    let mut cap_hits = 0;
    for trial in 0..200 {
        let n = 2 + (trial % 9);
        let m = 1 + (trial % 5);
        let quad_h = trial % 3 == 0;
        let c: Vec<f64> = (0..m).map(|_| 2.0 * unit()).collect();
        let jac = Matrix::from_fn(m, n, |_, _| unit());
        let hessians: Vec<SymMatrix<f64>> =
            (0..m).map(|_| SymMatrix::new(Matrix::from_fn(n, n, |_, _| unit()))).collect();
        let (b, h_lin) = if quad_h {
            let raw = Matrix::from_fn(n, n, |_, _| 0.5 * unit());
            let mut bb = raw.transpose().matmul(&raw);
            bb.add_diag_assign(0.1);
            (Some(SymMatrix::new(bb)), (0..n).map(|_| 0.3 * unit()).collect())
        } else {
            (None, vec![0.0; n])
        };
        let m_reg = 0.5 + 3.0 * (0.5 + 0.5 * unit());
        let dsp = DualSubproblem { c, jacobian: jac, hessians, b, h_lin,
            reg: Regularization::Cubic { m: m_reg }, anchor: vec![0.0; n] };
        let tol = SolverTolerances::default();
        let sol = solve_p2_dual(&dsp, &tol).unwrap();
        let gap_rel = sol.gap / (1.0 + sol.theta.abs());
        if gap_rel > worst_gap { worst_gap = gap_rel; }
        for tr in &sol.trace {
            if tr.gap_identity_residual.abs() > worst_id {
                worst_id = tr.gap_identity_residual.abs();
                if worst_id > 1e-8 {
                    println!("trial {trial}: identity {:.3e} (r={:.4}, w={:?}, beta={:.6}, theta_u={:.6})",
                        tr.gap_identity_residual, tr.step_norm, tr.w, tr.beta, tr.theta_u);
                }
            }
        }
        if let Some(w) = sol.w {
            let wa = (w / m_reg - sol.step.iter().map(|v| v*v).sum::<f64>().sqrt()).abs();
            if wa > worst_walign { worst_walign = wa; }
        }
        if !sol.converged() { cap_hits += 1; }
    }
    println!("200 instances in {:.2}s: worst rel gap {:.3e}, worst 5.2-identity {:.3e}, worst |w/M-||d||| {:.3e}, cap hits {}",
        t0.elapsed().as_secs_f64(), worst_gap, worst_id, worst_walign, cap_hits);
}
