use taylorcomp::linalg::{Matrix, SymMatrix};
use taylorcomp::subproblem::{solve_p2_dual, DualSubproblem, Regularization, SolverTolerances};

fn main() {
    let mut state = 0x12345u64;
    let mut unit = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
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
        let dsp = DualSubproblem { c: c.clone(), jacobian: jac, hessians, b, h_lin,
            reg: Regularization::Cubic { m: m_reg }, anchor: vec![0.0; n] };
        let tol = SolverTolerances::default();
        let sol = solve_p2_dual(&dsp, &tol).unwrap();
        let gap_rel = sol.gap / (1.0 + sol.theta.abs());
        if trial == 1 || gap_rel > 1e-6 {
            println!("--- trial {trial} n={n} m={m} quad_h={quad_h} M={m_reg:.3}");
            println!("status {:?} iters {} theta {:.6} beta {:.6} gap_rel {:.3e} w {:?} |d| {:.4}",
                sol.status, sol.iterations, sol.theta, sol.beta, gap_rel, sol.w,
                sol.step.iter().map(|v|v*v).sum::<f64>().sqrt());
            for (i, t) in sol.trace.iter().enumerate() {
                if i < 8 || i + 3 > sol.trace.len() {
                    println!("  t[{i}] beta={:.6} theta_u={:.6} r={:.4} w={:?} idres={:.2e}",
                        t.beta, t.theta_u, t.step_norm, t.w, t.gap_identity_residual);
                }
            }
            if trial > 3 { break; }
        }
    }
}
