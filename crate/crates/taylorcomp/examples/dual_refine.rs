// hypothesis test: does local refinement of u shrink the primal gap?
use taylorcomp::linalg::{cholesky_spd, Matrix, SymMatrix};
use taylorcomp::subproblem::{solve_p2_dual, solve_w_fixed_point, DualSubproblem, Regularization, SolverTolerances};

fn beta_at(dsp: &DualSubproblem<f64>, u: &[f64], w: f64, m_reg: f64) -> Option<f64> {
    let g = dsp.gradient(u);
    let mut h = dsp.curvature(u);
    h.add_diag_assign(w * 0.5);
    let chol = cholesky_spd(&h).ok()?;
    let dp: Vec<f64> = chol.solve(&g).unwrap().iter().map(|v| -v).collect();
    Some(u.iter().zip(&dsp.c).map(|(a, b)| a * b).sum::<f64>()
        + 0.5 * g.iter().zip(&dp).map(|(a, b)| a * b).sum::<f64>()
        - w * w * w / (12.0 * m_reg * m_reg))
}

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
        if trial != 7 { continue; }
        let dsp = DualSubproblem { c, jacobian: jac, hessians, b, h_lin,
            reg: Regularization::Cubic { m: m_reg }, anchor: vec![0.0; n] };
        let tol = SolverTolerances::default();
        let sol = solve_p2_dual(&dsp, &tol).unwrap();
        println!("solver: beta={:.12} theta={:.12} gap={:.3e}", sol.beta, sol.theta, sol.gap);

        // compass search on u from the solver's answer, w solved exactly
        let mut u = sol.u.clone();
        let mut best = sol.beta;
        let mut radius = 1e-3f64;
        let mut evals = 0;
        while radius > 1e-15 {
            let mut improved = false;
            'dirs: for i in 0..u.len() {
                for s in [1.0, -1.0] {
                    let mut cand = u.clone();
                    cand[i] += s * radius;
                    let nn: f64 = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if nn > 1.0 { for v in cand.iter_mut() { *v /= nn; } }
                    // w via exact elimination, beta from plain part
                    if let Ok((w, _)) = solve_w_fixed_point(&dsp, &cand, &tol) {
                        evals += 1;
                        if let Some(beta) = beta_at(&dsp, &cand, w, m_reg) {
                            if beta > best {
                                best = beta;
                                u = cand;
                                improved = true;
                                break 'dirs;
                            }
                        }
                    }
                }
            }
            if !improved { radius *= 0.5; }
        }
        let (w, d) = solve_w_fixed_point(&dsp, &u, &tol).unwrap();
        let theta = dsp.model_value(&d);
        println!("compass: beta={:.12} theta={:.12} gap={:.3e} (evals {evals}, w={w:.6})",
            best, theta, theta - best);
        break;
    }
}
