// brute-force the dual of one failing instance over the u-ball (m=3)
use taylorcomp::linalg::{Matrix, SymMatrix};
use taylorcomp::subproblem::{solve_p2_dual, solve_w_fixed_point, DualSubproblem, Regularization, SolverTolerances};

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
        let dsp = DualSubproblem { c: c.clone(), jacobian: jac, hessians, b, h_lin,
            reg: Regularization::Cubic { m: m_reg }, anchor: vec![0.0; n] };
        let tol = SolverTolerances::default();
        let sol = solve_p2_dual(&dsp, &tol).unwrap();
        println!("solver: beta={:.8} theta={:.8} gap={:.3e} status={:?}", sol.beta, sol.theta, sol.gap, sol.status);

        // grid over the u ball (m = 3) with exact inner w solve
        let step = 0.02f64;
        let mut best = (f64::NEG_INFINITY, vec![0.0; 3]);
        let mut u0 = -1.0;
        while u0 <= 1.0 {
            let mut u1 = -1.0;
            while u1 <= 1.0 {
                let mut u2 = -1.0;
                while u2 <= 1.0 {
                    if u0*u0 + u1*u1 + u2*u2 <= 1.0 {
                        let u = vec![u0, u1, u2];
                        if let Ok((w, d)) = solve_w_fixed_point(&dsp, &u, &tol) {
                            // beta from the plain part: recompute directly
                            let g = dsp.gradient(&u);
                            // d includes completion; beta needs plain; approximate:
                            // beta = <u,c> + 0.5<G,d_plain>: recompute d_plain via w
                            let mut h = dsp.curvature(&u);
                            h.add_diag_assign(w * 0.5);
                            if let Ok(chol) = taylorcomp::linalg::cholesky_spd(&h) {
                                let dp = chol.solve(&g).unwrap();
                                let dp: Vec<f64> = dp.iter().map(|v| -v).collect();
                                let beta = u.iter().zip(&dsp.c).map(|(a,b)| a*b).sum::<f64>()
                                    + 0.5 * g.iter().zip(&dp).map(|(a,b)| a*b).sum::<f64>()
                                    - w*w*w/(12.0*m_reg*m_reg);
                                if beta > best.0 { best = (beta, u.clone()); }
                            }
                            let _ = d;
                        }
                    }
                    u2 += step;
                }
                u1 += step;
            }
            u0 += step;
        }
        println!("grid:   beta={:.8} at u={:?}", best.0, best.1);
        // theta at the grid-best u's step
        let (w, d) = solve_w_fixed_point(&dsp, &best.1, &tol).unwrap();
        println!("grid step: w={w:.6} |d|={:.6} theta(d)={:.8}", 
            d.iter().map(|v|v*v).sum::<f64>().sqrt(), dsp.model_value(&d));
        break;
    }
}
