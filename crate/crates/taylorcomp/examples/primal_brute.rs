// multi-start subgradient descent on the primal model of trial 7
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
        if trial != 7 { continue; }
        let dsp = DualSubproblem { c, jacobian: jac, hessians, b, h_lin,
            reg: Regularization::Cubic { m: m_reg }, anchor: vec![0.0; n] };
        let sol = solve_p2_dual(&dsp, &SolverTolerances::default()).unwrap();
        println!("dual: beta={:.10} theta_at_step={:.10}", sol.beta, sol.theta);

        let theta = |d: &[f64]| dsp.model_value(d);
        // subgradient of theta
        let grad = |d: &[f64]| -> Vec<f64> {
            let t = dsp.residual_at(d);
            let tn: f64 = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            let n_ = d.len();
            let mut g = vec![0.0; n_];
            if tn > 1e-14 {
                let u: Vec<f64> = t.iter().map(|v| v / tn).collect();
                g = dsp.jacobian.t_matvec(&u);
                for (i, p) in dsp.hessians.iter().enumerate() {
                    let pv = p.matvec(d);
                    for j in 0..n_ { g[j] += u[i] * pv[j]; }
                }
            }
            for (j, gh) in dsp.h_lin.iter().enumerate() { g[j] += gh; }
            if let Some(bm) = &dsp.b {
                let bd = bm.matvec(d);
                for j in 0..n_ { g[j] += bd[j]; }
            }
            let dn: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if dn > 0.0 {
                for j in 0..n_ { g[j] += m_reg / 2.0 * dn * d[j]; }
            }
            g
        };

        let mut best = (f64::INFINITY, vec![0.0; n]);
        let mut starts: Vec<Vec<f64>> = vec![vec![0.0; n], sol.step.clone()];
        for _ in 0..60 {
            starts.push((0..n).map(|_| 2.0 * unit()).collect());
        }
        for s in starts {
            let mut d = s;
            let mut alpha = 0.1;
            let mut fcur = theta(&d);
            for _ in 0..4000 {
                let g = grad(&d);
                let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if gn < 1e-12 { break; }
                loop {
                    let cand: Vec<f64> = d.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
                    let fc = theta(&cand);
                    if fc < fcur {
                        d = cand;
                        fcur = fc;
                        alpha *= 1.2;
                        break;
                    }
                    alpha *= 0.5;
                    if alpha < 1e-16 { break; }
                }
                if alpha < 1e-16 { break; }
            }
            if fcur < best.0 { best = (fcur, d); }
        }
        println!("primal multistart: theta* ~= {:.10} at |d| = {:.6}", best.0,
            best.1.iter().map(|v| v*v).sum::<f64>().sqrt());
        println!("gap vs beta: {:.3e}", best.0 - sol.beta);
        break;
    }
}
