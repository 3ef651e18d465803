use taylorcomp::apps::{gen_phase_retrieval, init_phase_retrieval, InitMode};
use taylorcomp::hopp::{hopp_step, HoppConfig};
use taylorcomp::problem::Order;
use taylorcomp::subproblem::Regularization;

fn main() {
    let n = 16;
    let inst = gen_phase_retrieval::<f64>(n, 2 * n, 0);
    let x0 = init_phase_retrieval(&inst, InitMode::RelativeError { ratio: 0.1 }, 1);
    let prob = inst.to_problem();
    let mut cfg = HoppConfig::new(0.1, Order::Second);
    cfg.tolerances.grad_tol = 1e-10;
    let f0 = prob.eval_f(&x0);
    let (x1, sol) = hopp_step(&prob, &x0, &cfg).unwrap();
    let f1 = prob.eval_f(&x1);
    let step: f64 = sol.step.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("f0={f0:.6e} f1={f1:.6e} step={step:.4e} status={:?} iters={} gap={:.3e} theta={:.6e} beta={:.6e} w={:?}",
        sol.status, sol.iterations, sol.gap, sol.theta, sol.beta, sol.w);
    println!("decrease lhs = {}", f1 + 0.1/3.0*step.powi(3));
    // what does the model say the subproblem value is vs f0?
    let dsp = prob.prox_subproblem(&x0, Regularization::Cubic { m: 0.2 });
    println!("model_value(0) = {:.6e} model_value(d) = {:.6e}", dsp.model_value(&vec![0.0; n]), dsp.model_value(&sol.step));
    let tr_last = sol.trace.last().unwrap();
    println!("last trace: beta={:.6e} theta_u={:.6e} w={:?} r={:.4e} idres={:.2e}",
        tr_last.beta, tr_last.theta_u, tr_last.w, tr_last.step_norm, tr_last.gap_identity_residual);
}
