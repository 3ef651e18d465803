// scratch: explore HOPP convergence across n, M, p for protocol tuning
use taylorcomp::apps::{gen_phase_retrieval, init_phase_retrieval, InitMode};
use taylorcomp::hopp::{hopp_run, HoppConfig};
use taylorcomp::problem::Order;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let m_reg: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let p: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let random_init = args.get(4).map(|s| s == "random").unwrap_or(false);
    let seeds: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(3);

    let order = Order::from_p(p).unwrap();
    for seed in 0..seeds {
        let inst = gen_phase_retrieval::<f64>(n, 2 * n, seed);
        let mode = if random_init { InitMode::RandomGaussian } else { InitMode::RelativeError { ratio: 0.1 } };
        let x0 = init_phase_retrieval(&inst, mode, seed + 1);
        let prob = inst.to_problem();
        let mut cfg = HoppConfig::new(m_reg, order);
        cfg.f_tol = 1e-30;
        cfg.max_iters = if random_init { 100 } else { 40 };
        cfg.tolerances.grad_tol = 1e-10;
        let t0 = std::time::Instant::now();
        let run = hopp_run(&prob, &cfg, &x0, Some(&inst.ground_truth)).unwrap();
        let errs: Vec<f64> = run.iterates.iter().map(|it| it.recovery_error.unwrap()).collect();
        let small: Vec<String> = errs.iter().map(|e| format!("{:.1e}", e)).collect();
        println!("n={n} p={p} M={m_reg} seed={seed} iters={} time={:.2}s errs={}",
            errs.len()-1, t0.elapsed().as_secs_f64(), small.join(" "));
    }
}
