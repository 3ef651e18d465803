//! Phase-retrieval instances: recover `x*` from quadratic measurements
//! `z_i = (a_iᵀ x*)²` with standard Gaussian measurement vectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hopp::QuadraticMapProblem;
use crate::linalg::{self, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// A generated instance: measurement vectors, ground truth and targets.
#[derive(Debug, Clone)]
pub struct PhaseRetrievalInstance<T> {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub vectors: Vec<Vec<T>>,
    pub ground_truth: Vec<T>,
    pub targets: Vec<T>,
}

impl<T: Scalar> PhaseRetrievalInstance<T> {
    /// `L = ‖(‖a_1‖², …, ‖a_m‖²)‖` from the initialization protocol.
    pub fn measurement_scale(&self) -> T {
        let sq: Vec<T> = self.vectors.iter().map(|a| linalg::dot(a, a)).collect();
        linalg::norm(&sq)
    }

    /// Build the quadratic-map problem with `Q_i = a_i a_iᵀ`.
    pub fn to_problem(&self) -> QuadraticMapProblem<T> {
        let matrices: Vec<SymMatrix<T>> = self
            .vectors
            .iter()
            .map(|a| {
                SymMatrix::new(Matrix::from_fn(self.n, self.n, |i, j| a[i] * a[j]))
            })
            .collect();
        QuadraticMapProblem::new(matrices, self.targets.clone())
            .expect("generated instance is consistent")
    }
}

fn gaussian_vec<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> Vec<T> {
    (0..n).map(|_| T::of(StandardNormal.sample(rng))).collect()
}

/// Generate an instance with `m` standard Gaussian measurement vectors
/// (default protocol: m = 2n) and a Gaussian ground truth. Deterministic for
/// a fixed seed.
pub fn gen_phase_retrieval<T: Scalar>(n: usize, m: usize, seed: u64) -> PhaseRetrievalInstance<T> {
    assert!(n >= 1 && m >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ground_truth = gaussian_vec::<T>(&mut rng, n);
    let vectors: Vec<Vec<T>> = (0..m).map(|_| gaussian_vec::<T>(&mut rng, n)).collect();
    let targets: Vec<T> = vectors
        .iter()
        .map(|a| {
            let ip = linalg::dot(a, &ground_truth);
            ip * ip
        })
        .collect();
    PhaseRetrievalInstance { n, m, seed, vectors, ground_truth, targets }
}

/// Initialization mode for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode<T> {
    /// `x0 = x* + noise` with `‖noise‖ = ratio·‖x*‖` exactly.
    RelativeError { ratio: T },
    /// Seeded standard Gaussian start, independent of the ground truth.
    RandomGaussian,
}

pub fn init_phase_retrieval<T: Scalar>(
    inst: &PhaseRetrievalInstance<T>,
    mode: InitMode<T>,
    seed: u64,
) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    match mode {
        InitMode::RelativeError { ratio } => {
            assert!(ratio > T::zero() && ratio <= T::one(), "ratio must lie in (0, 1]");
            let radius = ratio * linalg::norm(&inst.ground_truth);
            let dir = gaussian_vec::<T>(&mut rng, inst.n);
            let dir = linalg::normalize_or_zero(&dir, T::of(1e-30));
            linalg::add(&inst.ground_truth, &linalg::scale(&dir, radius))
        }
        InitMode::RandomGaussian => gaussian_vec::<T>(&mut rng, inst.n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_signs_and_rank_one() {
        let inst = gen_phase_retrieval::<f64>(4, 8, 7);
        assert_eq!(inst.vectors.len(), 8);
        assert!(inst.targets.iter().all(|z| *z >= 0.0));
        let prob = inst.to_problem();
        assert_eq!(prob.measurements(), 8);
        assert_eq!(prob.dim(), 4);
        // Q_i = a_i a_iᵀ has rank 1: its spectral norm equals its trace
        for (q, a) in prob.data().matrices.iter().zip(&inst.vectors) {
            let trace: f64 = (0..4).map(|i| q.as_matrix()[(i, i)]).sum();
            assert!((trace - linalg::dot(a, a)).abs() < 1e-12);
            assert!((q.spectral_norm().unwrap() - trace).abs() < 1e-9 * (1.0 + trace));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = gen_phase_retrieval::<f64>(6, 12, 42);
        let b = gen_phase_retrieval::<f64>(6, 12, 42);
        assert_eq!(a.ground_truth, b.ground_truth);
        assert_eq!(a.vectors, b.vectors);
        assert_eq!(a.targets, b.targets);
        let c = gen_phase_retrieval::<f64>(6, 12, 43);
        assert_ne!(a.targets, c.targets);
    }

    #[test]
    fn residual_vanishes_at_ground_truth() {
        let inst = gen_phase_retrieval::<f64>(5, 10, 3);
        let prob = inst.to_problem();
        let z_norm = linalg::norm(&inst.targets);
        assert!(prob.eval_f(&inst.ground_truth) <= 1e-12 * z_norm);
    }

    #[test]
    fn relative_error_init_has_exact_radius() {
        let inst = gen_phase_retrieval::<f64>(8, 16, 11);
        let x0 = init_phase_retrieval(&inst, InitMode::RelativeError { ratio: 0.25 }, 5);
        let radius = 0.25 * linalg::norm(&inst.ground_truth);
        let err = linalg::norm(&linalg::sub(&x0, &inst.ground_truth));
        assert!((err - radius).abs() <= 1e-12 * (1.0 + radius));

        // ratio → 0 limit recovers x* itself
        let x_tiny = init_phase_retrieval(&inst, InitMode::RelativeError { ratio: 1e-12 }, 5);
        assert!(linalg::norm(&linalg::sub(&x_tiny, &inst.ground_truth)) <= 1e-10);
    }

    #[test]
    fn random_init_reproducible() {
        let inst = gen_phase_retrieval::<f64>(8, 16, 11);
        let a = init_phase_retrieval(&inst, InitMode::<f64>::RandomGaussian, 5);
        let b = init_phase_retrieval(&inst, InitMode::<f64>::RandomGaussian, 5);
        assert_eq!(a, b);
    }

    #[test]
    fn target_mean_matches_chi_square_scaling() {
        // z_i = (a_iᵀx*)² with a_i ~ N(0, I): E[z_i] = ‖x*‖². Sanity at 10%
        // with several hundred samples.
        let mut total = 0.0;
        let mut count = 0usize;
        let mut scale = 0.0;
        for seed in 0..10u64 {
            let inst = gen_phase_retrieval::<f64>(6, 40, 1000 + seed);
            let x2 = linalg::dot(&inst.ground_truth, &inst.ground_truth);
            total += inst.targets.iter().map(|z| z / x2).sum::<f64>();
            count += inst.targets.len();
            scale += 1.0;
        }
        let _ = scale;
        let mean = total / count as f64;
        assert!((mean - 1.0).abs() <= 0.1, "normalized target mean {mean}");
    }
}
