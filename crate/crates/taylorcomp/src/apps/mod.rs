//! Application problem families: phase retrieval, static output feedback
//! and equality-constrained optimization via exact penalty.

pub mod eig;
pub mod output_feedback;
pub mod penalty;
pub mod phase_retrieval;

pub use eig::{eigenvalues, spectral_abscissa};
pub use output_feedback::{build_ofc_problem, embedded_systems, OutputFeedbackInstance};
pub use penalty::{penalty_solve, KktReport, PenaltyInstance, RhoSchedule};
pub use phase_retrieval::{gen_phase_retrieval, init_phase_retrieval, InitMode, PhaseRetrievalInstance};

use crate::linalg;
use crate::scalar::Scalar;

/// Sign-invariant recovery distance `min(‖x − x*‖, ‖x + x*‖)`: quadratic
/// measurements cannot distinguish x from −x.
pub fn recovery_error<T: Scalar>(x: &[T], x_star: &[T]) -> T {
    assert_eq!(x.len(), x_star.len(), "recovery_error dimension mismatch");
    let plus = linalg::norm(&linalg::sub(x, x_star));
    let minus = linalg::norm(&linalg::add(x, x_star));
    plus.min(minus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovery_error_sign_invariance() {
        let x = vec![1.0, -2.0, 0.5];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(recovery_error(&x, &x), 0.0);
        assert_eq!(recovery_error(&neg, &x), 0.0);
        assert_eq!(recovery_error(&x, &neg), recovery_error(&neg, &x));

        // orthogonal unit vectors are √2 apart either way
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        assert!((recovery_error(&e1, &e2) - 2.0f64.sqrt()).abs() < 1e-15);
    }
}
