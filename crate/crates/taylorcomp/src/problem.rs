//! Composite problem abstraction: a smooth map `F`, a scaled Euclidean outer
//! norm `g(v) = ρ‖v‖`, an inner term `h` (zero, convex quadratic, or the
//! indicator of a closed convex cone-like set), and the order-p regularized
//! Taylor model built from them.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{self, Matrix, SymMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("order {0} requires per-component Hessians, none available")]
    MissingHessians(u32),
    #[error("quadratic inner term must be positive semidefinite")]
    InnerTermNotPsd,
    #[error("unsupported Taylor order {0}; only 1 and 2 are available")]
    UnsupportedOrder(u32),
}

/// Order of the Taylor approximation of the smooth map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn p(self) -> u32 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }

    pub fn from_p(p: u32) -> Result<Self, ProblemError> {
        match p {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            other => Err(ProblemError::UnsupportedOrder(other)),
        }
    }

    /// (p+1)!
    pub fn reg_factorial<T: Scalar>(self) -> T {
        match self {
            Order::First => T::of(2.0),
            Order::Second => T::of(6.0),
        }
    }
}

/// A p-times differentiable map `F : ℝⁿ → ℝᵐ` exposed through evaluators.
///
/// `hessians` is required only when the map is used with order 2; maps with
/// known per-component Lipschitz constants of the p-th derivative may declare
/// them so that test-time residual bounds can be asserted.
pub trait SmoothMap<T: Scalar>: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn value(&self, x: &[T]) -> Vec<T>;
    fn jacobian(&self, x: &[T]) -> Matrix<T>;

    fn hessians(&self, _x: &[T]) -> Option<Vec<SymMatrix<T>>> {
        None
    }

    /// Per-component Lipschitz constants of the p-th derivative, when known.
    fn lipschitz_p(&self, _p: u32) -> Option<Vec<T>> {
        None
    }

    /// Quadratic-map view `F_i(x) = xᵀQ_i x − z_i`, when this map has one.
    /// The stationarity probe needs it to solve its proximal subproblem
    /// globally.
    fn as_quadratic(&self) -> Option<&crate::hopp::QuadraticMapData<T>> {
        None
    }
}

/// Outer function `g(v) = ρ‖v‖` with Lipschitz constant `L_g = ρ`.
#[derive(Debug, Clone, Copy)]
pub struct OuterFunction<T> {
    rho: T,
}

impl<T: Scalar> OuterFunction<T> {
    pub fn norm() -> Self {
        Self { rho: T::one() }
    }

    pub fn scaled_norm(rho: T) -> Self {
        assert!(rho > T::zero(), "scale must be positive");
        Self { rho }
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn lipschitz(&self) -> T {
        self.rho
    }

    pub fn eval(&self, v: &[T]) -> T {
        self.rho * linalg::norm(v)
    }
}

/// Closed convex set used by indicator inner terms. Implementations provide
/// an exact Euclidean projection; membership defaults to a projection-residual
/// test.
pub trait ConvexSet<T: Scalar>: Send + Sync {
    fn project(&self, x: &[T]) -> Vec<T>;

    fn contains(&self, x: &[T], tol: T) -> bool {
        let p = self.project(x);
        linalg::norm(&linalg::sub(&p, x)) <= tol * (T::one() + linalg::norm(x))
    }
}

/// Inner term `h`.
#[derive(Clone)]
pub enum InnerTerm<T: Scalar> {
    /// h = 0
    Zero,
    /// h(x) = ½ xᵀBx + aᵀx with B positive semidefinite.
    Quadratic { b: SymMatrix<T>, a: Vec<T> },
    /// h = indicator of a closed convex set with a projection oracle.
    Indicator(Arc<dyn ConvexSet<T>>),
}

impl<T: Scalar> std::fmt::Debug for InnerTerm<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InnerTerm::Zero => write!(f, "Zero"),
            InnerTerm::Quadratic { b, .. } => write!(f, "Quadratic(dim {})", b.dim()),
            InnerTerm::Indicator(_) => write!(f, "Indicator"),
        }
    }
}

impl<T: Scalar> InnerTerm<T> {
    /// PSD is checked by Cholesky of B + 1e-10·I at construction.
    pub fn quadratic(b: SymMatrix<T>, a: Vec<T>) -> Result<Self, ProblemError> {
        if b.dim() != a.len() {
            return Err(ProblemError::DimensionMismatch(format!(
                "quadratic term: B is {}x{} but a has length {}",
                b.dim(),
                b.dim(),
                a.len()
            )));
        }
        let mut shifted = b.clone();
        shifted.add_diag_assign(T::of(1e-10) * (T::one() + b.frob_norm()));
        if linalg::cholesky_spd(&shifted).is_err() {
            return Err(ProblemError::InnerTermNotPsd);
        }
        Ok(InnerTerm::Quadratic { b, a })
    }

    /// h(x), possibly +∞ for indicator terms.
    pub fn eval(&self, x: &[T], membership_tol: T) -> T {
        match self {
            InnerTerm::Zero => T::zero(),
            InnerTerm::Quadratic { b, a } => T::of(0.5) * b.quad_form(x) + linalg::dot(a, x),
            InnerTerm::Indicator(set) => {
                if set.contains(x, membership_tol) {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, InnerTerm::Indicator(_))
    }
}

/// The composite problem `min g(F(x)) + h(x)` with a chosen Taylor order.
#[derive(Clone)]
pub struct CompositeProblem<T: Scalar> {
    map: Arc<dyn SmoothMap<T>>,
    outer: OuterFunction<T>,
    inner: InnerTerm<T>,
    order: Order,
    membership_tol: T,
}

impl<T: Scalar> CompositeProblem<T> {
    pub fn new(
        map: Arc<dyn SmoothMap<T>>,
        outer: OuterFunction<T>,
        inner: InnerTerm<T>,
        order: Order,
    ) -> Result<Self, ProblemError> {
        if let InnerTerm::Quadratic { b, .. } = &inner {
            if b.dim() != map.input_dim() {
                return Err(ProblemError::DimensionMismatch(format!(
                    "inner quadratic dimension {} vs map input {}",
                    b.dim(),
                    map.input_dim()
                )));
            }
        }
        if order == Order::Second {
            let probe = vec![T::zero(); map.input_dim()];
            if map.hessians(&probe).is_none() {
                return Err(ProblemError::MissingHessians(2));
            }
        }
        Ok(Self { map, outer, inner, order, membership_tol: T::of(1e-8) })
    }

    pub fn map(&self) -> &Arc<dyn SmoothMap<T>> {
        &self.map
    }

    pub fn outer(&self) -> &OuterFunction<T> {
        &self.outer
    }

    pub fn inner(&self) -> &InnerTerm<T> {
        &self.inner
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn residual_dim(&self) -> usize {
        self.map.output_dim()
    }

    /// `L_g · ‖L_p‖` when the map declares its Lipschitz constants.
    pub fn composite_lipschitz(&self) -> Option<T> {
        let lp = self.map.lipschitz_p(self.order.p())?;
        Ok::<(), ()>(()).ok()?;
        Some(self.outer.lipschitz() * linalg::norm(&lp))
    }

    /// f(x) = ρ‖F(x)‖ + h(x); +∞ when an indicator inner term rejects x.
    pub fn eval_f(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.dim(), "eval_f dimension mismatch");
        let h = self.inner.eval(x, self.membership_tol);
        if h == T::infinity() {
            return T::infinity();
        }
        self.outer.eval(&self.map.value(x)) + h
    }

    /// Snapshot the Taylor data of the map at `anchor` with regularization M.
    pub fn taylor_model(&self, anchor: &[T], reg_m: T) -> Result<TaylorModel<T>, ProblemError> {
        TaylorModel::new(self, anchor, reg_m)
    }
}

/// Order-p Taylor model data at an anchor point, with regularization
/// parameter `M > 0`. Immutable snapshot: the model caches `F(x̄)`, `∇F(x̄)`
/// and, for order 2, the per-component Hessians.
#[derive(Debug, Clone)]
pub struct TaylorModel<T: Scalar> {
    anchor: Vec<T>,
    value: Vec<T>,
    jacobian: Matrix<T>,
    hessians: Option<Vec<SymMatrix<T>>>,
    order: Order,
    reg_m: T,
}

impl<T: Scalar> TaylorModel<T> {
    fn new(prob: &CompositeProblem<T>, anchor: &[T], reg_m: T) -> Result<Self, ProblemError> {
        assert!(reg_m > T::zero(), "regularization parameter must be positive");
        if anchor.len() != prob.dim() {
            return Err(ProblemError::DimensionMismatch(format!(
                "anchor has length {}, problem dimension is {}",
                anchor.len(),
                prob.dim()
            )));
        }
        let hessians = match prob.order() {
            Order::First => None,
            Order::Second => {
                Some(prob.map().hessians(anchor).ok_or(ProblemError::MissingHessians(2))?)
            }
        };
        Ok(Self {
            anchor: anchor.to_vec(),
            value: prob.map().value(anchor),
            jacobian: prob.map().jacobian(anchor),
            hessians,
            order: prob.order(),
            reg_m,
        })
    }

    pub fn anchor(&self) -> &[T] {
        &self.anchor
    }

    pub fn anchor_value(&self) -> &[T] {
        &self.value
    }

    pub fn jacobian(&self) -> &Matrix<T> {
        &self.jacobian
    }

    pub fn hessians(&self) -> Option<&[SymMatrix<T>]> {
        self.hessians.as_deref()
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn reg_m(&self) -> T {
        self.reg_m
    }

    /// Componentwise Taylor approximation `T_p^F(y; x̄)`.
    pub fn residual(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.anchor.len(), "taylor residual dimension mismatch");
        let d = linalg::sub(y, &self.anchor);
        let mut t = linalg::add(&self.value, &self.jacobian.matvec(&d));
        if let Some(hs) = &self.hessians {
            let half = T::of(0.5);
            for (ti, h) in t.iter_mut().zip(hs) {
                *ti = *ti + half * h.quad_form(&d);
            }
        }
        t
    }

    /// s_M(y; x̄) = g(T_p^F(y; x̄)) + M/(p+1)!·‖y−x̄‖^{p+1} + h(y)
    pub fn value(&self, prob: &CompositeProblem<T>, y: &[T]) -> T {
        let h = prob.inner().eval(y, prob.membership_tol);
        if h == T::infinity() {
            return T::infinity();
        }
        let t = self.residual(y);
        let step = linalg::norm(&linalg::sub(y, &self.anchor));
        let p1 = self.order.p() + 1;
        let reg = self.reg_m / self.order.reg_factorial::<T>() * step.powi(p1 as i32);
        prob.outer().eval(&t) + reg + h
    }
}

/// A smooth map defined by closures; convenient for small test problems.
pub struct FnMap<T: Scalar> {
    pub n: usize,
    pub m: usize,
    #[allow(clippy::type_complexity)]
    pub value: Box<dyn Fn(&[T]) -> Vec<T> + Send + Sync>,
    #[allow(clippy::type_complexity)]
    pub jacobian: Box<dyn Fn(&[T]) -> Matrix<T> + Send + Sync>,
    #[allow(clippy::type_complexity)]
    pub hessians: Option<Box<dyn Fn(&[T]) -> Vec<SymMatrix<T>> + Send + Sync>>,
    pub lipschitz: Option<Vec<T>>,
    pub lipschitz_order: u32,
}

impl<T: Scalar> SmoothMap<T> for FnMap<T> {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn output_dim(&self) -> usize {
        self.m
    }

    fn value(&self, x: &[T]) -> Vec<T> {
        (self.value)(x)
    }

    fn jacobian(&self, x: &[T]) -> Matrix<T> {
        (self.jacobian)(x)
    }

    fn hessians(&self, x: &[T]) -> Option<Vec<SymMatrix<T>>> {
        self.hessians.as_ref().map(|f| f(x))
    }

    fn lipschitz_p(&self, p: u32) -> Option<Vec<T>> {
        if p == self.lipschitz_order {
            self.lipschitz.clone()
        } else {
            None
        }
    }
}

/// Central-difference Jacobian check used by the test suites: relative error
/// of the analytic Jacobian against finite differences with step
/// `1e-5·(1+‖x‖)`.
pub fn jacobian_fd_error<T: Scalar>(map: &dyn SmoothMap<T>, x: &[T]) -> T {
    let n = map.input_dim();
    let jac = map.jacobian(x);
    let h = T::of(1e-5) * (T::one() + linalg::norm(x));
    let mut worst = T::zero();
    let scale = T::one() + jac.frob_norm();
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] = xp[j] + h;
        xm[j] = xm[j] - h;
        let fp = map.value(&xp);
        let fm = map.value(&xm);
        for i in 0..map.output_dim() {
            let fd = (fp[i] - fm[i]) / (T::of(2.0) * h);
            worst = worst.max((fd - jac[(i, j)]).abs() / scale);
        }
    }
    worst
}

/// Same idea for the per-component Hessians, differencing the Jacobian.
pub fn hessian_fd_error<T: Scalar>(map: &dyn SmoothMap<T>, x: &[T]) -> T {
    let n = map.input_dim();
    let hs = map.hessians(x).expect("map has no hessians");
    let h = T::of(1e-5) * (T::one() + linalg::norm(x));
    let mut worst = T::zero();
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] = xp[j] + h;
        xm[j] = xm[j] - h;
        let jp = map.jacobian(&xp);
        let jm = map.jacobian(&xm);
        for (i, hess) in hs.iter().enumerate() {
            let scale = T::one() + hess.frob_norm();
            for k in 0..n {
                let fd = (jp[(i, k)] - jm[(i, k)]) / (T::of(2.0) * h);
                worst = worst.max((fd - hess.as_matrix()[(k, j)]).abs() / scale);
            }
        }
    }
    worst
}
