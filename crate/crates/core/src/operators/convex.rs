use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Matrix, SymmetricEigen};
use crate::spaces::Vector;
use crate::Scalar;

/// `f(x) = ½ xᵀQx + ⟨q, x⟩ + r` with `Q` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Quadratic<T> {
    q: Matrix<T>,
    lin: Vector<T>,
    constant: T,
    eig: OnceLock<SymmetricEigen<T>>,
}

impl<T: PartialEq> PartialEq for Quadratic<T> {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.lin == other.lin && self.constant == other.constant
    }
}

impl<T: Scalar> Quadratic<T> {
    pub fn new(q: Matrix<T>, lin: Vector<T>, constant: T) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::InvalidParameter { name: "Q", reason: "Hessian must be square".into() });
        }
        lin.check_dim(q.rows())?;
        let asym = q.sub(&q.transpose()).max_abs();
        let scale = T::one().max(q.max_abs());
        if asym > T::of(1e-12) * scale {
            return Err(Error::InvalidParameter { name: "Q", reason: "Hessian must be symmetric".into() });
        }
        let f = Self { q, lin, constant, eig: OnceLock::new() };
        let min = f.eig().min_value();
        if min < -T::of(1e-10) * scale {
            return Err(Error::NotMonotone { min_eigenvalue: min.as_f64() });
        }
        Ok(f)
    }

    /// `½‖Ax − b‖²`
    pub fn least_squares(a: &Matrix<T>, b: &Vector<T>) -> Result<Self> {
        b.check_dim(a.rows())?;
        let q = a.transpose().matmul(a);
        let lin = Vector::raw(a.tr_mul_vec(b.as_slice())).scaled(-T::one());
        Self::new(q, lin, T::of(0.5) * b.norm_sq())
    }

    /// `½ (x − c)ᵀQ(x − c)`
    pub fn centered(q: Matrix<T>, center: &Vector<T>) -> Result<Self> {
        center.check_dim(q.rows())?;
        let qc = Vector::raw(q.mul_vec(center.as_slice()));
        let constant = T::of(0.5) * qc.dot(center);
        Self::new(q, qc.scaled(-T::one()), constant)
    }

    pub fn hessian(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn linear(&self) -> &Vector<T> {
        &self.lin
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    fn eig(&self) -> &SymmetricEigen<T> {
        self.eig.get_or_init(|| SymmetricEigen::new(&self.q))
    }

    /// Largest Hessian eigenvalue.
    pub fn lipschitz(&self) -> T {
        self.eig().max_value().max(T::zero())
    }

    pub fn value(&self, x: &Vector<T>) -> T {
        let qx = self.q.mul_vec(x.as_slice());
        T::of(0.5) * linalg::dot(&qx, x.as_slice()) + self.lin.dot(x) + self.constant
    }

    pub fn gradient(&self, x: &Vector<T>) -> Vector<T> {
        let mut g = Vector::raw(self.q.mul_vec(x.as_slice()));
        g.axpy(T::one(), &self.lin);
        g
    }

    pub(crate) fn prox_factor(&self, lambda: T) -> Result<Lu<T>> {
        Lu::factor(&self.q.scale(lambda).add(&Matrix::identity(self.q.rows())))
            .map_err(|_| Error::Singular { context: "quadratic prox" })
    }

    pub(crate) fn prox_with(&self, lu: &Lu<T>, lambda: T, z: &Vector<T>) -> Vector<T> {
        let mut rhs = z.clone();
        rhs.axpy(-lambda, &self.lin);
        Vector::raw(lu.solve(rhs.as_slice()))
    }

    /// `f*(v) = ½ (v − q)ᵀQ⁺(v − q) − r` when `v − q ∈ range Q`, else `+∞`.
    pub fn conjugate(&self, v: &Vector<T>) -> T {
        let w = v - &self.lin;
        let tol = T::of(1e-9) * (w.norm() + self.lin.norm() + T::one());
        match self.eig().pinv_solve(w.as_slice(), tol) {
            Some(y) => T::of(0.5) * linalg::dot(&y, w.as_slice()) - self.constant,
            None => T::infinity(),
        }
    }

    /// `f(x) + f*(v) − ⟨v, x⟩`, possibly `+∞`.
    pub fn fenchel_young_gap(&self, x: &Vector<T>, v: &Vector<T>) -> T {
        let c = self.conjugate(v);
        if c.is_infinite() {
            return T::infinity();
        }
        self.value(x) + c - v.dot(x)
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { q: self.q.scale(c), lin: self.lin.scaled(c), constant: self.constant * c, eig: OnceLock::new() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        other.lin.check_dim(self.lin.dim())?;
        Ok(Self {
            q: self.q.add(&other.q),
            lin: &self.lin + &other.lin,
            constant: self.constant + other.constant,
            eig: OnceLock::new(),
        })
    }
}

/// Indicator of `{x : Ax = b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSet<T> {
    a: Matrix<T>,
    b: Vector<T>,
    /// Orthonormal basis of the row space of `A`.
    basis: Vec<Vec<T>>,
    /// Minimum-norm feasible point.
    x0: Vector<T>,
}

impl<T: Scalar> AffineSet<T> {
    pub fn new(a: Matrix<T>, b: Vector<T>) -> Result<Self> {
        b.check_dim(a.rows())?;
        let aat = a.matmul(&a.transpose());
        let eig = SymmetricEigen::new(&aat);
        let tol = T::of(1e-9) * (b.norm() + T::one());
        let w = eig.pinv_solve(b.as_slice(), tol).ok_or_else(|| Error::InvalidParameter {
            name: "b",
            reason: "affine constraint set is empty".into(),
        })?;
        let x0 = Vector::raw(a.tr_mul_vec(&w));
        let resid = Vector::raw(a.mul_vec(x0.as_slice())).dist(&b);
        if resid > tol {
            return Err(Error::InvalidParameter { name: "b", reason: "affine constraint set is empty".into() });
        }
        let basis = linalg::orthonormalize(&a.to_rows(), T::of(1e-10));
        Ok(Self { a, b, basis, x0 })
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn rhs(&self) -> &Vector<T> {
        &self.b
    }

    fn row_component(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        for q in &self.basis {
            let c = linalg::dot(q, x);
            for (o, &qi) in out.iter_mut().zip(q) {
                *o = *o + c * qi;
            }
        }
        out
    }

    pub fn project(&self, x: &Vector<T>) -> Vector<T> {
        let d = x - &self.x0;
        let r = Vector::raw(self.row_component(d.as_slice()));
        x - &r
    }

    pub fn contains(&self, x: &Vector<T>) -> bool {
        let resid = Vector::raw(self.a.mul_vec(x.as_slice())).dist(&self.b);
        resid <= T::of(1e-9) * (self.a.max_abs() * x.norm() + self.b.norm() + T::one())
    }

    /// Support function: `⟨v, x0⟩` on the row space, `+∞` off it.
    pub fn conjugate(&self, v: &Vector<T>) -> T {
        let r = Vector::raw(self.row_component(v.as_slice()));
        if v.dist(&r) <= T::of(1e-9) * (v.norm() + T::one()) {
            v.dot(&self.x0)
        } else {
            T::infinity()
        }
    }
}

/// Built-in closed proper convex functions; the monotone operator is the
/// subdifferential `∂f`.
#[derive(Debug, Clone, PartialEq)]
pub enum SubdiffOp<T> {
    Quadratic(Quadratic<T>),
    /// `τ‖x‖₁`
    L1 { tau: T, dim: usize },
    /// Indicator of `[lo, hi]` (entries may be infinite).
    Box { lo: Vec<T>, hi: Vec<T> },
    AffineSet(AffineSet<T>),
    Zero { dim: usize },
}

impl<T: Scalar> SubdiffOp<T> {
    pub fn l1(tau: T, dim: usize) -> Result<Self> {
        if !(tau >= T::zero()) || !tau.is_finite() {
            return Err(Error::InvalidParameter { name: "tau", reason: "must be finite and nonnegative".into() });
        }
        Ok(Self::L1 { tau, dim })
    }

    pub fn boxed(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), found: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| l.is_nan() || h.is_nan() || l > h) {
            return Err(Error::InvalidParameter { name: "box", reason: "requires lo <= hi".into() });
        }
        Ok(Self::Box { lo, hi })
    }

    pub fn quadratic(f: Quadratic<T>) -> Self {
        Self::Quadratic(f)
    }

    pub fn affine_set(a: Matrix<T>, b: Vector<T>) -> Result<Self> {
        Ok(Self::AffineSet(AffineSet::new(a, b)?))
    }

    pub fn zero(dim: usize) -> Self {
        Self::Zero { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic(f) => f.lin.dim(),
            Self::L1 { dim, .. } | Self::Zero { dim } => *dim,
            Self::Box { lo, .. } => lo.len(),
            Self::AffineSet(s) => s.dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Quadratic(_) => "quadratic",
            Self::L1 { .. } => "l1",
            Self::Box { .. } => "box",
            Self::AffineSet(_) => "affine_set",
            Self::Zero { .. } => "zero",
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, Self::Quadratic(_) | Self::Zero { .. })
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, Self::Box { .. } | Self::AffineSet(_))
    }

    /// `f(x)`, possibly `+∞`.
    pub fn value(&self, x: &Vector<T>) -> T {
        match self {
            Self::Quadratic(f) => f.value(x),
            Self::L1 { tau, .. } => *tau * x.as_slice().iter().map(|v| v.abs()).sum::<T>(),
            Self::Box { lo, hi } => {
                let inside = x.as_slice().iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| l <= v && v <= h);
                if inside {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
            Self::AffineSet(s) => {
                if s.contains(x) {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
            Self::Zero { .. } => T::zero(),
        }
    }

    pub fn gradient(&self, x: &Vector<T>) -> Option<Vector<T>> {
        match self {
            Self::Quadratic(f) => Some(f.gradient(x)),
            Self::Zero { dim } => Some(Vector::zeros(*dim)),
            _ => None,
        }
    }

    /// Gradient Lipschitz constant for smooth kinds.
    pub fn lipschitz(&self) -> Option<T> {
        match self {
            Self::Quadratic(f) => Some(f.lipschitz()),
            Self::Zero { .. } => Some(T::zero()),
            _ => None,
        }
    }

    /// `argmin_x λf(x) + ½‖x − z‖²`
    pub fn prox(&self, lambda: T, z: &Vector<T>) -> Result<Vector<T>> {
        z.check_dim(self.dim())?;
        if !(lambda > T::zero()) {
            return Err(Error::InvalidParameter { name: "lambda", reason: "must be positive".into() });
        }
        Ok(match self {
            Self::Quadratic(f) => {
                let lu = f.prox_factor(lambda)?;
                f.prox_with(&lu, lambda, z)
            }
            _ => self.prox_separable(lambda, z),
        })
    }

    /// Prox for every kind except the quadratic one.
    pub(crate) fn prox_separable(&self, lambda: T, z: &Vector<T>) -> Vector<T> {
        match self {
            Self::L1 { tau, .. } => {
                let t = lambda * *tau;
                z.map(|v| v.signum() * (v.abs() - t).max(T::zero()))
            }
            Self::Box { .. } | Self::AffineSet(_) => self.domain_projection(z),
            Self::Zero { .. } => z.clone(),
            Self::Quadratic(_) => unreachable!("quadratic prox needs a factorization"),
        }
    }

    /// Projection onto `dom f` (identity for finite-valued kinds).
    pub fn domain_projection(&self, x: &Vector<T>) -> Vector<T> {
        match self {
            Self::Box { lo, hi } => Vector::raw(
                x.as_slice().iter().zip(lo.iter().zip(hi)).map(|(&v, (&l, &h))| v.max(l).min(h)).collect(),
            ),
            Self::AffineSet(s) => s.project(x),
            _ => x.clone(),
        }
    }

    /// Fenchel conjugate `f*(v)`, possibly `+∞`.
    pub fn conjugate(&self, v: &Vector<T>) -> T {
        match self {
            Self::Quadratic(f) => f.conjugate(v),
            Self::L1 { tau, .. } => {
                if v.norm_inf() <= *tau * (T::one() + T::of(1e-10)) + T::of(1e-14) {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
            Self::Box { lo, hi } => v
                .as_slice()
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&vi, (&l, &h))| {
                    if vi > T::zero() {
                        vi * h
                    } else if vi < T::zero() {
                        vi * l
                    } else {
                        T::zero()
                    }
                })
                .sum(),
            Self::AffineSet(s) => s.conjugate(v),
            Self::Zero { .. } => {
                if v.norm() <= T::of(1e-12) {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
        }
    }

    /// `f(x) + f*(v) − ⟨v, x⟩ ≥ 0`. The smallest `ε` with `v ∈ ∂_ε f(x)`.
    pub fn fenchel_young_gap(&self, x: &Vector<T>, v: &Vector<T>) -> T {
        let fx = self.value(x);
        let fv = self.conjugate(v);
        if fx.is_infinite() || fv.is_infinite() {
            return T::infinity();
        }
        fx + fv - v.dot(x)
    }

    /// `λf` for `λ > 0`.
    pub fn scaled(&self, c: T) -> Self {
        match self {
            Self::Quadratic(f) => Self::Quadratic(f.scaled(c)),
            Self::L1 { tau, dim } => Self::L1 { tau: *tau * c, dim: *dim },
            other => other.clone(),
        }
    }

    /// Sampled subgradient inequality `f(y) ≥ f(x) + ⟨v, y − x⟩ − ε − tol`
    /// at points of `dom f` around `x`.
    pub fn subgradient_check(
        &self,
        x: &Vector<T>,
        v: &Vector<T>,
        eps: T,
        samples: usize,
        rng: &mut impl Rng,
        tol: T,
    ) -> bool {
        let fx = self.value(x);
        if fx.is_infinite() {
            return false;
        }
        let n = self.dim();
        (0..samples).all(|s| {
            let radius = T::of(10f64.powi((s % 7) as i32 - 3));
            let mut y = x.clone();
            y.axpy(radius, &Vector::random_unit(n, rng));
            let y = self.domain_projection(&y);
            self.value(&y) >= fx + v.dot(&(&y - x)) - eps - tol * (T::one() + fx.abs())
        })
    }

    /// `f(x) − f(y) − ⟨∇f(y), x − y⟩` for smooth kinds.
    pub fn linearization_gap(&self, x: &Vector<T>, y: &Vector<T>) -> Result<T> {
        let g = self
            .gradient(y)
            .ok_or_else(|| Error::Unsupported(format!("{} is not differentiable", self.kind_name())))?;
        Ok(self.value(x) - self.value(y) - g.dot(&(x - y)))
    }
}

/// Given `v ∈ ∂f(x)`, returns `ε = f(x̃) − f(x) − ⟨v, x̃ − x⟩` so that
/// `v ∈ ∂_ε f(x̃)`. Round-off negatives within `clamp` (relative to the
/// magnitudes involved) are reported as zero.
pub fn eps_subdiff_cert<T: Scalar>(
    f: &SubdiffOp<T>,
    x: &Vector<T>,
    x_tilde: &Vector<T>,
    v: &Vector<T>,
    clamp: T,
) -> Result<T> {
    x.check_dim(f.dim())?;
    x_tilde.check_dim(f.dim())?;
    v.check_dim(f.dim())?;
    let ft = f.value(x_tilde);
    let fx = f.value(x);
    if ft.is_infinite() || fx.is_infinite() {
        return Err(Error::InfiniteValue);
    }
    let lin = v.dot(&(x_tilde - x));
    let eps = ft - fx - lin;
    if eps >= T::zero() {
        return Ok(eps);
    }
    let scale = T::one() + ft.abs() + fx.abs() + lin.abs();
    if eps >= -clamp * scale {
        Ok(T::zero())
    } else {
        Err(Error::NegativeCertificate { value: eps.as_f64() })
    }
}
