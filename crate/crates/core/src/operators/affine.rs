use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix, SymmetricEigen};
use crate::spaces::Vector;
use crate::Scalar;

/// Monotone affine map `x ↦ Ax + b`.
#[derive(Debug, Clone)]
pub struct AffineOp<T> {
    a: Matrix<T>,
    b: Vector<T>,
    /// Eigendecomposition of `A + Aᵀ`, built on first use.
    sym: OnceLock<SymmetricEigen<T>>,
}

impl<T: PartialEq> PartialEq for AffineOp<T> {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

impl<T: Scalar> AffineOp<T> {
    /// Validates shapes and monotonicity: the smallest eigenvalue of
    /// `A + Aᵀ` must be at least `-1e-10 · max(1, max|A|)`.
    pub fn new(a: Matrix<T>, b: Vector<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidParameter {
                name: "A",
                reason: format!("expected a square matrix, got {}x{}", a.rows(), a.cols()),
            });
        }
        b.check_dim(a.rows())?;
        if a.max_abs().is_nan() || !a.max_abs().is_finite() {
            return Err(Error::NonFinite { context: "affine operator matrix" });
        }
        let op = Self::new_unchecked(a, b);
        let min = op.sym().min_value();
        let floor = -T::of(1e-10) * T::one().max(op.a.max_abs());
        if min < floor {
            return Err(Error::NotMonotone { min_eigenvalue: min.as_f64() });
        }
        Ok(op)
    }

    pub(crate) fn new_unchecked(a: Matrix<T>, b: Vector<T>) -> Self {
        Self { a, b, sym: OnceLock::new() }
    }

    /// `c · I`
    pub fn scalar_identity(n: usize, c: T) -> Result<Self> {
        Self::new(Matrix::identity(n).scale(c), Vector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn offset(&self) -> &Vector<T> {
        &self.b
    }

    fn sym(&self) -> &SymmetricEigen<T> {
        self.sym.get_or_init(|| SymmetricEigen::new(&self.a.symmetric_sum()))
    }

    /// Smallest eigenvalue of `A + Aᵀ`.
    pub fn min_symmetric_eigenvalue(&self) -> T {
        self.sym().min_value()
    }

    pub fn eval(&self, x: &Vector<T>) -> Result<Vector<T>> {
        x.check_dim(self.dim())?;
        let mut y = Vector::raw(self.a.mul_vec(x.as_slice()));
        y.axpy(T::one(), &self.b);
        Ok(y)
    }

    /// LU factors of `λA + I`.
    pub fn resolvent_factor(&self, lambda: T) -> Result<Lu<T>> {
        let m = self.a.scale(lambda).add(&Matrix::identity(self.dim()));
        Lu::factor(&m).map_err(|_| Error::Singular { context: "affine resolvent" })
    }

    /// Solves `(λA + I) x = z − λb`.
    pub fn resolvent(&self, lambda: T, z: &Vector<T>) -> Result<Vector<T>> {
        z.check_dim(self.dim())?;
        let lu = self.resolvent_factor(lambda)?;
        Ok(self.apply_factor(&lu, lambda, z))
    }

    pub(crate) fn apply_factor(&self, lu: &Lu<T>, lambda: T, z: &Vector<T>) -> Vector<T> {
        let mut rhs = z.clone();
        rhs.axpy(-lambda, &self.b);
        Vector::raw(lu.solve(rhs.as_slice()))
    }

    /// `inf_y ⟨Ay + b − v, y − x⟩`, or `-∞` when the quadratic is unbounded
    /// below. `v ∈ T^ε(x)` iff the gap is at least `-ε`.
    pub fn eps_gap(&self, x: &Vector<T>, v: &Vector<T>) -> Result<T> {
        x.check_dim(self.dim())?;
        v.check_dim(self.dim())?;
        // Stationarity: (A + Aᵀ) y = Aᵀx − b + v.
        let mut rhs = Vector::raw(self.a.tr_mul_vec(x.as_slice()));
        rhs.axpy(-T::one(), &self.b);
        rhs.axpy(T::one(), v);
        let scale = self.a.max_abs() * x.norm() + self.b.norm() + v.norm() + T::min_positive_value();
        let tol = T::of(1e-9).max(T::epsilon() * T::of(1e4)) * scale;
        let Some(y) = self.sym().pinv_solve(rhs.as_slice(), tol) else {
            return Ok(T::neg_infinity());
        };
        let y = Vector::raw(y);
        let ty = self.eval(&y)?;
        Ok((&ty - v).dot(&(&y - x)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        other.b.check_dim(self.dim())?;
        Ok(Self::new_unchecked(self.a.add(&other.a), &self.b + &other.b))
    }

    pub fn scaled(&self, c: T) -> Self {
        Self::new_unchecked(self.a.scale(c), self.b.scaled(c))
    }
}
