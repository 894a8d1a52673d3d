//! Monotone operators: affine maps, subdifferentials of built-in convex
//! functions, sums, positive multiples, partial inverses and products, with
//! exact resolvents and ε-enlargement certificates.

mod affine;
mod convex;
mod partial;

use rand::Rng;

pub use affine::AffineOp;
pub use convex::{eps_subdiff_cert, AffineSet, Quadratic, SubdiffOp};
pub use partial::PartialInverseOp;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::spaces::{Subspace, Vector};
use crate::Scalar;

/// `(x, v, ε)` with `v ∈ T^ε(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPoint<T> {
    pub x: Vector<T>,
    pub v: Vector<T>,
    pub eps: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub has_exact_resolvent: bool,
    pub has_point_eval: bool,
    pub is_affine: bool,
    pub is_subdifferential: bool,
}

/// Maximal monotone operator on ℝⁿ.
#[derive(Debug, Clone)]
pub enum MonotoneOp<T> {
    Affine(AffineOp<T>),
    Subdiff(SubdiffOp<T>),
    Sum(Vec<MonotoneOp<T>>),
    /// `c · T` with `c > 0`.
    Scaled(T, Box<MonotoneOp<T>>),
    PartialInverse(Box<PartialInverseOp<T>>),
    /// Block-diagonal operator `T₁(x₁) × ⋯ × T_m(x_m)` on a flattened product space.
    Product(Vec<MonotoneOp<T>>),
}

impl<T: Scalar> MonotoneOp<T> {
    pub fn affine(a: Matrix<T>, b: Vector<T>) -> Result<Self> {
        Ok(Self::Affine(AffineOp::new(a, b)?))
    }

    pub fn sum(ops: Vec<Self>) -> Result<Self> {
        let n = ops.first().map(Self::dim).ok_or_else(|| Error::InvalidParameter {
            name: "ops",
            reason: "sum of zero operators".into(),
        })?;
        for op in &ops {
            if op.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: op.dim() });
            }
        }
        Ok(Self::Sum(ops))
    }

    pub fn scaled(c: T, op: Self) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidParameter { name: "c", reason: "scale must be positive and finite".into() });
        }
        Ok(Self::Scaled(c, Box::new(op)))
    }

    pub fn partial_inverse(op: Self, v: Subspace<T>) -> Result<Self> {
        Ok(Self::PartialInverse(Box::new(PartialInverseOp::new(op, v)?)))
    }

    pub fn product(ops: Vec<Self>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidParameter { name: "ops", reason: "empty product".into() });
        }
        Ok(Self::Product(ops))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Affine(a) => a.dim(),
            Self::Subdiff(f) => f.dim(),
            Self::Sum(ops) => ops[0].dim(),
            Self::Scaled(_, op) => op.dim(),
            Self::PartialInverse(p) => p.dim(),
            Self::Product(ops) => ops.iter().map(Self::dim).sum(),
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        let is_affine = self.is_affine();
        match self {
            Self::Affine(_) => Capabilities {
                has_exact_resolvent: true,
                has_point_eval: true,
                is_affine: true,
                is_subdifferential: false,
            },
            Self::Subdiff(f) => Capabilities {
                has_exact_resolvent: true,
                has_point_eval: f.is_smooth(),
                is_affine,
                is_subdifferential: true,
            },
            Self::Sum(ops) => Capabilities {
                has_exact_resolvent: is_affine,
                has_point_eval: ops.iter().all(|o| o.capabilities().has_point_eval),
                is_affine,
                is_subdifferential: ops.iter().all(|o| o.capabilities().is_subdifferential),
            },
            Self::Scaled(_, op) => op.capabilities(),
            Self::PartialInverse(p) => Capabilities {
                has_exact_resolvent: p.base().capabilities().has_exact_resolvent,
                has_point_eval: is_affine,
                is_affine,
                is_subdifferential: false,
            },
            Self::Product(ops) => {
                let caps: Vec<Capabilities> = ops.iter().map(Self::capabilities).collect();
                Capabilities {
                    has_exact_resolvent: caps.iter().all(|c| c.has_exact_resolvent),
                    has_point_eval: caps.iter().all(|c| c.has_point_eval),
                    is_affine,
                    is_subdifferential: caps.iter().all(|c| c.is_subdifferential),
                }
            }
        }
    }

    fn is_affine(&self) -> bool {
        match self {
            Self::Affine(_) => true,
            Self::Subdiff(f) => f.is_smooth(),
            Self::Sum(ops) | Self::Product(ops) => ops.iter().all(Self::is_affine),
            Self::Scaled(_, op) => op.is_affine(),
            Self::PartialInverse(p) => p.base().is_affine() && p.to_affine().is_ok(),
        }
    }

    /// Matrix form `x ↦ Ax + b` when the operator is single-valued affine.
    pub fn as_affine(&self) -> Option<AffineOp<T>> {
        match self {
            Self::Affine(a) => Some(a.clone()),
            Self::Subdiff(SubdiffOp::Quadratic(q)) => {
                Some(AffineOp::new_unchecked(q.hessian().clone(), q.linear().clone()))
            }
            Self::Subdiff(SubdiffOp::Zero { dim }) => {
                Some(AffineOp::new_unchecked(Matrix::zeros(*dim, *dim), Vector::zeros(*dim)))
            }
            Self::Subdiff(_) => None,
            Self::Sum(ops) => {
                let mut acc = ops[0].as_affine()?;
                for op in &ops[1..] {
                    acc = acc.add(&op.as_affine()?).ok()?;
                }
                Some(acc)
            }
            Self::Scaled(c, op) => op.as_affine().map(|a| a.scaled(*c)),
            Self::PartialInverse(p) => p.to_affine().ok(),
            Self::Product(ops) => {
                let parts: Option<Vec<AffineOp<T>>> = ops.iter().map(Self::as_affine).collect();
                let parts = parts?;
                let a = Matrix::block_diag(&parts.iter().map(|p| p.matrix().clone()).collect::<Vec<_>>());
                let b: Vec<T> = parts.iter().flat_map(|p| p.offset().as_slice().to_vec()).collect();
                Some(AffineOp::new_unchecked(a, Vector::raw(b)))
            }
        }
    }

    /// `T(x)` for single-valued operators.
    pub fn eval(&self, x: &Vector<T>) -> Result<Vector<T>> {
        x.check_dim(self.dim())?;
        match self {
            Self::Affine(a) => a.eval(x),
            Self::Subdiff(f) => f
                .gradient(x)
                .ok_or_else(|| Error::Unsupported(format!("point evaluation of the {} subdifferential", f.kind_name()))),
            Self::Sum(ops) => {
                let mut acc = Vector::zeros(x.dim());
                for op in ops {
                    acc.axpy(T::one(), &op.eval(x)?);
                }
                Ok(acc)
            }
            Self::Scaled(c, op) => Ok(op.eval(x)?.scaled(*c)),
            Self::PartialInverse(p) => p.to_affine()?.eval(x),
            Self::Product(ops) => {
                let mut out = Vec::with_capacity(x.dim());
                let mut off = 0;
                for op in ops {
                    let n = op.dim();
                    let xi = Vector::raw(x.as_slice()[off..off + n].to_vec());
                    out.extend(op.eval(&xi)?.into_vec());
                    off += n;
                }
                Ok(Vector::raw(out))
            }
        }
    }

    /// Prepares `(λT + I)⁻¹` for repeated application.
    pub fn prepare_resolvent(&self, lambda: T) -> Result<Resolvent<T>> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidParameter { name: "lambda", reason: "must be positive and finite".into() });
        }
        match self {
            Self::Affine(a) => Ok(Resolvent::Affine { lu: a.resolvent_factor(lambda)?, op: a.clone(), lambda }),
            Self::Subdiff(SubdiffOp::Quadratic(q)) => {
                Ok(Resolvent::Quadratic { lu: q.prox_factor(lambda)?, f: q.clone(), lambda })
            }
            Self::Subdiff(f) => Ok(Resolvent::Prox { f: f.clone(), lambda }),
            Self::Scaled(c, op) => op.prepare_resolvent(lambda * *c),
            Self::Product(ops) => {
                Ok(Resolvent::Product(ops.iter().map(|o| o.prepare_resolvent(lambda)).collect::<Result<_>>()?))
            }
            Self::PartialInverse(p) if lambda == T::one() => Ok(Resolvent::PartialInverse {
                inner: Box::new(p.base().prepare_resolvent(T::one())?),
                subspace: p.subspace().clone(),
            }),
            Self::PartialInverse(_) | Self::Sum(_) => {
                let a = self.as_affine().ok_or_else(|| {
                    Error::Unsupported("resolvent of this operator combination is not available in closed form".into())
                })?;
                Ok(Resolvent::Affine { lu: a.resolvent_factor(lambda)?, op: a, lambda })
            }
        }
    }

    /// `(λT + I)⁻¹ z`
    pub fn resolvent(&self, lambda: T, z: &Vector<T>) -> Result<Vector<T>> {
        self.prepare_resolvent(lambda)?.apply(z)
    }

    /// A certified `ε` with `v ∈ T^ε(x)`: exact (the infimum gap) for affine
    /// kinds, the Fenchel-Young gap for subdifferentials, and assembled by
    /// the sum rule for products. `+∞` means membership is refuted (affine)
    /// or cannot be certified.
    pub fn enlargement_eps(&self, x: &Vector<T>, v: &Vector<T>) -> Result<T> {
        x.check_dim(self.dim())?;
        v.check_dim(self.dim())?;
        match self {
            Self::Affine(a) => Ok((-a.eps_gap(x, v)?).max(T::zero())),
            Self::Subdiff(f) => Ok(f.fenchel_young_gap(x, v).max(T::zero())),
            Self::Scaled(c, op) => Ok(*c * op.enlargement_eps(x, &v.scaled(T::one() / *c))?),
            Self::PartialInverse(p) => {
                let (bx, bv) = p.swap(x, v)?;
                p.base().enlargement_eps(&bx, &bv)
            }
            Self::Product(ops) => {
                let mut total = T::zero();
                let mut off = 0;
                for op in ops {
                    let n = op.dim();
                    let xi = Vector::raw(x.as_slice()[off..off + n].to_vec());
                    let vi = Vector::raw(v.as_slice()[off..off + n].to_vec());
                    total = total + op.enlargement_eps(&xi, &vi)?;
                    off += n;
                }
                Ok(total)
            }
            Self::Sum(_) => match self.as_affine() {
                Some(a) => Ok((-a.eps_gap(x, v)?).max(T::zero())),
                None => Err(Error::Unsupported("enlargement of a non-affine sum needs a decomposition of v".into())),
            },
        }
    }

    /// `v ∈ T^{ε + tol}(x)` according to [`MonotoneOp::enlargement_eps`].
    pub fn membership(&self, x: &Vector<T>, v: &Vector<T>, eps: T, tol: T) -> Result<bool> {
        Ok(self.enlargement_eps(x, v)? <= eps + tol)
    }

    /// Exact graph points `(J(z), (z − J(z))/λ)` at random `z`.
    pub fn sample_graph(&self, count: usize, rng: &mut impl Rng) -> Result<Vec<GraphPoint<T>>> {
        let lambda = T::one();
        let res = self.prepare_resolvent(lambda)?;
        (0..count)
            .map(|_| {
                let z = Vector::random(self.dim(), rng).scaled(T::of(3.0));
                let x = res.apply(&z)?;
                let v = &z - &x;
                Ok(GraphPoint { x, v, eps: T::zero() })
            })
            .collect()
    }

    /// Pairwise check `⟨v − v′, x − x′⟩ ≥ −tol·‖x − x′‖‖v − v′‖` on sampled
    /// graph points.
    pub fn check_monotone_sampled(&self, count: usize, rng: &mut impl Rng, tol: T) -> Result<()> {
        let pts = self.sample_graph(count, rng)?;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                let dx = &p.x - &q.x;
                let dv = &p.v - &q.v;
                if dx.dot(&dv) < -tol * dx.norm() * dv.norm() {
                    return Err(Error::Invariant("sampled graph points violate monotonicity".into()));
                }
            }
        }
        Ok(())
    }
}

impl<T: Scalar> From<AffineOp<T>> for MonotoneOp<T> {
    fn from(a: AffineOp<T>) -> Self {
        Self::Affine(a)
    }
}

impl<T: Scalar> From<SubdiffOp<T>> for MonotoneOp<T> {
    fn from(f: SubdiffOp<T>) -> Self {
        Self::Subdiff(f)
    }
}

/// Prepared resolvent `(λT + I)⁻¹`.
#[derive(Debug, Clone)]
pub enum Resolvent<T> {
    Affine { op: AffineOp<T>, lu: Lu<T>, lambda: T },
    Quadratic { f: Quadratic<T>, lu: Lu<T>, lambda: T },
    Prox { f: SubdiffOp<T>, lambda: T },
    Product(Vec<Resolvent<T>>),
    /// Unit-step resolvent of a partial inverse:
    /// `P_V x̃ + P_{V⊥}(z − x̃)` with `x̃ = (T + I)⁻¹ z`.
    PartialInverse { inner: Box<Resolvent<T>>, subspace: Subspace<T> },
}

impl<T: Scalar> Resolvent<T> {
    pub fn dim(&self) -> usize {
        match self {
            Self::Affine { op, .. } => op.dim(),
            Self::Quadratic { f, .. } => f.linear().dim(),
            Self::Prox { f, .. } => f.dim(),
            Self::Product(parts) => parts.iter().map(Self::dim).sum(),
            Self::PartialInverse { subspace, .. } => subspace.dim_ambient(),
        }
    }

    pub fn apply(&self, z: &Vector<T>) -> Result<Vector<T>> {
        z.check_dim(self.dim())?;
        let out = match self {
            Self::Affine { op, lu, lambda } => op.apply_factor(lu, *lambda, z),
            Self::Quadratic { f, lu, lambda } => f.prox_with(lu, *lambda, z),
            Self::Prox { f, lambda } => f.prox_separable(*lambda, z),
            Self::Product(parts) => {
                let mut out = Vec::with_capacity(z.dim());
                let mut off = 0;
                for p in parts {
                    let n = p.dim();
                    out.extend(p.apply(&Vector::raw(z.as_slice()[off..off + n].to_vec()))?.into_vec());
                    off += n;
                }
                Vector::raw(out)
            }
            Self::PartialInverse { inner, subspace } => {
                let xt = inner.apply(z)?;
                let pv = subspace.project(&xt)?;
                let rest = subspace.project_complement(&(z - &xt))?;
                &pv + &rest
            }
        };
        if !out.is_finite() {
            return Err(Error::NonFinite { context: "resolvent output" });
        }
        Ok(out)
    }
}

/// Transportation formula: for `v_ℓ ∈ T^{ε_ℓ}(x_ℓ)` and convex weights `α`,
/// `u^a = Σα_ℓ v_ℓ ∈ T^{ε^a}(x^a)` with `x^a = Σα_ℓ x_ℓ` and
/// `ε^a = Σα_ℓ[ε_ℓ + ⟨x_ℓ − x^a, v_ℓ − u^a⟩] ≥ 0`. Negative round-off within
/// `clamp` is reported as zero.
pub fn transport<T: Scalar>(points: &[GraphPoint<T>], weights: &[T], clamp: T) -> Result<GraphPoint<T>> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), found: weights.len() });
    }
    let sum: T = weights.iter().copied().sum();
    let min = weights.iter().copied().fold(T::infinity(), T::min);
    if min < T::zero() || (sum - T::one()).abs() > T::of(1e-12) * T::of(weights.len() as f64).max(T::one()) {
        return Err(Error::NotConvexCombination { sum: sum.as_f64(), min: min.as_f64() });
    }
    if points.iter().any(|p| !(p.eps >= T::zero())) {
        return Err(Error::InvalidParameter { name: "eps", reason: "enlargement parameters must be nonnegative".into() });
    }
    let n = points[0].x.dim();
    let mut xa = Vector::zeros(n);
    let mut va = Vector::zeros(n);
    for (p, &w) in points.iter().zip(weights) {
        p.x.check_dim(n)?;
        p.v.check_dim(n)?;
        xa.axpy(w, &p.x);
        va.axpy(w, &p.v);
    }
    let mut eps = T::zero();
    for (p, &w) in points.iter().zip(weights) {
        eps = eps + w * (p.eps + (&p.x - &xa).dot(&(&p.v - &va)));
    }
    Ok(GraphPoint { x: xa, v: va, eps: clamp_eps(eps, clamp)? })
}

/// Clamps round-off negatives in `[-clamp, 0)` to zero.
pub(crate) fn clamp_eps<T: Scalar>(eps: T, clamp: T) -> Result<T> {
    if eps >= T::zero() {
        Ok(eps)
    } else if eps >= -clamp {
        Ok(T::zero())
    } else {
        Err(Error::NegativeCertificate { value: eps.as_f64() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::random_monotone_affine;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(x: f64) -> Vector<f64> {
        Vector::new(vec![x]).unwrap()
    }

    fn gp(x: f64, v: f64, eps: f64) -> GraphPoint<f64> {
        GraphPoint { x: s(x), v: s(v), eps }
    }

    #[test]
    fn resolvent_examples() {
        let id = MonotoneOp::Affine(AffineOp::scalar_identity(1, 1.0).unwrap());
        assert!((id.resolvent(1.0, &s(1.0)).unwrap()[0] - 0.5).abs() < 1e-15);
        let l1 = MonotoneOp::Subdiff(SubdiffOp::l1(1.0, 1).unwrap());
        assert_eq!(l1.resolvent(1.0, &s(0.3)).unwrap()[0], 0.0);
        let sh: f64 = 0.8;
        let theta = (1.0 - (1.0 - sh * sh).powi(2)).sqrt();
        let gamma = (1.0 + theta) / (1.0 - sh * sh);
        let alpha = 2.0 * gamma / (gamma - 2.0) + 1.0;
        let t = MonotoneOp::Affine(AffineOp::scalar_identity(1, alpha).unwrap());
        let x = t.resolvent(1.0, &s(1.0)).unwrap()[0];
        assert!((x - 1.0 / (1.0 + alpha)).abs() < 1e-15);
        assert!((x - 0.19278).abs() < 1e-5);
    }

    #[test]
    fn scaled_and_product_resolvents() {
        let t = MonotoneOp::scaled(2.0, MonotoneOp::Affine(AffineOp::scalar_identity(1, 1.0).unwrap())).unwrap();
        // (2·I + I)⁻¹ 3 = 1
        assert!((t.resolvent(1.0, &s(3.0)).unwrap()[0] - 1.0).abs() < 1e-15);
        let p = MonotoneOp::product(vec![t, MonotoneOp::Subdiff(SubdiffOp::l1(1.0, 1).unwrap())]).unwrap();
        let z = Vector::new(vec![3.0, 2.5]).unwrap();
        assert_eq!(p.resolvent(1.0, &z).unwrap().as_slice(), &[1.0, 1.5]);
    }

    #[test]
    fn partial_inverse_resolvent_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random_monotone_affine::<f64>(5, &mut rng);
        let cols: Vec<Vector<f64>> = (0..2).map(|_| Vector::random(5, &mut rng)).collect();
        let op = MonotoneOp::partial_inverse(MonotoneOp::Affine(t), Subspace::span(5, &cols).unwrap()).unwrap();
        let tv = op.as_affine().unwrap();
        let z = Vector::random(5, &mut rng);
        let spingarn = op.resolvent(1.0, &z).unwrap();
        let direct = tv.resolvent(1.0, &z).unwrap();
        assert!(spingarn.dist(&direct) < 1e-12);
    }

    #[test]
    fn transport_examples() {
        let one = transport(&[gp(1.0, 2.0, 0.3)], &[1.0], 1e-12).unwrap();
        assert_eq!(one, gp(1.0, 2.0, 0.3));
        let p = transport(&[gp(1.0, 1.0, 0.0), gp(-1.0, -1.0, 0.0)], &[0.5, 0.5], 1e-12).unwrap();
        assert_eq!((p.x[0], p.v[0], p.eps), (0.0, 0.0, 1.0));
        let id = AffineOp::scalar_identity(1, 1.0).unwrap();
        assert!(id.eps_gap(&p.x, &p.v).unwrap() >= -p.eps - 1e-10);
        let same = transport(&[gp(1.0, 1.0, 0.0), gp(1.0, 1.0, 0.0)], &[0.5, 0.5], 1e-12).unwrap();
        assert_eq!(same.eps, 0.0);
        assert!(matches!(
            transport(&[gp(1.0, 1.0, 0.0), gp(1.0, 1.0, 0.0)], &[0.7, 0.5], 1e-12),
            Err(Error::NotConvexCombination { .. })
        ));
        assert!(transport(&[gp(1.0, 1.0, 0.0), gp(1.0, 1.0, 0.0)], &[1.5, -0.5], 1e-12).is_err());
    }

    #[test]
    fn gap_of_graph_points_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let t = random_monotone_affine::<f64>(6, &mut rng);
            let x = Vector::random(6, &mut rng);
            let g = t.eps_gap(&x, &t.eval(&x).unwrap()).unwrap();
            assert!(g.abs() <= 1e-12, "{g}");
        }
    }

    #[test]
    fn membership_is_monotone_in_eps() {
        let t = MonotoneOp::Affine(AffineOp::scalar_identity(1, 1.0).unwrap());
        let (x, v) = (s(0.0), s(1.0));
        let e = t.enlargement_eps(&x, &v).unwrap();
        assert!((e - 0.25).abs() < 1e-15);
        let flags: Vec<bool> = [0.0, 0.1, 0.25, 0.5, 2.0].iter().map(|&eps| t.membership(&x, &v, eps, 0.0).unwrap()).collect();
        assert_eq!(flags, vec![false, false, true, true, true]);
    }

    #[test]
    fn sum_rule_for_affine_enlargements() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let (t, s) = (random_monotone_affine::<f64>(3, &mut rng), random_monotone_affine::<f64>(3, &mut rng));
            let x = Vector::random(3, &mut rng);
            let vt = &t.eval(&x).unwrap() + &Vector::random(3, &mut rng).scaled(0.1);
            let vs = &s.eval(&x).unwrap() + &Vector::random(3, &mut rng).scaled(0.1);
            let et = -t.eps_gap(&x, &vt).unwrap();
            let es = -s.eps_gap(&x, &vs).unwrap();
            let sum = t.add(&s).unwrap();
            assert!(sum.eps_gap(&x, &(&vt + &vs)).unwrap() >= -(et + es) - 1e-10);
        }
    }

    #[test]
    fn builtin_operators_are_monotone_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ops: Vec<MonotoneOp<f64>> = vec![
            random_monotone_affine(4, &mut rng).into(),
            SubdiffOp::l1(0.5, 4).unwrap().into(),
            SubdiffOp::boxed(vec![-1.0; 4], vec![1.0; 4]).unwrap().into(),
        ];
        for op in &ops {
            op.check_monotone_sampled(15, &mut rng, 1e-10).unwrap();
        }
        let caps = ops[1].capabilities();
        assert!(caps.has_exact_resolvent && caps.is_subdifferential && !caps.has_point_eval && !caps.is_affine);
    }

    proptest! {
        #[test]
        fn transport_yields_valid_enlargement_points(seed in 0u64..200, k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_monotone_affine::<f64>(3, &mut rng);
            let pts: Vec<GraphPoint<f64>> = (0..k).map(|_| {
                let x = Vector::random(3, &mut rng);
                let v = t.eval(&x).unwrap();
                GraphPoint { x, v, eps: 0.0 }
            }).collect();
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
            let tot: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|r| r / tot).collect();
            let p = transport(&pts, &w, 1e-12).unwrap();
            prop_assert!(p.eps >= 0.0);
            prop_assert!(t.eps_gap(&p.x, &p.v).unwrap() >= -p.eps - 1e-10);
        }
    }
}
