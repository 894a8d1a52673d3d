//! Finite-dimensional Hilbert-space primitives: vectors, closed subspaces
//! given by their orthogonal projector, and the m-fold product space with
//! its consensus (diagonal) subspace.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::tolerance::Tolerances;
use crate::Scalar;

/// Element of ℝⁿ with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct Vector<T> {
    coords: Vec<T>,
}

impl<T: Scalar> TryFrom<Vec<T>> for Vector<T> {
    type Error = Error;
    fn try_from(coords: Vec<T>) -> Result<Self> {
        Self::new(coords)
    }
}

impl<T> From<Vector<T>> for Vec<T> {
    fn from(v: Vector<T>) -> Self {
        v.coords
    }
}

impl<T: Scalar> Vector<T> {
    /// Rejects empty and non-finite input.
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter {
                name: "coords",
                reason: "vectors must have positive dimension".into(),
            });
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "vector coordinates" });
        }
        Ok(Self { coords })
    }

    /// Wraps arithmetic results without re-validation.
    pub(crate) fn raw(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn from_f64(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| T::of(c)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self { coords: vec![T::zero(); n] }
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.coords[i] = T::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &Self) -> T {
        linalg::dot(&self.coords, &other.coords)
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.coords.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn dist(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub fn scaled(&self, c: T) -> Self {
        Self::raw(self.coords.iter().map(|&x| c * x).collect())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: T, x: &Self) {
        debug_assert_eq!(self.dim(), x.dim());
        for (s, &xi) in self.coords.iter_mut().zip(&x.coords) {
            *s = *s + a * xi;
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::raw(self.coords.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self::raw(self.coords.iter().zip(&other.coords).map(|(&a, &b)| f(a, b)).collect())
    }

    /// Coordinatewise mean of a nonempty list.
    pub fn mean(items: &[Self]) -> Self {
        let mut acc = Self::sum(items);
        let m = T::of(items.len() as f64);
        acc.coords.iter_mut().for_each(|c| *c = *c / m);
        acc
    }

    /// Sum in list order (fixed reduction order).
    pub fn sum(items: &[Self]) -> Self {
        let mut acc = Self::zeros(items[0].dim());
        for it in items {
            acc.axpy(T::one(), it);
        }
        acc
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: n, found: self.dim() })
        }
    }

    /// Uniform sample from `[-1, 1]ⁿ`.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        Self::raw((0..n).map(|_| T::of(rng.gen_range(-1.0..=1.0))).collect())
    }

    /// Uniform direction on the unit sphere.
    pub fn random_unit(n: usize, rng: &mut impl Rng) -> Self {
        loop {
            let v = Self::random(n, rng);
            let nv = v.norm();
            if nv > T::of(1e-3) {
                return v.scaled(T::one() / nv);
            }
        }
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.coords[i]
    }
}

impl<T: Scalar> Add for &Vector<T> {
    type Output = Vector<T>;
    fn add(self, rhs: Self) -> Vector<T> {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<T: Scalar> Sub for &Vector<T> {
    type Output = Vector<T>;
    fn sub(self, rhs: Self) -> Vector<T> {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl<T: Scalar> Add for Vector<T> {
    type Output = Vector<T>;
    fn add(self, rhs: Self) -> Vector<T> {
        &self + &rhs
    }
}

impl<T: Scalar> Sub for Vector<T> {
    type Output = Vector<T>;
    fn sub(self, rhs: Self) -> Vector<T> {
        &self - &rhs
    }
}

impl<T: Scalar> Neg for &Vector<T> {
    type Output = Vector<T>;
    fn neg(self) -> Vector<T> {
        self.map(|x| -x)
    }
}

impl<T: Scalar> Mul<T> for &Vector<T> {
    type Output = Vector<T>;
    fn mul(self, c: T) -> Vector<T> {
        self.scaled(c)
    }
}

type ProjectorFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

#[derive(Clone)]
enum Kind<T> {
    Full,
    Trivial,
    Coordinate(Vec<bool>),
    /// Orthonormal basis.
    Span(Vec<Vec<T>>),
    Consensus { m: usize, n: usize },
    Custom(ProjectorFn<T>),
}

/// Closed subspace V of ℝⁿ, represented by its orthogonal projector P_V.
/// The complement projector is `x - P_V x`.
#[derive(Clone)]
pub struct Subspace<T> {
    dim: usize,
    kind: Kind<T>,
}

impl<T> fmt::Debug for Subspace<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Full => "full".to_string(),
            Kind::Trivial => "trivial".to_string(),
            Kind::Coordinate(mask) => format!("coordinate{:?}", self::mask_indices(mask)),
            Kind::Span(b) => format!("span(rank {})", b.len()),
            Kind::Consensus { m, n } => format!("consensus(m={m}, n={n})"),
            Kind::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("Subspace").field("dim", &self.dim).field("kind", &kind).finish()
    }
}

fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
}

impl<T: Scalar> Subspace<T> {
    /// V = ℝⁿ, so P_V = I and P_{V⊥} = 0.
    pub fn full(dim: usize) -> Self {
        Self { dim, kind: Kind::Full }
    }

    /// V = {0}.
    pub fn trivial(dim: usize) -> Self {
        Self { dim, kind: Kind::Trivial }
    }

    /// Span of the listed coordinate axes.
    pub fn coordinate(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut mask = vec![false; dim];
        for &i in indices {
            if i >= dim {
                return Err(Error::InvalidParameter {
                    name: "indices",
                    reason: format!("coordinate {i} out of range for dimension {dim}"),
                });
            }
            mask[i] = true;
        }
        Ok(Self { dim, kind: Kind::Coordinate(mask) })
    }

    /// Span of arbitrary columns, orthonormalized by Gram-Schmidt.
    pub fn span(dim: usize, columns: &[Vector<T>]) -> Result<Self> {
        for c in columns {
            c.check_dim(dim)?;
        }
        let cols: Vec<Vec<T>> = columns.iter().map(|c| c.as_slice().to_vec()).collect();
        let basis = linalg::orthonormalize(&cols, T::of(1e-10));
        Ok(Self { dim, kind: Kind::Span(basis) })
    }

    /// Diagonal subspace {(x, …, x)} of (ℝⁿ)^m, flattened block-major.
    pub fn consensus(m: usize, n: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("consensus subspace needs m >= 2, got {m}"),
            });
        }
        if n == 0 {
            return Err(Error::InvalidParameter { name: "n", reason: "block dimension must be positive".into() });
        }
        Ok(Self { dim: m * n, kind: Kind::Consensus { m, n } })
    }

    /// Arbitrary projector callable. The caller is responsible for it being
    /// an orthogonal projector; see [`Subspace::check_projector`].
    pub fn from_projector(dim: usize, project: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self { dim, kind: Kind::Custom(Arc::new(project)) }
    }

    pub fn dim_ambient(&self) -> usize {
        self.dim
    }

    fn project_raw(&self, x: &[T]) -> Vec<T> {
        match &self.kind {
            Kind::Full => x.to_vec(),
            Kind::Trivial => vec![T::zero(); x.len()],
            Kind::Coordinate(mask) => {
                x.iter().zip(mask).map(|(&v, &keep)| if keep { v } else { T::zero() }).collect()
            }
            Kind::Span(basis) => {
                let mut out = vec![T::zero(); x.len()];
                for q in basis {
                    let c = linalg::dot(q, x);
                    for (o, &qi) in out.iter_mut().zip(q) {
                        *o = *o + c * qi;
                    }
                }
                out
            }
            Kind::Consensus { m, n } => {
                let mut mean = vec![T::zero(); *n];
                for b in 0..*m {
                    for (acc, &v) in mean.iter_mut().zip(&x[b * n..(b + 1) * n]) {
                        *acc = *acc + v;
                    }
                }
                let mm = T::of(*m as f64);
                mean.iter_mut().for_each(|v| *v = *v / mm);
                mean.iter().copied().cycle().take(m * n).collect()
            }
            Kind::Custom(f) => f(x),
        }
    }

    /// P_V x
    pub fn project(&self, x: &Vector<T>) -> Result<Vector<T>> {
        x.check_dim(self.dim)?;
        Ok(Vector::raw(self.project_raw(x.as_slice())))
    }

    /// P_{V⊥} x = x − P_V x
    pub fn project_complement(&self, x: &Vector<T>) -> Result<Vector<T>> {
        let pv = self.project(x)?;
        Ok(x - &pv)
    }

    /// (P_V x, P_{V⊥} x)
    pub fn project_pair(&self, x: &Vector<T>) -> Result<(Vector<T>, Vector<T>)> {
        let pv = self.project(x)?;
        let pvperp = x - &pv;
        Ok((pv, pvperp))
    }

    /// Dense matrix of P_V.
    pub fn projector_matrix(&self) -> Matrix<T> {
        let cols: Vec<Vec<T>> =
            (0..self.dim).map(|j| self.project_raw(Vector::<T>::unit(self.dim, j).as_slice())).collect();
        Matrix::from_fn(self.dim, self.dim, |i, j| cols[j][i])
    }

    /// Spot-checks idempotence and self-adjointness of P_V (and therefore of
    /// the complement) on random samples.
    pub fn check_projector(&self, samples: usize, rng: &mut impl Rng, tol: &Tolerances<T>) -> Result<()> {
        for _ in 0..samples {
            let x = Vector::random(self.dim, rng);
            let y = Vector::random(self.dim, rng);
            let px = self.project(&x)?;
            let ppx = self.project(&px)?;
            let scale = x.norm();
            if !tol.structural_ok(ppx.dist(&px), scale) {
                return Err(Error::Invariant("projector is not idempotent".into()));
            }
            let py = self.project(&y)?;
            let lhs = px.dot(&y);
            let rhs = x.dot(&py);
            if !tol.structural_ok((lhs - rhs).abs(), scale * y.norm()) {
                return Err(Error::Invariant("projector is not self-adjoint".into()));
            }
        }
        Ok(())
    }
}

/// Consensus subspace of (ℝⁿ)^m: P_V replicates the block mean, P_{V⊥}
/// subtracts it.
pub fn consensus_subspace<T: Scalar>(m: usize, n: usize) -> Result<Subspace<T>> {
    Subspace::consensus(m, n)
}

/// Element of (ℝⁿ)^m with the block-sum inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductVector<T> {
    blocks: Vec<Vector<T>>,
}

impl<T: Scalar> ProductVector<T> {
    pub fn new(blocks: Vec<Vector<T>>) -> Result<Self> {
        let n = blocks
            .first()
            .map(Vector::dim)
            .ok_or_else(|| Error::InvalidParameter { name: "blocks", reason: "empty product vector".into() })?;
        for b in &blocks {
            b.check_dim(n)?;
        }
        Ok(Self { blocks })
    }

    pub fn from_flat(m: usize, flat: &Vector<T>) -> Result<Self> {
        if m == 0 || flat.dim() % m != 0 {
            return Err(Error::DimensionMismatch { expected: m, found: flat.dim() });
        }
        let n = flat.dim() / m;
        Self::new(flat.as_slice().chunks(n).map(|c| Vector::raw(c.to_vec())).collect())
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn n(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn blocks(&self) -> &[Vector<T>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Vector<T>> {
        self.blocks
    }

    pub fn flatten(&self) -> Vector<T> {
        Vector::raw(self.blocks.iter().flat_map(|b| b.as_slice().iter().copied()).collect())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn block_sum(&self) -> Vector<T> {
        Vector::sum(&self.blocks)
    }

    pub fn block_mean(&self) -> Vector<T> {
        Vector::mean(&self.blocks)
    }
}
