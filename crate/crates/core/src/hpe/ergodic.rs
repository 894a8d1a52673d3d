use crate::error::{Error, Result};
use crate::operators::{clamp_eps, GraphPoint};
use crate::spaces::Vector;
use crate::Scalar;

/// Weighted running means of `(z̃, v)` and the aggregated `ε^a`.
///
/// The cross term `Σ w_ℓ⟨z̃_ℓ − z̃^a, v_ℓ − v^a⟩` is accumulated with a
/// weighted Welford update instead of raw sums, which would cancel
/// catastrophically once the iterates settle.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicState<T> {
    total_weight: T,
    count: usize,
    mean_z: Vector<T>,
    mean_v: Vector<T>,
    weighted_eps: T,
    cross: T,
    cross_abs: T,
}

impl<T: Scalar> ErgodicState<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            total_weight: T::zero(),
            count: 0,
            mean_z: Vector::zeros(dim),
            mean_v: Vector::zeros(dim),
            weighted_eps: T::zero(),
            cross: T::zero(),
            cross_abs: T::zero(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn len(&self) -> usize {
        self.count
    }

    /// `Λ = Σ w_ℓ`
    pub fn total_weight(&self) -> T {
        self.total_weight
    }

    /// Adds `(z̃, v, ε)` with weight `w > 0` (the stepsize in the HPE method).
    pub fn update(&mut self, w: T, z: &Vector<T>, v: &Vector<T>, eps: T) -> Result<()> {
        z.check_dim(self.mean_z.dim())?;
        v.check_dim(self.mean_z.dim())?;
        if !(w > T::zero()) || !(eps >= T::zero()) {
            return Err(Error::InvalidParameter { name: "weight", reason: "requires w > 0 and eps >= 0".into() });
        }
        let total = self.total_weight + w;
        let r = w / total;
        let dz = z - &self.mean_z;
        self.mean_z.axpy(r, &dz);
        self.mean_v.axpy(r, &(v - &self.mean_v));
        let inc = w * dz.dot(&(v - &self.mean_v));
        self.cross = self.cross + inc;
        self.cross_abs = self.cross_abs + inc.abs();
        self.weighted_eps = self.weighted_eps + w * eps;
        self.total_weight = total;
        self.count += 1;
        Ok(())
    }

    /// `ε^a` before clamping.
    pub fn raw_eps(&self) -> Result<T> {
        if self.is_empty() {
            return Err(Error::EmptyErgodic);
        }
        Ok((self.weighted_eps + self.cross) / self.total_weight)
    }

    /// `(z̃^a, v^a, ε^a)`; round-off negatives of `ε^a` are clamped to zero.
    pub fn query(&self, clamp: T) -> Result<GraphPoint<T>> {
        let raw = self.raw_eps()?;
        let scale = T::one() + self.cross_abs / self.total_weight;
        Ok(GraphPoint { x: self.mean_z.clone(), v: self.mean_v.clone(), eps: clamp_eps(raw, clamp * scale)? })
    }

    pub fn mean_z(&self) -> &Vector<T> {
        &self.mean_z
    }

    pub fn mean_v(&self) -> &Vector<T> {
        &self.mean_v
    }
}
