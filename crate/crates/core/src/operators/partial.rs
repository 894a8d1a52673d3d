use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::operators::{AffineOp, GraphPoint, MonotoneOp};
use crate::spaces::{Subspace, Vector};
use crate::Scalar;

/// Spingarn's partial inverse `T_V` of a monotone operator with respect to a
/// closed subspace: `w ∈ T_V(z)` iff
/// `P_V w + P_{V⊥} z ∈ T(P_V z + P_{V⊥} w)`.
#[derive(Debug, Clone)]
pub struct PartialInverseOp<T> {
    base: MonotoneOp<T>,
    subspace: Subspace<T>,
}

impl<T: Scalar> PartialInverseOp<T> {
    pub fn new(base: MonotoneOp<T>, subspace: Subspace<T>) -> Result<Self> {
        if base.dim() != subspace.dim_ambient() {
            return Err(Error::DimensionMismatch { expected: base.dim(), found: subspace.dim_ambient() });
        }
        Ok(Self { base, subspace })
    }

    pub fn base(&self) -> &MonotoneOp<T> {
        &self.base
    }

    pub fn subspace(&self) -> &Subspace<T> {
        &self.subspace
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// The graph swap `(x, u) ↦ (P_V x + P_{V⊥} u, P_V u + P_{V⊥} x)`. It is an
    /// involution, so it also maps graph points of `T_V` back to `T`.
    pub fn swap(&self, x: &Vector<T>, u: &Vector<T>) -> Result<(Vector<T>, Vector<T>)> {
        let (xv, xp) = self.subspace.project_pair(x)?;
        let (uv, up) = self.subspace.project_pair(u)?;
        Ok((&xv + &up, &uv + &xp))
    }

    /// Maps `u ∈ T^ε(x)` to the corresponding point of `(T_V)^ε`.
    pub fn graph_point(&self, p: &GraphPoint<T>) -> Result<GraphPoint<T>> {
        let (z, w) = self.swap(&p.x, &p.v)?;
        Ok(GraphPoint { x: z, v: w, eps: p.eps })
    }

    /// Closed form of `T_V` for affine `T(x) = Ax + b`:
    /// with `M = P_V + P_{V⊥}A` and `N = P_V A + P_{V⊥}`,
    /// `T_V(z) = N M⁻¹ (z − P_{V⊥} b) + P_V b`. Fails when `M` is singular,
    /// in which case `T_V` is not single valued.
    pub fn to_affine(&self) -> Result<AffineOp<T>> {
        let base = self
            .base
            .as_affine()
            .ok_or_else(|| Error::Unsupported("partial inverse of a non-affine operator has no matrix form".into()))?;
        let n = self.dim();
        let p = self.subspace.projector_matrix();
        let pp = Matrix::identity(n).sub(&p);
        let a = base.matrix();
        let m = p.add(&pp.matmul(a));
        let nmat = p.matmul(a).add(&pp);
        let lu = Lu::factor(&m).map_err(|_| Error::Singular { context: "partial inverse of an affine operator" })?;
        let minv = lu.solve_matrix(&Matrix::identity(n));
        let g = nmat.matmul(&minv);
        let b = base.offset();
        let pb = Vector::raw(p.mul_vec(b.as_slice()));
        let ppb = Vector::raw(pp.mul_vec(b.as_slice()));
        let offset = &pb - &Vector::raw(g.mul_vec(ppb.as_slice()));
        Ok(AffineOp::new_unchecked(g, offset))
    }
}
