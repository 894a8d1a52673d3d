//! Inexact proximal methods for monotone inclusions in ℝⁿ: the hybrid
//! proximal extragradient engine, Spingarn's partial inverse method, the
//! operator splitting built on it and a parallel forward-backward scheme,
//! each with runtime-checkable complexity certificates.

pub mod error;
pub mod fixtures;
pub mod forward_backward;
pub mod hpe;
pub mod linalg;
pub mod operators;
pub mod partial_inverse;
pub mod scalar;
pub mod spaces;
pub mod splitting;
pub mod tolerance;

pub use error::{Error, Result};
pub use forward_backward::{run_fb, CompositeProblem, CompositeTerm, FbOptions, FbState};
pub use hpe::{run_hpe, HpeConfig, HpeRunOptions};
pub use linalg::Matrix;
pub use operators::{
    eps_subdiff_cert, transport, AffineOp, GraphPoint, MonotoneOp, PartialInverseOp, Quadratic, Resolvent, SubdiffOp,
};
pub use partial_inverse::{run_spin, PartialInverseProblem, SpinAlgorithm, SpinOptions};
pub use scalar::Scalar;
pub use spaces::{consensus_subspace, ProductVector, Subspace, Vector};
pub use splitting::{run_sum, SplitState, SumOptions, SumProblem};
pub use tolerance::Tolerances;

pub type Vec64 = Vector<f64>;
pub type Vec32 = Vector<f32>;
pub type Subspace64 = Subspace<f64>;
pub type Subspace32 = Subspace<f32>;
pub type MonotoneOp64 = MonotoneOp<f64>;
pub type MonotoneOp32 = MonotoneOp<f32>;
