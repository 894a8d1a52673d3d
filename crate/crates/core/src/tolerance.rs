//! Audit tolerances in one place.

use crate::Scalar;

/// Tolerance record consulted by admission tests, membership certificates
/// and bound audits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Absolute slack for structural identities (projectors, state invariants).
    pub structural_abs: T,
    /// Relative slack for structural identities.
    pub structural_rel: T,
    /// Slack on relative-error admission inequalities.
    pub admission: T,
    /// Slack on enlargement / subdifferential membership.
    pub membership: T,
    /// Slack on complexity-bound audits.
    pub bound: T,
    /// Round-off window in which a negative epsilon is clamped to zero.
    pub eps_clamp: T,
    /// Slack on the descent-lemma check in the forward-backward method.
    pub lipschitz: T,
}

impl<T: Scalar> Tolerances<T> {
    /// Floors `v` at a small multiple of machine epsilon so the defaults stay
    /// meaningful for `f32`.
    fn floor(v: f64) -> T {
        let floor = T::epsilon() * T::of(64.0);
        T::of(v).max(floor)
    }

    /// Within `structural_abs + structural_rel * scale`.
    pub fn structural_ok(&self, err: T, scale: T) -> bool {
        err <= self.structural_abs + self.structural_rel * scale
    }
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            structural_abs: Self::floor(1e-12),
            structural_rel: Self::floor(1e-10),
            admission: Self::floor(1e-12),
            membership: Self::floor(1e-10),
            bound: Self::floor(1e-9),
            eps_clamp: Self::floor(1e-12),
            lipschitz: Self::floor(1e-10),
        }
    }
}
