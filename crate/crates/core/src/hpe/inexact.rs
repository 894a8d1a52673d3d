use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hpe::{check_hpe_inequality, IterateTriple};
use crate::operators::{eps_subdiff_cert, GraphPoint, MonotoneOp, Resolvent};
use crate::spaces::Vector;
use crate::Scalar;

/// Halvings of the perturbation before falling back to the exact triple.
pub(crate) const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exact,
    Perturbed,
}

/// How far the computed triple departs from the exact resolvent.
/// `magnitude_fraction` scales the initial perturbation relative to the
/// exact proximal displacement `‖x̃ − z_prev‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InexactnessPolicy<T> {
    pub strategy: Strategy,
    pub magnitude_fraction: T,
    pub seed: u64,
}

impl<T: Scalar> InexactnessPolicy<T> {
    pub fn exact() -> Self {
        Self { strategy: Strategy::Exact, magnitude_fraction: T::zero(), seed: 0 }
    }

    pub fn perturbed(magnitude_fraction: T, seed: u64) -> Result<Self> {
        if !(magnitude_fraction >= T::zero() && magnitude_fraction < T::one()) {
            return Err(Error::InvalidParameter {
                name: "magnitude_fraction",
                reason: format!("must lie in [0, 1), got {magnitude_fraction}"),
            });
        }
        Ok(Self { strategy: Strategy::Perturbed, magnitude_fraction, seed })
    }

    pub fn is_exact(&self) -> bool {
        self.strategy == Strategy::Exact || self.magnitude_fraction == T::zero()
    }

    /// Rejects a perturbed policy under `σ = 0`, where only the exact triple
    /// is admissible.
    pub fn check_sigma(&self, sigma: T) -> Result<()> {
        if !self.is_exact() && sigma == T::zero() {
            return Err(Error::PolicyUnsatisfiable(
                "sigma = 0 admits only the exact resolvent; a nonzero perturbation was requested".into(),
            ));
        }
        Ok(())
    }
}

/// Moves the exact graph point `(x, v)` by `delta` and re-certifies it:
/// point-evaluable operators return `(x + δ, T(x + δ), 0)`; subdifferentials
/// keep `v` and take `ε` from the linearization certificate at the
/// domain-projected point; anything else keeps `v` and asks the operator for
/// an enlargement certificate.
pub fn perturbed_candidate<T: Scalar>(
    op: &MonotoneOp<T>,
    x_exact: &Vector<T>,
    v_exact: &Vector<T>,
    delta: &Vector<T>,
    clamp: T,
) -> Result<GraphPoint<T>> {
    let moved = x_exact + delta;
    if op.capabilities().has_point_eval {
        let v = op.eval(&moved)?;
        return Ok(GraphPoint { x: moved, v, eps: T::zero() });
    }
    if let MonotoneOp::Subdiff(f) = op {
        let x = f.domain_projection(&moved);
        let eps = eps_subdiff_cert(f, x_exact, &x, v_exact, clamp)?;
        return Ok(GraphPoint { x, v: v_exact.clone(), eps });
    }
    let eps = op.enlargement_eps(&moved, v_exact)?;
    if !eps.is_finite() {
        return Err(Error::PolicyUnsatisfiable("perturbed point has no finite enlargement certificate".into()));
    }
    Ok(GraphPoint { x: moved, v: v_exact.clone(), eps })
}

/// Triple for the HPE step at `z_prev`: the exact resolvent triple, or a
/// random perturbation of it that still satisfies the relative-error
/// inequality. The perturbation is halved until it is admitted; after
/// `MAX_HALVINGS` the exact triple is returned.
#[allow(clippy::too_many_arguments)]
pub fn controlled_inexact_resolvent<T: Scalar>(
    op: &MonotoneOp<T>,
    resolvent: &Resolvent<T>,
    z_prev: &Vector<T>,
    lambda: T,
    sigma: T,
    policy: &InexactnessPolicy<T>,
    rng: &mut impl Rng,
    clamp: T,
) -> Result<IterateTriple<T>> {
    policy.check_sigma(sigma)?;
    let x = resolvent.apply(z_prev)?;
    let v = (z_prev - &x).scaled(T::one() / lambda);
    let exact = IterateTriple { x_tilde: x, v, eps: T::zero(), lambda };
    if policy.is_exact() {
        return Ok(exact);
    }
    let mut magnitude = policy.magnitude_fraction * exact.x_tilde.dist(z_prev);
    if magnitude == T::zero() {
        return Ok(exact);
    }
    let dir = Vector::random_unit(z_prev.dim(), rng);
    for _ in 0..MAX_HALVINGS {
        let delta = dir.scaled(magnitude);
        magnitude = magnitude * T::of(0.5);
        let Ok(p) = perturbed_candidate(op, &exact.x_tilde, &exact.v, &delta, clamp) else {
            continue;
        };
        let cand = IterateTriple { x_tilde: p.x, v: p.v, eps: p.eps, lambda };
        // Strict: the candidate must be admitted without slack.
        if check_hpe_inequality(z_prev, &cand, sigma, T::zero())?.admitted {
            return Ok(cand);
        }
    }
    Ok(exact)
}
