//! Hybrid proximal extragradient engine: relative-error admission, the
//! extragradient update, ergodic averaging, complexity bounds, the variant
//! criterion and its counterexamples.

mod ergodic;
mod inexact;
mod run;
mod variant;

use std::fmt;
use std::sync::Arc;

pub use ergodic::ErgodicState;
pub use inexact::{controlled_inexact_resolvent, perturbed_candidate, InexactnessPolicy, Strategy};
pub(crate) use inexact::MAX_HALVINGS;
pub use run::{run_hpe, run_hpe_with, Certificate, CertificateKind, HpeRun, HpeRunOptions, HpeTraceRow, Membership};
pub use variant::{
    check_lemma5, check_variant_inequality, lemma5_ratios, variant_sigma, variant_theta, DivergentFixture,
    NotVariantFixture,
};

use crate::error::{Error, Result};
use crate::spaces::Vector;
use crate::tolerance::Tolerances;
use crate::Scalar;

/// Stepsize sequence `λ_k`.
#[derive(Clone)]
pub enum StepRule<T> {
    Constant(T),
    /// Arbitrary sequence with a declared lower bound `λ̲ ≤ λ_k`.
    Sequence { rule: Arc<dyn Fn(usize) -> T + Send + Sync>, lower: T },
}

impl<T: fmt::Debug> fmt::Debug for StepRule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(l) => write!(f, "Constant({l:?})"),
            Self::Sequence { lower, .. } => write!(f, "Sequence {{ lower: {lower:?} }}"),
        }
    }
}

/// Relative error tolerance and stepsizes of the HPE method.
#[derive(Debug, Clone)]
pub struct HpeConfig<T> {
    pub sigma: T,
    pub step: StepRule<T>,
    pub tol: Tolerances<T>,
}

impl<T: Scalar> HpeConfig<T> {
    pub fn new(sigma: T, step: StepRule<T>) -> Result<Self> {
        check_sigma(sigma)?;
        let lower = match &step {
            StepRule::Constant(l) => *l,
            StepRule::Sequence { lower, .. } => *lower,
        };
        if !(lower > T::zero()) || !lower.is_finite() {
            return Err(Error::InvalidParameter { name: "lambda", reason: "stepsize lower bound must be positive".into() });
        }
        Ok(Self { sigma, step, tol: Tolerances::default() })
    }

    /// Constant stepsize `λ`.
    pub fn constant(sigma: T, lambda: T) -> Result<Self> {
        Self::new(sigma, StepRule::Constant(lambda))
    }

    pub fn lambda_lower(&self) -> T {
        match &self.step {
            StepRule::Constant(l) => *l,
            StepRule::Sequence { lower, .. } => *lower,
        }
    }

    /// `λ_k`, checked against the declared lower bound.
    pub fn lambda(&self, k: usize) -> Result<T> {
        match &self.step {
            StepRule::Constant(l) => Ok(*l),
            StepRule::Sequence { rule, lower } => {
                let l = rule(k);
                if !(l >= *lower) || !l.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "lambda",
                        reason: format!("stepsize {l} at k = {k} is below the declared lower bound {lower}"),
                    });
                }
                Ok(l)
            }
        }
    }
}

impl<T: Scalar> Default for HpeConfig<T> {
    fn default() -> Self {
        Self { sigma: T::zero(), step: StepRule::Constant(T::one()), tol: Tolerances::default() }
    }
}

pub(crate) fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if !(sigma >= T::zero() && sigma < T::one()) {
        return Err(Error::InvalidParameter { name: "sigma", reason: format!("must lie in [0, 1), got {sigma}") });
    }
    Ok(())
}

/// `(z̃_k, v_k, ε_k)` together with the stepsize `λ_k` it was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateTriple<T> {
    pub x_tilde: Vector<T>,
    pub v: Vector<T>,
    pub eps: T,
    pub lambda: T,
}

/// Both sides of a relative-error inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admission<T> {
    pub lhs: T,
    pub rhs: T,
    pub admitted: bool,
}

impl<T: Scalar> Admission<T> {
    /// Admits when `lhs ≤ rhs + slack · (1 + max(lhs, rhs))`.
    pub fn new(lhs: T, rhs: T, slack: T) -> Self {
        let admitted = lhs <= rhs + slack * (T::one() + lhs.max(rhs));
        Self { lhs, rhs, admitted }
    }

    /// `lhs − rhs`
    pub fn margin(&self) -> T {
        self.lhs - self.rhs
    }

    /// `(lhs − rhs) / max(lhs, rhs)`, zero when both sides vanish.
    pub fn relative_margin(&self) -> T {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale == T::zero() {
            T::zero()
        } else {
            (self.lhs - self.rhs) / scale
        }
    }

    pub(crate) fn into_result(self, block: Option<usize>) -> Result<Self> {
        if self.admitted {
            Ok(self)
        } else {
            Err(Error::Admission { lhs: self.lhs.as_f64(), rhs: self.rhs.as_f64(), block })
        }
    }
}

/// `‖λv + z̃ − z_prev‖² + 2λε ≤ σ²‖z̃ − z_prev‖²`
pub fn check_hpe_inequality<T: Scalar>(z_prev: &Vector<T>, t: &IterateTriple<T>, sigma: T, slack: T) -> Result<Admission<T>> {
    z_prev.check_dim(t.x_tilde.dim())?;
    t.v.check_dim(t.x_tilde.dim())?;
    let delta = &t.x_tilde - z_prev;
    let mut r = delta.clone();
    r.axpy(t.lambda, &t.v);
    let lhs = r.norm_sq() + T::of(2.0) * t.lambda * t.eps;
    let rhs = sigma * sigma * delta.norm_sq();
    Ok(Admission::new(lhs, rhs, slack))
}

/// Extragradient update `z = z_prev − λv` after asserting admission.
pub fn hpe_step<T: Scalar>(cfg: &HpeConfig<T>, z_prev: &Vector<T>, t: &IterateTriple<T>) -> Result<Vector<T>> {
    if !(t.eps >= T::zero()) || !(t.lambda > T::zero()) {
        return Err(Error::InvalidParameter { name: "triple", reason: "requires eps >= 0 and lambda > 0".into() });
    }
    check_hpe_inequality(z_prev, t, cfg.sigma, cfg.tol.admission)?.into_result(None)?;
    let mut z = z_prev.clone();
    z.axpy(-t.lambda, &t.v);
    Ok(z)
}

/// Bounds on `‖v‖` and `ε` after `k` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPair<T> {
    pub v: T,
    pub eps: T,
}

fn check_bound_args<T: Scalar>(k: usize, d0: T, sigma: T, lambda_lower: T) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter { name: "k", reason: "bounds start at k = 1".into() });
    }
    if !(d0 >= T::zero()) || !d0.is_finite() {
        return Err(Error::InvalidParameter { name: "d0", reason: "must be finite and nonnegative".into() });
    }
    check_sigma(sigma)?;
    if !(lambda_lower > T::zero()) {
        return Err(Error::InvalidParameter { name: "lambda_lower", reason: "must be positive".into() });
    }
    Ok(())
}

/// Best-iterate bounds: `‖v‖ ≤ d0/(λ̲√k)·√((1+σ)/(1−σ))` and
/// `ε ≤ σ²d0²/(2(1−σ²)λ̲k)`.
pub fn pointwise_bound<T: Scalar>(k: usize, d0: T, sigma: T, lambda_lower: T) -> Result<BoundPair<T>> {
    check_bound_args(k, d0, sigma, lambda_lower)?;
    let kk = T::of(k as f64);
    let one = T::one();
    let v = d0 / (lambda_lower * kk.sqrt()) * ((one + sigma) / (one - sigma)).sqrt();
    let eps = sigma * sigma * d0 * d0 / (T::of(2.0) * (one - sigma * sigma) * lambda_lower * kk);
    Ok(BoundPair { v, eps })
}

/// Averaged-iterate bounds: `‖v^a‖ ≤ 2d0/(λ̲k)` and
/// `ε^a ≤ 2(1 + σ/√(1−σ²))d0²/(λ̲k)`.
pub fn ergodic_bound<T: Scalar>(k: usize, d0: T, sigma: T, lambda_lower: T) -> Result<BoundPair<T>> {
    check_bound_args(k, d0, sigma, lambda_lower)?;
    let kk = T::of(k as f64);
    let one = T::one();
    let two = T::of(2.0);
    let v = two * d0 / (lambda_lower * kk);
    let eps = two * (one + sigma / (one - sigma * sigma).sqrt()) * d0 * d0 / (lambda_lower * kk);
    Ok(BoundPair { v, eps })
}
