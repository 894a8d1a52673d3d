use crate::error::{Error, Result};
use crate::hpe::{check_sigma, Admission, IterateTriple};
use crate::operators::{AffineOp, MonotoneOp};
use crate::spaces::Vector;
use crate::Scalar;

fn threshold<T: Scalar>() -> T {
    T::one() / T::of(5.0).sqrt()
}

fn check_sigma_hat<T: Scalar>(sigma_hat: T) -> Result<()> {
    if !(sigma_hat >= T::zero() && sigma_hat < threshold()) {
        return Err(Error::InvalidParameter {
            name: "sigma_hat",
            reason: format!("must lie in [0, 1/sqrt(5)) = [0, {:.6}), got {sigma_hat}", threshold::<T>().as_f64()),
        });
    }
    Ok(())
}

/// `θ = √(1 − (1 − σ̂²)²)`
pub fn variant_theta<T: Scalar>(sigma_hat: T) -> Result<T> {
    if !(sigma_hat >= T::zero() && sigma_hat < T::one()) {
        return Err(Error::InvalidParameter { name: "sigma_hat", reason: format!("must lie in [0, 1), got {sigma_hat}") });
    }
    let a = T::one() - sigma_hat * sigma_hat;
    Ok((T::one() - a * a).max(T::zero()).sqrt())
}

/// Relative error tolerance under which every variant-admitted triple is
/// HPE-admitted: `σ = σ̂√(1 + ((1+θ)/(1−σ̂²))²)`. Requires `σ̂ < 1/√5`.
pub fn variant_sigma<T: Scalar>(sigma_hat: T) -> Result<T> {
    check_sigma_hat(sigma_hat)?;
    let theta = variant_theta(sigma_hat)?;
    let r = (T::one() + theta) / (T::one() - sigma_hat * sigma_hat);
    let sigma = sigma_hat * (T::one() + r * r).sqrt();
    check_sigma(sigma)?;
    Ok(sigma)
}

/// `‖λv + z̃ − z_prev‖² + 2λε ≤ σ̂²(‖z̃ − z_prev‖² + ‖λv‖²)`
pub fn check_variant_inequality<T: Scalar>(
    z_prev: &Vector<T>,
    t: &IterateTriple<T>,
    sigma_hat: T,
    slack: T,
) -> Result<Admission<T>> {
    z_prev.check_dim(t.x_tilde.dim())?;
    t.v.check_dim(t.x_tilde.dim())?;
    let delta = &t.x_tilde - z_prev;
    let lv = t.v.scaled(t.lambda);
    let lhs = (&lv + &delta).norm_sq() + T::of(2.0) * t.lambda * t.eps;
    let rhs = sigma_hat * sigma_hat * (delta.norm_sq() + lv.norm_sq());
    Ok(Admission::new(lhs, rhs, slack))
}

/// `((1−θ)/(1−σ̂²), (1+θ)/(1−σ̂²))`: the sandwich on `‖λv‖ / ‖z̃ − z_prev‖`.
pub fn lemma5_ratios<T: Scalar>(sigma_hat: T) -> Result<(T, T)> {
    let theta = variant_theta(sigma_hat)?;
    let d = T::one() - sigma_hat * sigma_hat;
    Ok(((T::one() - theta) / d, (T::one() + theta) / d))
}

/// Whether `‖λv‖` lies within the sandwich around `‖z̃ − z_prev‖`, up to
/// `tol` on either side.
pub fn check_lemma5<T: Scalar>(z_prev: &Vector<T>, t: &IterateTriple<T>, sigma_hat: T, tol: T) -> Result<bool> {
    z_prev.check_dim(t.x_tilde.dim())?;
    let (lo, hi) = lemma5_ratios(sigma_hat)?;
    let d = t.x_tilde.dist(z_prev);
    let lv = t.v.norm() * t.lambda;
    Ok(lo * d <= lv + tol && lv <= hi * d + tol)
}

/// Triples admitted by the HPE method with equality that no `σ̂ < 1/√5`
/// admits: on `T = I`, `z̃ = (1−σ²)z_prev`, `v = z_prev`,
/// `ε = σ⁴‖z_prev‖²/2`, `λ = σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotVariantFixture<T> {
    pub sigma: T,
}

impl<T: Scalar> NotVariantFixture<T> {
    pub fn new(sigma: T) -> Result<Self> {
        let lo = T::of(0.4).sqrt();
        if !(sigma > lo && sigma < T::one()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must lie in (sqrt(2/5), 1) = ({:.6}, 1), got {sigma}", lo.as_f64()),
            });
        }
        Ok(Self { sigma })
    }

    pub fn lambda(&self) -> T {
        self.sigma * self.sigma
    }

    pub fn op(&self, n: usize) -> Result<MonotoneOp<T>> {
        Ok(AffineOp::scalar_identity(n, T::one())?.into())
    }

    pub fn triple(&self, z_prev: &Vector<T>) -> IterateTriple<T> {
        let s2 = self.lambda();
        IterateTriple {
            x_tilde: z_prev.scaled(T::one() - s2),
            v: z_prev.clone(),
            eps: s2 * s2 * z_prev.norm_sq() / T::of(2.0),
            lambda: s2,
        }
    }

    /// `(z_{k−1}, triple_k)` for `k = 1..=steps`.
    pub fn trajectory(&self, z0: &Vector<T>, steps: usize) -> Vec<(Vector<T>, IterateTriple<T>)> {
        trajectory(z0, steps, |z| self.triple(z))
    }
}

/// A divergent run of the variant method for `σ̂ > 1/√5`: on `T = αI`,
/// `z̃ = γ/(α+γ)·z_prev`, `v = αz̃`, `ε = 0`, `λ = 1`, so that
/// `z_k = (1 − αγ/(α+γ))^k z_0` with `αγ/(α+γ) > 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergentFixture<T> {
    pub sigma_hat: T,
    pub theta: T,
    /// `(1+θ)/(1−σ̂²)`
    pub gamma: T,
    /// `2γ/(γ−2) + 1`
    pub alpha: T,
    /// `αγ/(α+γ)`
    pub ratio: T,
}

impl<T: Scalar> DivergentFixture<T> {
    pub fn new(sigma_hat: T) -> Result<Self> {
        if !(sigma_hat > threshold() && sigma_hat < T::one()) {
            return Err(Error::InvalidParameter {
                name: "sigma_hat",
                reason: format!(
                    "the construction needs sigma_hat in (1/sqrt(5), 1) = ({:.6}, 1), got {sigma_hat}",
                    threshold::<T>().as_f64()
                ),
            });
        }
        let theta = variant_theta(sigma_hat)?;
        let gamma = (T::one() + theta) / (T::one() - sigma_hat * sigma_hat);
        let two = T::of(2.0);
        if !(gamma > two) {
            return Err(Error::Invariant(format!("gamma = {gamma} does not exceed 2")));
        }
        let alpha = two * gamma / (gamma - two) + T::one();
        let ratio = alpha * gamma / (alpha + gamma);
        Ok(Self { sigma_hat, theta, gamma, alpha, ratio })
    }

    /// Growth factor `|1 − ratio|` of `|z_k|`.
    pub fn growth(&self) -> T {
        (T::one() - self.ratio).abs()
    }

    pub fn op(&self, n: usize) -> Result<MonotoneOp<T>> {
        Ok(AffineOp::scalar_identity(n, self.alpha)?.into())
    }

    pub fn triple(&self, z_prev: &Vector<T>) -> IterateTriple<T> {
        let x = z_prev.scaled(self.gamma / (self.alpha + self.gamma));
        let v = x.scaled(self.alpha);
        IterateTriple { x_tilde: x, v, eps: T::zero(), lambda: T::one() }
    }

    pub fn trajectory(&self, z0: &Vector<T>, steps: usize) -> Vec<(Vector<T>, IterateTriple<T>)> {
        trajectory(z0, steps, |z| self.triple(z))
    }
}

fn trajectory<T: Scalar>(
    z0: &Vector<T>,
    steps: usize,
    triple: impl Fn(&Vector<T>) -> IterateTriple<T>,
) -> Vec<(Vector<T>, IterateTriple<T>)> {
    let mut out = Vec::with_capacity(steps);
    let mut z = z0.clone();
    for _ in 0..steps {
        let t = triple(&z);
        let mut next = z.clone();
        next.axpy(-t.lambda, &t.v);
        out.push((std::mem::replace(&mut z, next), t));
    }
    out
}
