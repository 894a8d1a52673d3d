//! Parallel forward-backward splitting for `min Σ (f_i + φ_i)(x)` with
//! quadratic `f_i` and prox-friendly `φ_i`, its ε-subdifferential
//! bookkeeping and its reduction to the operator splitting method.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hpe::{CertificateKind, ErgodicState, Membership};
use crate::operators::{MonotoneOp, Quadratic, SubdiffOp};
use crate::spaces::Vector;
use crate::splitting::{split_residuals, SplitResiduals, SplitState, SumBoundSet, SumBounds, SumProblem};
use crate::tolerance::Tolerances;
use crate::Scalar;

/// Default relative error parameter; `λ = σ²/L_Σ`.
pub const DEFAULT_SIGMA: f64 = 0.9;

const LIPSCHITZ_SAMPLES: usize = 16;

/// One summand `f_i + φ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeTerm<T> {
    pub f: Quadratic<T>,
    pub phi: SubdiffOp<T>,
}

impl<T: Scalar> CompositeTerm<T> {
    pub fn new(f: Quadratic<T>, phi: SubdiffOp<T>) -> Result<Self> {
        if phi.dim() != f.linear().dim() {
            return Err(Error::DimensionMismatch { expected: f.linear().dim(), found: phi.dim() });
        }
        Ok(Self { f, phi })
    }

    pub fn value(&self, x: &Vector<T>) -> T {
        self.f.value(x) + self.phi.value(x)
    }
}

/// Known minimizer with its objective value and an optional dual lift
/// `g_i ∈ ∇f_i(x*) + ∂φ_i(x*)`, `Σg_i = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptimum<T> {
    pub x: Vector<T>,
    pub value: T,
    pub dual: Option<Vec<Vector<T>>>,
}

#[derive(Debug, Clone)]
pub struct CompositeProblem<T> {
    terms: Vec<CompositeTerm<T>>,
    lipschitz: Vec<T>,
    reference: Option<ReferenceOptimum<T>>,
}

impl<T: Scalar> CompositeProblem<T> {
    /// Gradient Lipschitz constants are the largest Hessian eigenvalues.
    pub fn new(terms: Vec<CompositeTerm<T>>) -> Result<Self> {
        let lipschitz = terms.iter().map(|t| t.f.lipschitz()).collect();
        Self::with_lipschitz(terms, lipschitz)
    }

    /// Uses the supplied `L_i` after spot-checking
    /// `‖∇f_i(x) − ∇f_i(y)‖ ≤ L_i‖x − y‖` on random pairs.
    pub fn with_lipschitz(terms: Vec<CompositeTerm<T>>, lipschitz: Vec<T>) -> Result<Self> {
        if terms.len() < 2 {
            return Err(Error::InvalidParameter { name: "terms", reason: format!("need m >= 2 terms, got {}", terms.len()) });
        }
        if lipschitz.len() != terms.len() {
            return Err(Error::DimensionMismatch { expected: terms.len(), found: lipschitz.len() });
        }
        let n = terms[0].phi.dim();
        if let Some(t) = terms.iter().find(|t| t.phi.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: t.phi.dim() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for (i, (t, &l)) in terms.iter().zip(&lipschitz).enumerate() {
            if !(l > T::zero()) || !l.is_finite() {
                return Err(Error::InvalidParameter { name: "lipschitz", reason: format!("L_{i} must be positive and finite") });
            }
            for _ in 0..LIPSCHITZ_SAMPLES {
                let x = Vector::random(n, &mut rng);
                let y = Vector::random(n, &mut rng);
                let lhs = t.f.gradient(&x).dist(&t.f.gradient(&y));
                let rhs = l * x.dist(&y);
                if lhs > rhs * (T::one() + T::of(1e-8)) + T::of(1e-8) {
                    return Err(Error::InvalidParameter {
                        name: "lipschitz",
                        reason: format!("L_{i} = {l:e} is below an observed gradient ratio"),
                    });
                }
            }
        }
        Ok(Self { terms, lipschitz, reference: None })
    }

    /// Attaches a known optimum. The dual lift, when given, is checked for
    /// `Σg_i = 0` and `g_i − ∇f_i(x*) ∈ ∂φ_i(x*)`.
    pub fn with_reference(mut self, reference: ReferenceOptimum<T>) -> Result<Self> {
        reference.x.check_dim(self.n())?;
        if let Some(g) = &reference.dual {
            if g.len() != self.m() {
                return Err(Error::DimensionMismatch { expected: self.m(), found: g.len() });
            }
            let tol = Tolerances::<T>::default();
            let scale = T::one() + reference.x.norm() + g.iter().map(Vector::norm).fold(T::zero(), T::max);
            let s = Vector::sum(g).norm();
            if s > tol.membership * scale {
                return Err(Error::Invariant(format!("dual lift does not sum to zero: |sum g| = {s:e}")));
            }
            for (i, (t, gi)) in self.terms.iter().zip(g).enumerate() {
                let gap = t.phi.fenchel_young_gap(&reference.x, &(gi - &t.f.gradient(&reference.x)));
                if !(gap <= tol.membership * scale * scale) {
                    return Err(Error::Invariant(format!("dual lift fails block {i}: gap {gap:e}")));
                }
            }
        }
        self.reference = Some(reference);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.terms.len()
    }

    pub fn n(&self) -> usize {
        self.terms[0].phi.dim()
    }

    pub fn terms(&self) -> &[CompositeTerm<T>] {
        &self.terms
    }

    pub fn lipschitz(&self) -> &[T] {
        &self.lipschitz
    }

    /// `L_Σ = max L_i`
    pub fn l_sigma(&self) -> T {
        self.lipschitz.iter().copied().fold(T::zero(), T::max)
    }

    pub fn reference(&self) -> Option<&ReferenceOptimum<T>> {
        self.reference.as_ref()
    }

    /// `Σ (f_i + φ_i)(x)`, possibly `+∞`.
    pub fn objective(&self, x: &Vector<T>) -> T {
        self.terms.iter().fold(T::zero(), |a, t| a + t.value(x))
    }

    /// `λ = σ²/L_Σ` for `σ ∈ (0, 1)`.
    pub fn stepsize(&self, sigma: T) -> Result<T> {
        check_fb_sigma(sigma)?;
        Ok(sigma * sigma / self.l_sigma())
    }

    /// Solution of the scaled splitting problem: blocks `x* + λg_i`.
    pub fn lifted_solution(&self, lambda: T) -> Option<Vector<T>> {
        let r = self.reference.as_ref()?;
        let g = r.dual.as_ref()?;
        let blocks: Vec<Vector<T>> = g.iter().map(|gi| &r.x + &gi.scaled(lambda)).collect();
        Some(crate::splitting::flatten(&blocks))
    }

    /// Distance of `(x₀ + y_{i,0})_i` to the known scaled lifted solution.
    pub fn d0(&self, state: &FbState<T>) -> Option<T> {
        self.lifted_solution(state.lambda).map(|s| state.lift().dist(&s))
    }

    /// Splitting problem with `T_i = ∇(λf_i) + ∂(λφ_i)`, carrying the
    /// scaled dual lift when one is known.
    pub fn scaled_sum_problem(&self, lambda: T) -> Result<SumProblem<T>> {
        let ops = self
            .terms
            .iter()
            .map(|t| {
                MonotoneOp::sum(vec![
                    SubdiffOp::quadratic(t.f.scaled(lambda)).into(),
                    t.phi.scaled(lambda).into(),
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        let p = SumProblem::new(ops)?;
        match self.reference.as_ref().and_then(|r| r.dual.as_ref().map(|g| (r, g))) {
            Some((r, g)) => Ok(p.with_verified_solution(r.x.clone(), g.iter().map(|gi| gi.scaled(lambda)).collect())),
            None => Ok(p),
        }
    }
}

fn check_fb_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if !(sigma > T::zero() && sigma < T::one()) {
        return Err(Error::InvalidParameter { name: "sigma", reason: format!("must lie in (0, 1), got {sigma:?}") });
    }
    Ok(())
}

/// `(x, y₁, …, y_m)` with `Σy_i = 0` and the fixed stepsize `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbState<T> {
    pub x: Vector<T>,
    pub y: Vec<Vector<T>>,
    pub lambda: T,
}

impl<T: Scalar> FbState<T> {
    pub fn new(x: Vector<T>, y: Vec<Vector<T>>, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidParameter { name: "lambda", reason: "must be positive and finite".into() });
        }
        let split = SplitState::new(x, y)?;
        Ok(Self { x: split.x, y: split.y, lambda })
    }

    /// `y_i = 0`, `λ = σ²/L_Σ`.
    pub fn start(problem: &CompositeProblem<T>, x: Vector<T>, sigma: T) -> Result<Self> {
        x.check_dim(problem.n())?;
        let lambda = problem.stepsize(sigma)?;
        Ok(Self { y: vec![Vector::zeros(x.dim()); problem.m()], x, lambda })
    }

    /// `x = x*`, `y_i = λg_i` from the reference dual lift.
    pub fn at_dual_lift(problem: &CompositeProblem<T>, sigma: T) -> Result<Self> {
        let r = problem.reference().ok_or_else(|| Error::Unsupported("no reference optimum attached".into()))?;
        let g = r.dual.as_ref().ok_or_else(|| Error::Unsupported("reference has no dual lift".into()))?;
        let lambda = problem.stepsize(sigma)?;
        Self::new(r.x.clone(), g.iter().map(|gi| gi.scaled(lambda)).collect(), lambda)
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    /// `‖Σy_i‖`
    pub fn y_drift(&self) -> T {
        Vector::sum(&self.y).norm()
    }

    /// `(x + y₁, …, x + y_m)` flattened.
    pub fn lift(&self) -> Vector<T> {
        let blocks: Vec<Vector<T>> = self.y.iter().map(|y| &self.x + y).collect();
        crate::splitting::flatten(&blocks)
    }

    pub fn as_split(&self) -> SplitState<T> {
        SplitState { x: self.x.clone(), y: self.y.clone() }
    }
}

/// Per-block outcome of one step: `x̃_i`, `u_i = x + y_i − x̃_i`,
/// `ε_i = λ(f_i(x̃_i) − f_i(x) − ⟨∇f_i(x), x̃_i − x⟩)` and `∇f_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbRecord<T> {
    pub x_tilde: Vector<T>,
    pub u: Vector<T>,
    pub eps: T,
    pub grad: Vector<T>,
}

impl<T: Scalar> FbRecord<T> {
    /// `u′ = u/λ`
    pub fn u_prime(&self, lambda: T) -> Vector<T> {
        self.u.scaled(T::one() / lambda)
    }

    /// `ε′ = ε/λ`
    pub fn eps_prime(&self, lambda: T) -> T {
        self.eps / lambda
    }
}

/// Linearization gap of a quadratic, `½ dᵀQd` with `d = x̃ − x`.
fn quadratic_gap<T: Scalar>(f: &Quadratic<T>, x: &Vector<T>, x_tilde: &Vector<T>) -> T {
    let d = x_tilde - x;
    T::of(0.5) * d.dot(&Vector::raw(f.hessian().mul_vec(d.as_slice())))
}

/// One iteration. Blocks run on the rayon pool when `parallel` is set.
/// Fails with [`Error::LipschitzUnderstated`] when some `ε_i` exceeds
/// `(σ²/2)‖x̃_i − x‖²` beyond the Lipschitz slack.
pub fn fb_step<T: Scalar>(
    problem: &CompositeProblem<T>,
    state: &FbState<T>,
    sigma: T,
    tol: &Tolerances<T>,
    parallel: bool,
) -> Result<(FbState<T>, Vec<FbRecord<T>>)> {
    check_fb_sigma(sigma)?;
    if state.m() != problem.m() {
        return Err(Error::DimensionMismatch { expected: problem.m(), found: state.m() });
    }
    state.x.check_dim(problem.n())?;
    let lambda = state.lambda;
    let block = |i: usize| -> Result<FbRecord<T>> {
        let t = &problem.terms[i];
        let grad = t.f.gradient(&state.x);
        let w = &state.x + &state.y[i];
        let mut z = w.clone();
        z.axpy(-lambda, &grad);
        let x_tilde = t.phi.prox(lambda, &z)?;
        if !x_tilde.is_finite() {
            return Err(Error::NonFinite { context: "forward-backward block" });
        }
        let eps = lambda * quadratic_gap(&t.f, &state.x, &x_tilde);
        let bound = sigma * sigma / T::of(2.0) * x_tilde.dist(&state.x).powi(2);
        if eps > bound + tol.lipschitz * (T::one() + bound) {
            return Err(Error::LipschitzUnderstated { block: i, eps: eps.as_f64(), bound: bound.as_f64() });
        }
        let u = &w - &x_tilde;
        Ok(FbRecord { x_tilde, u, eps: eps.max(T::zero()), grad })
    };
    let records: Vec<FbRecord<T>> = if parallel {
        (0..problem.m()).into_par_iter().map(block).collect::<Result<_>>()?
    } else {
        (0..problem.m()).map(block).collect::<Result<_>>()?
    };
    let xs: Vec<Vector<T>> = records.iter().map(|r| r.x_tilde.clone()).collect();
    let x = Vector::mean(&xs);
    let y = state.y.iter().zip(&records).map(|(y, r)| &(y + &x) - &r.x_tilde).collect();
    Ok((FbState { x, y, lambda }, records))
}

/// Per-block ergodic accumulators over `(x̃_ℓ, ·)` with unit weights:
/// `combined` averages `(u′, ε′)`, `smooth` averages `(∇f_i(x_{ℓ−1}), ε′)`
/// and `nonsmooth` averages `(u′ − ∇f_i(x_{ℓ−1}), 0)`. Their aggregated
/// epsilons are `ε′^a`, `ε″^a` and `ε′^a − ε″^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbBlockAudit<T> {
    pub combined: ErgodicState<T>,
    pub smooth: ErgodicState<T>,
    pub nonsmooth: ErgodicState<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbAudit<T> {
    pub lambda: T,
    pub blocks: Vec<FbBlockAudit<T>>,
    /// `u′_{i,k}` of the latest step.
    pub u_prime: Vec<Vector<T>>,
    /// `ε′_{i,k}` of the latest step.
    pub eps_prime: Vec<T>,
}

/// Ergodic point of every block with the split of `ε′^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbErgodic<T> {
    pub x: Vec<Vector<T>>,
    pub u: Vec<Vector<T>>,
    /// `(1/k) Σ ∇f_i(x_{ℓ−1})`
    pub grad_mean: Vec<Vector<T>>,
    /// `ε′^a`
    pub eps: Vec<T>,
    /// `ε″^a`, the part charged to `f_i`.
    pub eps_f: Vec<T>,
    /// `ε′^a − ε″^a`, the part charged to `φ_i`.
    pub eps_phi: Vec<T>,
    /// Some split part was a round-off negative and was set to zero.
    pub clamped: bool,
}

impl<T: Scalar> FbAudit<T> {
    pub fn new(m: usize, n: usize, lambda: T) -> Self {
        let e = || ErgodicState::new(n);
        Self {
            lambda,
            blocks: (0..m).map(|_| FbBlockAudit { combined: e(), smooth: e(), nonsmooth: e() }).collect(),
            u_prime: vec![Vector::zeros(n); m],
            eps_prime: vec![T::zero(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.combined.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Raw `(ε′^a, ε″^a, ε′^a − ε″^a)` of block `i`, before clamping.
    pub fn raw_eps(&self, i: usize) -> Result<(T, T, T)> {
        let b = &self.blocks[i];
        Ok((b.combined.raw_eps()?, b.smooth.raw_eps()?, b.nonsmooth.raw_eps()?))
    }

    /// Ergodic blocks. Negatives of the split parts within `clamp` (relative
    /// to the iterate scale) are set to zero and flagged; larger ones fail.
    pub fn query(&self, clamp: T) -> Result<FbErgodic<T>> {
        let mut out = FbErgodic {
            x: Vec::new(),
            u: Vec::new(),
            grad_mean: Vec::new(),
            eps: Vec::new(),
            eps_f: Vec::new(),
            eps_phi: Vec::new(),
            clamped: false,
        };
        for (i, b) in self.blocks.iter().enumerate() {
            let c = b.combined.query(clamp)?;
            let scale = T::one() + c.x.norm() * (c.v.norm() + b.smooth.mean_v().norm());
            let mut split = |raw: T| -> Result<T> {
                if raw >= T::zero() {
                    Ok(raw)
                } else if raw >= -clamp * scale {
                    out.clamped = true;
                    Ok(T::zero())
                } else {
                    Err(Error::Invariant(format!("block {i}: ergodic epsilon split is negative ({raw:e})")))
                }
            };
            let ef = split(b.smooth.raw_eps()?)?;
            let ep = split(b.nonsmooth.raw_eps()?)?;
            out.eps_f.push(ef);
            out.eps_phi.push(ep);
            out.grad_mean.push(b.smooth.mean_v().clone());
            out.x.push(c.x);
            out.u.push(c.v);
            out.eps.push(c.eps);
        }
        Ok(out)
    }
}

/// Folds the records of one step into the audit.
pub fn fb_audit_update<T: Scalar>(audit: &mut FbAudit<T>, records: &[FbRecord<T>]) -> Result<()> {
    if records.len() != audit.blocks.len() {
        return Err(Error::DimensionMismatch { expected: audit.blocks.len(), found: records.len() });
    }
    let lambda = audit.lambda;
    for (i, (b, r)) in audit.blocks.iter_mut().zip(records).enumerate() {
        let up = r.u_prime(lambda);
        let ep = r.eps_prime(lambda);
        b.combined.update(T::one(), &r.x_tilde, &up, ep)?;
        b.smooth.update(T::one(), &r.x_tilde, &r.grad, ep)?;
        b.nonsmooth.update(T::one(), &r.x_tilde, &(&up - &r.grad), T::zero())?;
        audit.u_prime[i] = up;
        audit.eps_prime[i] = ep;
    }
    Ok(())
}

/// Bounds on `‖Σu′‖`, the pairwise spread and `Σε′`: the splitting bounds
/// for the scaled operators with the `u` and `ε` families divided by
/// `λ = σ²/L_Σ`. Accepts `m = 1`.
pub fn fb_bounds<T: Scalar>(k: usize, d0: T, sigma: T, m: usize, l_sigma: T) -> Result<SumBounds<T>> {
    check_fb_sigma(sigma)?;
    if m == 0 {
        return Err(Error::InvalidParameter { name: "m", reason: "need at least one block".into() });
    }
    if !(l_sigma > T::zero()) {
        return Err(Error::InvalidParameter { name: "l_sigma", reason: "must be positive".into() });
    }
    let (pb, eb) = crate::partial_inverse::spin_bounds(k, d0, sigma)?;
    let inv = l_sigma / (sigma * sigma);
    let sm = T::of(m as f64).sqrt();
    let two = T::of(2.0);
    Ok(SumBounds {
        pointwise: SumBoundSet { sum_u: sm * pb.v * inv, pair: two * pb.v, eps: pb.eps * inv },
        ergodic: SumBoundSet { sum_u: sm * eb.v * inv, pair: two * eb.v, eps: eb.eps * inv },
    })
}

/// Outcome of checking a forward-backward history against the splitting
/// method on `T_i = ∇(λf_i) + ∂(λφ_i)`. All fields are worst cases over
/// steps and blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedReport<T> {
    pub steps: usize,
    /// Mismatch in `u_i = x + y_i − x̃_i`, `x⁺ = mean x̃` and `y⁺_i = u_i − mean u`.
    pub state_error: T,
    /// `2ε_i − σ²‖x̃_i − x‖²` (≤ 0 when admitted).
    pub admission_margin: T,
    /// Excess of the gap for `λ∇f_i(x) ∈ ∂_ε(λf_i)(x̃_i)` over `ε_i`.
    pub smooth_excess: T,
    /// Gap for `u_i − λ∇f_i(x) ∈ ∂(λφ_i)(x̃_i)`.
    pub nonsmooth_gap: T,
}

impl<T: Scalar> EmbedReport<T> {
    pub fn passes(&self, tol: T) -> bool {
        self.state_error <= tol && self.admission_margin <= tol && self.smooth_excess <= tol && self.nonsmooth_gap <= tol
    }
}

/// Checks every step of `history` (pairs of pre-step state and records,
/// followed by `last`) against the splitting method's update rules and
/// the two subdifferential inclusions.
pub fn embed_to_sum<T: Scalar>(
    problem: &CompositeProblem<T>,
    history: &[(FbState<T>, Vec<FbRecord<T>>)],
    last: &FbState<T>,
    sigma: T,
) -> Result<EmbedReport<T>> {
    let mut rep = EmbedReport {
        steps: history.len(),
        state_error: T::zero(),
        admission_margin: T::neg_infinity(),
        smooth_excess: T::zero(),
        nonsmooth_gap: T::zero(),
    };
    for (k, (prev, recs)) in history.iter().enumerate() {
        let next = history.get(k + 1).map_or(last, |h| &h.0);
        let lambda = prev.lambda;
        if recs.len() != problem.m() {
            return Err(Error::DimensionMismatch { expected: problem.m(), found: recs.len() });
        }
        let us: Vec<Vector<T>> = recs.iter().map(|r| r.u.clone()).collect();
        let xs: Vec<Vector<T>> = recs.iter().map(|r| r.x_tilde.clone()).collect();
        let mu = Vector::mean(&us);
        let scale = T::one() + prev.x.norm() + next.x.norm();
        let mut err = next.x.dist(&Vector::mean(&xs)) / scale;
        for (i, (t, r)) in problem.terms.iter().zip(recs).enumerate() {
            let u = &(&prev.x + &prev.y[i]) - &r.x_tilde;
            err = err.max(u.dist(&r.u) / scale);
            err = err.max(next.y[i].dist(&(&r.u - &mu)) / scale);
            rep.admission_margin =
                rep.admission_margin.max(T::of(2.0) * r.eps - sigma * sigma * r.x_tilde.dist(&prev.x).powi(2));
            let lf = t.f.scaled(lambda);
            let g = lf.gradient(&prev.x);
            let fy = lf.fenchel_young_gap(&r.x_tilde, &g);
            let fscale = T::one() + lf.value(&r.x_tilde).abs() + (g.dot(&r.x_tilde)).abs();
            rep.smooth_excess = rep.smooth_excess.max((fy - r.eps) / fscale);
            let s = &r.u - &g;
            let gap = t.phi.scaled(lambda).fenchel_young_gap(&r.x_tilde, &s);
            rep.nonsmooth_gap = rep.nonsmooth_gap.max(gap / (T::one() + s.norm() * r.x_tilde.norm()));
        }
        rep.state_error = rep.state_error.max(err);
    }
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct FbOptions<T> {
    pub sigma: T,
    pub rho: T,
    pub delta: T,
    pub eps_tol: T,
    pub k_max: usize,
    pub run_to_k_max: bool,
    pub keep_history: bool,
    pub parallel: bool,
    pub tol: Tolerances<T>,
}

impl<T: Scalar> FbOptions<T> {
    /// `σ` defaults to [`DEFAULT_SIGMA`].
    pub fn new(rho: T, delta: T, eps_tol: T, k_max: usize) -> Result<Self> {
        if !(rho > T::zero()) || !(delta > T::zero()) || !(eps_tol > T::zero()) {
            return Err(Error::InvalidParameter { name: "tolerances", reason: "rho, delta and eps_tol must be positive".into() });
        }
        Ok(Self {
            sigma: T::of(DEFAULT_SIGMA),
            rho,
            delta,
            eps_tol,
            k_max,
            run_to_k_max: false,
            keep_history: false,
            parallel: false,
            tol: Tolerances::default(),
        })
    }

    pub fn with_sigma(mut self, sigma: T) -> Result<Self> {
        check_fb_sigma(sigma)?;
        self.sigma = sigma;
        Ok(self)
    }

    pub fn audit(mut self) -> Self {
        self.run_to_k_max = true;
        self
    }

    pub fn with_history(mut self) -> Self {
        self.keep_history = true;
        self
    }

    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    fn score(&self, r: &SplitResiduals<T>) -> T {
        (r.sum_u_norm / self.rho).max(r.max_pair_dist / self.delta).max(r.eps_total / self.eps_tol)
    }

    fn meets(&self, r: &SplitResiduals<T>) -> bool {
        r.sum_u_norm <= self.rho && r.max_pair_dist <= self.delta && r.eps_total <= self.eps_tol
    }
}

/// Points `x_i`, subgradients `u′_i` and epsilons meeting `(ρ, δ, ε_tol)`.
/// Ergodic certificates split `ε′_i` into `ε_f` (charged to `f_i`) and
/// `ε_φ` (charged to `φ_i`); pointwise ones charge everything to `f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbCertificate<T> {
    pub x: Vec<Vector<T>>,
    pub u: Vec<Vector<T>>,
    pub eps: Vec<T>,
    pub eps_f: Vec<T>,
    pub eps_phi: Vec<T>,
    pub k: usize,
    pub index: usize,
    pub kind: CertificateKind,
    pub residuals: SplitResiduals<T>,
    pub membership: Vec<Membership>,
    pub clamped: bool,
}

impl<T: Scalar> FbCertificate<T> {
    pub fn x_mean(&self) -> Vector<T> {
        Vector::mean(&self.x)
    }
}

/// `u − g ∈ ∂_{ε_φ}φ(x)` and `g ∈ ∂_{ε_f}f(x)` via Fenchel-Young gaps.
pub fn split_membership<T: Scalar>(
    term: &CompositeTerm<T>,
    x: &Vector<T>,
    u: &Vector<T>,
    g: &Vector<T>,
    eps_f: T,
    eps_phi: T,
    tol: T,
) -> Membership {
    let scale = T::one() + x.norm() * (u.norm() + g.norm());
    let gf = term.f.fenchel_young_gap(x, g);
    let gp = term.phi.fenchel_young_gap(x, &(u - g));
    if gf <= eps_f + tol * scale && gp <= eps_phi + tol * scale {
        Membership::Verified
    } else {
        Membership::Refuted
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbTraceRow<T> {
    pub k: usize,
    /// `‖Σu′‖`, pair spread of `x̃` and `Σε′` at step `k`.
    pub residuals: SplitResiduals<T>,
    pub best_index: usize,
    /// `argmin_{j≤k} Σ_i ‖x̃_{i,j} − x_{j−1}‖²`
    pub audit_index: usize,
    pub audit: SplitResiduals<T>,
    pub ergodic: SplitResiduals<T>,
    /// `Σ ε″^a_i`
    pub ergodic_eps_f: T,
    /// `Σ (ε′^a_i − ε″^a_i)`
    pub ergodic_eps_phi: T,
    pub eps_split_clamped: bool,
    /// `Σ (f_i + φ_i)(x_k)`
    pub objective: T,
    pub objective_gap: Option<T>,
    pub y_drift: T,
    pub dist_solution: Option<T>,
    pub bounds: Option<SumBounds<T>>,
}

#[derive(Debug, Clone)]
pub struct FbRun<T> {
    pub certificate: Option<FbCertificate<T>>,
    pub trace: Vec<FbTraceRow<T>>,
    pub state: FbState<T>,
    pub d0: Option<T>,
    pub audit: FbAudit<T>,
    pub history: Vec<(FbState<T>, Vec<FbRecord<T>>)>,
}

fn records_residuals<T: Scalar>(recs: &[FbRecord<T>], lambda: T) -> SplitResiduals<T> {
    let xs: Vec<Vector<T>> = recs.iter().map(|r| r.x_tilde.clone()).collect();
    let us: Vec<Vector<T>> = recs.iter().map(|r| r.u_prime(lambda)).collect();
    let es: Vec<T> = recs.iter().map(|r| r.eps_prime(lambda)).collect();
    split_residuals(&xs, &us, &es)
}

/// Runs the method from `start` until a pointwise or ergodic certificate
/// meets the tolerances or `k_max` steps have been taken.
pub fn run_fb<T: Scalar>(problem: &CompositeProblem<T>, start: &FbState<T>, opts: &FbOptions<T>) -> Result<FbRun<T>> {
    let m = problem.m();
    if start.m() != m {
        return Err(Error::DimensionMismatch { expected: m, found: start.m() });
    }
    start.as_split().check_invariant(&opts.tol)?;
    let lambda = start.lambda;
    let d0 = problem.d0(start);
    let lifted = problem.lifted_solution(lambda);
    let reference = problem.reference().map(|r| r.value);

    let mut state = start.clone();
    let mut audit = FbAudit::new(m, problem.n(), lambda);
    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut certificate = None;
    let mut best: Option<(usize, T, Vec<FbRecord<T>>, SplitResiduals<T>)> = None;
    let mut audit_best: Option<(usize, T, SplitResiduals<T>)> = None;

    for k in 1..=opts.k_max {
        let (next, recs) = fb_step(problem, &state, opts.sigma, &opts.tol, opts.parallel)?;
        fb_audit_update(&mut audit, &recs)?;
        let res = records_residuals(&recs, lambda);
        let spread = recs.iter().fold(T::zero(), |a, r| a + r.x_tilde.dist(&state.x).powi(2));
        if audit_best.as_ref().map_or(true, |a| spread < a.1) {
            audit_best = Some((k, spread, res));
        }
        let score = opts.score(&res);
        if best.as_ref().map_or(true, |b| score < b.1) {
            best = Some((k, score, recs.clone(), res));
        }
        let erg = audit.query(opts.tol.eps_clamp)?;
        let erg_res = split_residuals(&erg.x, &erg.u, &erg.eps);
        let bounds = match d0 {
            Some(d) => Some(fb_bounds(k, d, opts.sigma, m, problem.l_sigma())?),
            None => None,
        };
        if opts.keep_history {
            history.push((state.clone(), recs));
        }
        state = next;
        let objective = problem.objective(&state.x);
        let (bi, _, brecs, bres) = best.as_ref().expect("set after the first iteration");
        let (ai, _, ares) = audit_best.as_ref().expect("set after the first iteration");
        trace.push(FbTraceRow {
            k,
            residuals: res,
            best_index: *bi,
            audit_index: *ai,
            audit: *ares,
            ergodic: erg_res,
            ergodic_eps_f: erg.eps_f.iter().fold(T::zero(), |a, &b| a + b),
            ergodic_eps_phi: erg.eps_phi.iter().fold(T::zero(), |a, &b| a + b),
            eps_split_clamped: erg.clamped,
            objective,
            objective_gap: reference.map(|r| objective - r),
            y_drift: state.y_drift(),
            dist_solution: lifted.as_ref().map(|s| state.lift().dist(s)),
            bounds,
        });

        if certificate.is_none() {
            let mt = opts.tol.membership;
            let cert = if opts.meets(bres) {
                let xs: Vec<Vector<T>> = brecs.iter().map(|r| r.x_tilde.clone()).collect();
                let us: Vec<Vector<T>> = brecs.iter().map(|r| r.u_prime(lambda)).collect();
                let es: Vec<T> = brecs.iter().map(|r| r.eps_prime(lambda)).collect();
                let membership = problem
                    .terms
                    .iter()
                    .zip(brecs)
                    .zip(us.iter().zip(&es))
                    .map(|((t, r), (u, &e))| split_membership(t, &r.x_tilde, u, &r.grad, e, T::zero(), mt))
                    .collect();
                Some(FbCertificate {
                    x: xs,
                    u: us,
                    eps_f: es.clone(),
                    eps_phi: vec![T::zero(); m],
                    eps: es,
                    k,
                    index: *bi,
                    kind: CertificateKind::Pointwise,
                    residuals: *bres,
                    membership,
                    clamped: false,
                })
            } else if opts.meets(&erg_res) {
                let membership = (0..m)
                    .map(|i| {
                        split_membership(
                            &problem.terms[i],
                            &erg.x[i],
                            &erg.u[i],
                            &erg.grad_mean[i],
                            erg.eps_f[i],
                            erg.eps_phi[i],
                            mt,
                        )
                    })
                    .collect();
                Some(FbCertificate {
                    x: erg.x,
                    u: erg.u,
                    eps: erg.eps,
                    eps_f: erg.eps_f,
                    eps_phi: erg.eps_phi,
                    k,
                    index: k,
                    kind: CertificateKind::Ergodic,
                    residuals: erg_res,
                    membership,
                    clamped: erg.clamped,
                })
            } else {
                None
            };
            if cert.is_some() {
                certificate = cert;
                if !opts.run_to_k_max {
                    break;
                }
            }
        }
    }
    Ok(FbRun { certificate, trace, state, d0, audit, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::Matrix;
    use crate::splitting::{run_sum_with, SumOptions};
    use proptest::prelude::*;

    fn s(x: f64) -> Vector<f64> {
        Vector::new(vec![x]).unwrap()
    }

    fn half_square(c: f64) -> Quadratic<f64> {
        Quadratic::centered(Matrix::identity(1), &s(c)).unwrap()
    }

    fn two_squares(c: f64) -> CompositeProblem<f64> {
        let terms = vec![
            CompositeTerm::new(half_square(0.0), SubdiffOp::zero(1)).unwrap(),
            CompositeTerm::new(half_square(c), SubdiffOp::zero(1)).unwrap(),
        ];
        let x = s(c / 2.0);
        CompositeProblem::new(terms)
            .unwrap()
            .with_reference(ReferenceOptimum { value: c * c / 4.0, dual: Some(vec![s(c / 2.0), s(-c / 2.0)]), x })
            .unwrap()
    }

    #[test]
    fn two_squares_converge_to_midpoint() {
        let c = 3.0;
        let p = two_squares(c);
        let opts = FbOptions::new(1e-10, 1e-10, 1e-10, 10_000).unwrap();
        let run = run_fb(&p, &FbState::start(&p, s(-5.0), 0.9).unwrap(), &opts).unwrap();
        let cert = run.certificate.unwrap();
        assert!((cert.x_mean()[0] - c / 2.0).abs() < 1e-8);
        assert!(cert.membership.iter().all(|m| *m == Membership::Verified));
        let last = run.trace.last().unwrap();
        assert!(last.residuals.sum_u_norm <= 1e-10);
    }

    #[test]
    fn indicator_of_origin_collapses() {
        let zero = SubdiffOp::boxed(vec![0.0; 2], vec![0.0; 2]).unwrap();
        let q = Quadratic::centered(Matrix::identity(2), &Vector::new(vec![1.0, 2.0]).unwrap()).unwrap();
        let terms = vec![CompositeTerm::new(q.clone(), zero.clone()).unwrap(), CompositeTerm::new(q, zero).unwrap()];
        let p = CompositeProblem::new(terms).unwrap();
        let st = FbState::start(&p, Vector::new(vec![4.0, -1.0]).unwrap(), 0.5).unwrap();
        let (next, recs) = fb_step(&p, &st, 0.5, &Tolerances::default(), false).unwrap();
        assert!(recs.iter().all(|r| r.x_tilde.norm() == 0.0));
        assert_eq!(next.x.norm(), 0.0);
    }

    #[test]
    fn quadratic_eps_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = fixtures::composite_quadratic::<f64>(3, 5, fixtures::PhiKind::L1, &mut rng);
        let mut st = FbState::start(&p, Vector::random(5, &mut rng).scaled(4.0), 0.8).unwrap();
        for _ in 0..10 {
            let (next, recs) = fb_step(&p, &st, 0.8, &Tolerances::default(), false).unwrap();
            for (t, r) in p.terms().iter().zip(&recs) {
                let g = t.f.gradient(&st.x);
                let def = st.lambda * (t.f.value(&r.x_tilde) - t.f.value(&st.x) - g.dot(&(&r.x_tilde - &st.x)));
                assert!((def - r.eps).abs() <= 1e-12 * (1.0 + t.f.value(&st.x).abs()));
            }
            st = next;
        }
    }

    #[test]
    fn understated_lipschitz_is_diagnosed() {
        let q = Quadratic::centered(Matrix::diag(&[4.0, 1.0]), &Vector::zeros(2)).unwrap();
        let terms = vec![
            CompositeTerm::new(q.clone(), SubdiffOp::zero(2)).unwrap(),
            CompositeTerm::new(q.clone(), SubdiffOp::zero(2)).unwrap(),
        ];
        assert!(CompositeProblem::with_lipschitz(terms.clone(), vec![1.0, 4.0]).is_err());
        let p = CompositeProblem::new(terms).unwrap();
        assert_eq!(p.l_sigma(), 4.0);
        // λ as if L_Σ were 1.
        let st = FbState::new(Vector::new(vec![1.0, 0.0]).unwrap(), vec![Vector::zeros(2); 2], 0.81).unwrap();
        let err = fb_step(&p, &st, 0.9, &Tolerances::default(), false).unwrap_err();
        assert!(matches!(err, Error::LipschitzUnderstated { block: 0, .. }));
    }

    #[test]
    fn sigma_must_be_positive() {
        let p = two_squares(1.0);
        assert!(FbState::start(&p, s(0.0), 0.0).is_err());
        assert!(FbOptions::new(1.0, 1.0, 1.0, 1).unwrap().with_sigma(1.0).is_err());
    }

    #[test]
    fn audit_examples() {
        let p = two_squares(2.0);
        let st = FbState::start(&p, s(1.0), 0.9).unwrap();
        let (_, recs) = fb_step(&p, &st, 0.9, &Tolerances::default(), false).unwrap();
        let mut a = FbAudit::new(2, 1, st.lambda);
        fb_audit_update(&mut a, &recs).unwrap();
        for i in 0..2 {
            let (e, ef, ep) = a.raw_eps(i).unwrap();
            assert_eq!(ef, a.eps_prime[i]);
            assert_eq!(e, a.eps_prime[i]);
            assert_eq!(ep, 0.0);
        }
        // Repeating one record keeps ε″^a at the mean of ε′.
        let mut a = FbAudit::new(2, 1, st.lambda);
        for _ in 0..5 {
            fb_audit_update(&mut a, &recs).unwrap();
        }
        assert!((a.raw_eps(1).unwrap().1 - recs[1].eps_prime(st.lambda)).abs() < 1e-15);
    }

    /// Full-history evaluation of `ε″^a` and `ε′^a` for one block.
    fn replay_eps(recs: &[&FbRecord<f64>], lambda: f64) -> (f64, f64) {
        let k = recs.len() as f64;
        let n = recs[0].x_tilde.dim();
        let mut xa = Vector::zeros(n);
        let mut ga = Vector::zeros(n);
        let mut ua = Vector::zeros(n);
        for r in recs {
            xa.axpy(1.0 / k, &r.x_tilde);
            ga.axpy(1.0 / k, &r.grad);
            ua.axpy(1.0 / k, &r.u_prime(lambda));
        }
        let mut ef = 0.0;
        let mut e = 0.0;
        for r in recs {
            let dx = &r.x_tilde - &xa;
            ef += (r.eps_prime(lambda) + dx.dot(&(&r.grad - &ga))) / k;
            e += (r.eps_prime(lambda) + dx.dot(&(&r.u_prime(lambda) - &ua))) / k;
        }
        (ef, e)
    }

    #[test]
    fn incremental_audit_matches_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = fixtures::composite_quadratic::<f64>(3, 6, fixtures::PhiKind::Box, &mut rng);
        let st = FbState::start(&p, Vector::random(6, &mut rng).scaled(3.0), 0.9).unwrap();
        let opts = FbOptions::new(1e-300, 1e-300, 1e-300, 50).unwrap().with_history();
        let run = run_fb(&p, &st, &opts).unwrap();
        assert_eq!(run.history.len(), 50);
        for i in 0..3 {
            let recs: Vec<&FbRecord<f64>> = run.history.iter().map(|(_, r)| &r[i]).collect();
            let (ef, e) = replay_eps(&recs, st.lambda);
            let (re, ref_, rp) = run.audit.raw_eps(i).unwrap();
            assert!((ef - ref_).abs() <= 1e-10 * (1.0 + ef.abs()), "{ef} vs {ref_}");
            assert!((e - re).abs() <= 1e-10 * (1.0 + e.abs()));
            assert!((e - ef - rp).abs() <= 1e-10 * (1.0 + e.abs()));
            assert!(ref_ >= -1e-12 && rp >= -1e-12);
        }
    }

    #[test]
    fn bounds_examples() {
        let z = fb_bounds(3, 0.0f64, 0.5, 2, 1.0).unwrap();
        assert_eq!((z.pointwise.sum_u, z.pointwise.pair, z.ergodic.eps), (0.0, 0.0, 0.0));
        // √m·L·d/(σ²√k)·√((1+σ)/(1−σ)) at σ = 0.5, m = L = d = k = 1.
        let b = fb_bounds(1, 1.0f64, 0.5, 1, 1.0).unwrap();
        assert!((b.pointwise.sum_u - 4.0 * 3f64.sqrt()).abs() < 1e-12);
        for (k, d, sigma, m, l) in [(1usize, 1.0, 0.5, 2usize, 1.0), (7, 2.3, 0.9, 3, 5.0), (100, 0.4, 0.1, 5, 0.3)] {
            let fb = fb_bounds(k, d, sigma, m, l).unwrap();
            let sb = crate::splitting::sum_bounds(k, d, sigma, m).unwrap();
            let lam = sigma * sigma / l;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-13 * (1.0 + a.abs());
            assert!(close(fb.pointwise.sum_u, sb.pointwise.sum_u / lam));
            assert!(close(fb.pointwise.eps, sb.pointwise.eps / lam));
            assert!(close(fb.pointwise.pair, sb.pointwise.pair));
            assert!(close(fb.ergodic.sum_u, sb.ergodic.sum_u / lam));
            assert!(close(fb.ergodic.eps, sb.ergodic.eps / lam));
            assert!(close(fb.ergodic.pair, sb.ergodic.pair));
            let c = ((1.0 + sigma) / (1.0 - sigma)).sqrt();
            let kf = k as f64;
            assert!(close(fb.pointwise.sum_u, (m as f64).sqrt() * l * d / (sigma * sigma * kf.sqrt()) * c));
            assert!(close(fb.pointwise.eps, l * d * d / (2.0 * (1.0 - sigma * sigma) * kf)));
            assert!(close(
                fb.ergodic.eps,
                2.0 * (1.0 + sigma / (1.0 - sigma * sigma).sqrt()) * l * d * d / (sigma * sigma * kf)
            ));
        }
    }

    #[test]
    fn smooth_only_u_equals_scaled_gradient() {
        let p = two_squares(2.0);
        let st = FbState::start(&p, s(7.0), 0.9).unwrap();
        let (_, recs) = fb_step(&p, &st, 0.9, &Tolerances::default(), false).unwrap();
        for r in &recs {
            assert_eq!(r.u, r.grad.scaled(st.lambda));
        }
    }

    #[test]
    fn l1_prox_residual_is_a_subgradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = fixtures::composite_quadratic::<f64>(2, 8, fixtures::PhiKind::L1, &mut rng);
        let st = FbState::start(&p, Vector::random(8, &mut rng).scaled(2.0), 0.9).unwrap();
        let (_, recs) = fb_step(&p, &st, 0.9, &Tolerances::default(), false).unwrap();
        for (t, r) in p.terms().iter().zip(&recs) {
            let SubdiffOp::L1 { tau, .. } = t.phi else { unreachable!() };
            let s = &r.u - &r.grad.scaled(st.lambda);
            let bound = st.lambda * tau;
            for (xj, sj) in r.x_tilde.as_slice().iter().zip(s.as_slice()) {
                if *xj == 0.0 {
                    assert!(sj.abs() <= bound * (1.0 + 1e-12));
                } else {
                    assert!((sj - bound * xj.signum()).abs() <= 1e-12 * (1.0 + bound));
                }
            }
        }
    }

    #[test]
    fn start_at_dual_lift_certifies_at_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for kind in [fixtures::PhiKind::Zero, fixtures::PhiKind::L1, fixtures::PhiKind::Box] {
            let p = fixtures::composite_quadratic::<f64>(3, 4, kind, &mut rng);
            let st = FbState::at_dual_lift(&p, 0.9).unwrap();
            let run = run_fb(&p, &st, &FbOptions::new(1e-9, 1e-9, 1e-9, 3).unwrap()).unwrap();
            let c = run.certificate.unwrap();
            assert_eq!((c.k, c.index), (1, 1));
            assert!(run.d0.unwrap() < 1e-15);
        }
    }

    #[test]
    fn agrees_with_splitting_on_scaled_operators() {
        for (seed, m, n, kind) in [
            (1u64, 2usize, 3usize, fixtures::PhiKind::Zero),
            (2, 3, 5, fixtures::PhiKind::L1),
            (3, 4, 2, fixtures::PhiKind::Box),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = fixtures::composite_quadratic::<f64>(m, n, kind, &mut rng);
            let sigma = 0.9;
            let st = FbState::start(&p, Vector::random(n, &mut rng).scaled(3.0), sigma).unwrap();
            let lambda = st.lambda;
            let opts = FbOptions::new(1e-300, 1e-300, 1e-300, 200).unwrap().with_history();
            let run = run_fb(&p, &st, &opts).unwrap();
            let rep = embed_to_sum(&p, &run.history, &run.state, sigma).unwrap();
            assert!(rep.passes(1e-12), "{rep:?}");

            let sp = p.scaled_sum_problem(lambda).unwrap();
            let sopts = SumOptions::new(sigma, 1e-300, 1e-300, 1e-300, 200).unwrap().with_history();
            let terms = p.terms();
            let sum = run_sum_with(&sp, &st.as_split(), &sopts, |_, i, x, w| {
                let t = &terms[i];
                let mut z = w.clone();
                z.axpy(-lambda, &t.f.gradient(x));
                let xt = t.phi.prox(lambda, &z)?;
                let eps = lambda * quadratic_gap(&t.f, x, &xt);
                Ok((xt, eps))
            })
            .unwrap();
            for ((fs, _), (ss, _)) in run.history.iter().zip(&sum.history) {
                let scale = 1.0 + fs.x.norm();
                assert!(fs.x.dist(&ss.x) <= 1e-12 * scale);
                for (a, b) in fs.y.iter().zip(&ss.y) {
                    assert!(a.dist(b) <= 1e-12 * scale);
                }
            }
        }
    }

    /// Proximal gradient on the aggregate problem; the independent oracle
    /// for reference optima.
    fn prox_gradient_oracle(p: &CompositeProblem<f64>, x0: &Vector<f64>) -> (Vector<f64>, f64) {
        let q = p.terms().iter().skip(1).fold(p.terms()[0].f.clone(), |a, t| a.add(&t.f).unwrap());
        let l = q.lipschitz();
        let mut x = x0.clone();
        for _ in 0..200_000 {
            let mut z = x.clone();
            z.axpy(-1.0 / l, &q.gradient(&x));
            // Every φ_i here is a scaled ℓ₁ norm, so the sum's prox is a soft threshold.
            let tau: f64 = p.terms().iter().map(|t| if let SubdiffOp::L1 { tau, .. } = t.phi { tau } else { 0.0 }).sum();
            let next = SubdiffOp::l1(tau, x.dim()).unwrap().prox(1.0 / l, &z).unwrap();
            let step = next.dist(&x);
            x = next;
            if step <= 1e-13 * (1.0 + x.norm()) {
                break;
            }
        }
        let v = p.objective(&x);
        (x, v)
    }

    #[test]
    fn consensus_least_squares_within_budget() {
        let p = fixtures::consensus_least_squares::<f64>(3, 10, 1).unwrap();
        let x0 = Vector::zeros(10);
        let opts = FbOptions::new(1e-6, 1e-6, 1e-6, 200_000).unwrap();
        let run = run_fb(&p, &FbState::start(&p, x0, 0.9).unwrap(), &opts).unwrap();
        let c = run.certificate.as_ref().unwrap();
        assert!(c.membership.iter().all(|m| *m == Membership::Verified));
        let last = run.trace.last().unwrap();
        let b = last.bounds.unwrap();
        assert!(last.audit.sum_u_norm <= b.pointwise.sum_u * (1.0 + 1e-9));
        assert!(last.objective_gap.unwrap().abs() <= 1e-6);
    }

    #[test]
    fn lasso_reaches_oracle_objective() {
        let p = fixtures::consensus_lasso::<f64>(2, 20, 1).unwrap();
        let (_, fstar) = prox_gradient_oracle(&p, &Vector::zeros(20));
        let opts = FbOptions::new(1e-9, 1e-9, 1e-9, 200_000).unwrap();
        let run = run_fb(&p, &FbState::start(&p, Vector::zeros(20), 0.9).unwrap(), &opts).unwrap();
        let c = run.certificate.as_ref().unwrap();
        assert!(c.membership.iter().all(|m| *m == Membership::Verified), "{:?}", c.membership);
        let fx = p.objective(&run.state.x);
        assert!((fx - fstar).abs() <= 1e-6, "{fx} vs {fstar}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn bounds_and_inclusions_hold(seed in 0u64..10_000, sigma in 0.05f64..0.99, m in 2usize..5, n in 1usize..6, kind in 0usize..3) {
            let kind = [fixtures::PhiKind::Zero, fixtures::PhiKind::L1, fixtures::PhiKind::Box][kind];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = fixtures::composite_quadratic::<f64>(m, n, kind, &mut rng);
            let st = FbState::start(&p, Vector::random(n, &mut rng).scaled(3.0), sigma).unwrap();
            let opts = FbOptions::new(1e-300, 1e-300, 1e-300, 60).unwrap().with_sigma(sigma).unwrap().with_history();
            let run = run_fb(&p, &st, &opts).unwrap();
            let rep = embed_to_sum(&p, &run.history, &run.state, sigma).unwrap();
            prop_assert!(rep.passes(1e-12), "{:?}", rep);
            let slack = 1e-9;
            for row in &run.trace {
                let b = row.bounds.unwrap();
                prop_assert!(row.audit.sum_u_norm <= b.pointwise.sum_u * (1.0 + slack) + slack);
                prop_assert!(row.audit.max_pair_dist <= b.pointwise.pair * (1.0 + slack) + slack);
                prop_assert!(row.audit.eps_total <= b.pointwise.eps * (1.0 + slack) + slack);
                prop_assert!(row.ergodic.sum_u_norm <= b.ergodic.sum_u * (1.0 + slack) + slack);
                prop_assert!(row.ergodic.max_pair_dist <= b.ergodic.pair * (1.0 + slack) + slack);
                prop_assert!(row.ergodic.eps_total <= b.ergodic.eps * (1.0 + slack) + slack);
            }
            let erg = run.audit.query(1e-12).unwrap();
            for i in 0..m {
                let mem = split_membership(&p.terms()[i], &erg.x[i], &erg.u[i], &erg.grad_mean[i], erg.eps_f[i], erg.eps_phi[i], 1e-10);
                prop_assert_eq!(mem, Membership::Verified);
            }
        }
    }
}
