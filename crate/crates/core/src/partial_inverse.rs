//! Inexact partial inverse methods for `u ∈ V⊥, u ∈ T(x), x ∈ V`: the
//! general relative-error scheme, the Spingarn-type special case, residuals,
//! complexity budgets and the embedding into the HPE method.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hpe::{
    ergodic_bound, perturbed_candidate, pointwise_bound, Admission, BoundPair, CertificateKind, ErgodicState,
    InexactnessPolicy, IterateTriple, Membership, MAX_HALVINGS,
};
use crate::operators::{MonotoneOp, PartialInverseOp, Resolvent};
use crate::spaces::{Subspace, Vector};
use crate::tolerance::Tolerances;
use crate::Scalar;

/// Find `x ∈ V`, `u ∈ V⊥` with `u ∈ T(x)`.
#[derive(Debug, Clone)]
pub struct PartialInverseProblem<T> {
    op: MonotoneOp<T>,
    subspace: Subspace<T>,
    solution: Option<(Vector<T>, Vector<T>)>,
}

impl<T: Scalar> PartialInverseProblem<T> {
    pub fn new(op: MonotoneOp<T>, subspace: Subspace<T>) -> Result<Self> {
        if op.dim() != subspace.dim_ambient() {
            return Err(Error::DimensionMismatch { expected: op.dim(), found: subspace.dim_ambient() });
        }
        Ok(Self { op, subspace, solution: None })
    }

    /// Attaches a known solution `(x*, u*)` after checking `x* ∈ V`,
    /// `u* ∈ V⊥` and `u* ∈ T(x*)`.
    pub fn with_solution(mut self, x: Vector<T>, u: Vector<T>) -> Result<Self> {
        let tol = Tolerances::<T>::default();
        let scale = T::one() + x.norm() + u.norm();
        let off_v = self.subspace.project_complement(&x)?.norm();
        let off_vperp = self.subspace.project(&u)?.norm();
        if off_v > tol.membership * scale || off_vperp > tol.membership * scale {
            return Err(Error::Invariant(format!(
                "known solution is off the subspaces: |x - P_V x| = {off_v:e}, |u - P_Vperp u| = {off_vperp:e}"
            )));
        }
        let eps = self.op.enlargement_eps(&x, &u)?;
        if !(eps <= tol.membership * scale * scale) {
            return Err(Error::Invariant(format!("known solution fails u in T(x): gap {eps:e}")));
        }
        self.solution = Some((x, u));
        Ok(self)
    }

    pub fn op(&self) -> &MonotoneOp<T> {
        &self.op
    }

    pub fn subspace(&self) -> &Subspace<T> {
        &self.subspace
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn solution(&self) -> Option<(&Vector<T>, &Vector<T>)> {
        self.solution.as_ref().map(|(x, u)| (x, u))
    }

    /// `x* + u*`, the zero of the partial inverse `T_V`.
    pub fn hpe_solution(&self) -> Option<Vector<T>> {
        self.solution.as_ref().map(|(x, u)| x + u)
    }

    /// `‖x0 − (x* + u*)‖`
    pub fn d0(&self, x0: &Vector<T>) -> Option<T> {
        self.hpe_solution().map(|s| x0.dist(&s))
    }

    /// The partial inverse `T_V` as an operator.
    pub fn partial_inverse(&self) -> Result<MonotoneOp<T>> {
        Ok(MonotoneOp::PartialInverse(Box::new(PartialInverseOp::new(self.op.clone(), self.subspace.clone())?)))
    }
}

/// `(x̃, u, ε)` with `u ∈ T^ε(x̃)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinTriple<T> {
    pub x_tilde: Vector<T>,
    pub u: Vector<T>,
    pub eps: T,
}

/// `‖u + x̃ − x_prev‖² + 2ε ≤ σ²‖P_V x̃ + P_{V⊥}u − x_prev‖²`
pub fn check_spin_inequality<T: Scalar>(
    v: &Subspace<T>,
    x_prev: &Vector<T>,
    t: &SpinTriple<T>,
    sigma: T,
    slack: T,
) -> Result<Admission<T>> {
    x_prev.check_dim(v.dim_ambient())?;
    t.x_tilde.check_dim(v.dim_ambient())?;
    t.u.check_dim(v.dim_ambient())?;
    let r = &(&t.u + &t.x_tilde) - x_prev;
    let zt = &v.project(&t.x_tilde)? + &v.project_complement(&t.u)?;
    let lhs = r.norm_sq() + T::of(2.0) * t.eps;
    let rhs = sigma * sigma * (&zt - x_prev).norm_sq();
    Ok(Admission::new(lhs, rhs, slack))
}

/// `u = x_prev − x̃` (to structural tolerance) and `2ε ≤ σ²‖x̃ − P_V x_prev‖²`.
pub fn check_spin2_inequality<T: Scalar>(
    v: &Subspace<T>,
    x_prev: &Vector<T>,
    t: &SpinTriple<T>,
    sigma: T,
    tol: &Tolerances<T>,
) -> Result<Admission<T>> {
    let gap = (&(&t.u + &t.x_tilde) - x_prev).norm();
    if !tol.structural_ok(gap, x_prev.norm() + t.u.norm()) {
        return Err(Error::Invariant(format!("u differs from x_prev - x_tilde by {gap:e}")));
    }
    let d = &t.x_tilde - &v.project(x_prev)?;
    Ok(Admission::new(T::of(2.0) * t.eps, sigma * sigma * d.norm_sq(), tol.admission))
}

/// `x = x_prev − (P_V u + P_{V⊥} x̃)` after asserting admission.
pub fn spin_step<T: Scalar>(
    problem: &PartialInverseProblem<T>,
    x_prev: &Vector<T>,
    t: &SpinTriple<T>,
    sigma: T,
    tol: &Tolerances<T>,
) -> Result<Vector<T>> {
    if !(t.eps >= T::zero()) {
        return Err(Error::InvalidParameter { name: "eps", reason: "must be nonnegative".into() });
    }
    check_spin_inequality(&problem.subspace, x_prev, t, sigma, tol.admission)?.into_result(None)?;
    let v = problem.subspace();
    let step = &v.project(&t.u)? + &v.project_complement(&t.x_tilde)?;
    Ok(x_prev - &step)
}

/// `x = P_V x̃ + P_{V⊥} u` for a triple with `u = x_prev − x̃`.
pub fn spin2_update<T: Scalar>(v: &Subspace<T>, t: &SpinTriple<T>) -> Result<Vector<T>> {
    Ok(&v.project(&t.x_tilde)? + &v.project_complement(&t.u)?)
}

/// Computes a triple for the Spingarn-type scheme and applies the update.
/// `σ = 0` or an exact policy gives `x̃ = (T + I)⁻¹x_prev`.
#[allow(clippy::too_many_arguments)]
pub fn spin2_step<T: Scalar>(
    problem: &PartialInverseProblem<T>,
    resolvent: &Resolvent<T>,
    x_prev: &Vector<T>,
    sigma: T,
    policy: &InexactnessPolicy<T>,
    rng: &mut impl Rng,
    tol: &Tolerances<T>,
) -> Result<(Vector<T>, SpinTriple<T>)> {
    let t = spin2_triple(problem, resolvent, x_prev, sigma, policy, rng, tol)?;
    check_spin2_inequality(&problem.subspace, x_prev, &t, sigma, tol)?.into_result(None)?;
    Ok((spin2_update(&problem.subspace, &t)?, t))
}

fn exact_triple<T: Scalar>(resolvent: &Resolvent<T>, x_prev: &Vector<T>) -> Result<SpinTriple<T>> {
    let x = resolvent.apply(x_prev)?;
    let u = x_prev - &x;
    Ok(SpinTriple { x_tilde: x, u, eps: T::zero() })
}

fn spin2_triple<T: Scalar>(
    problem: &PartialInverseProblem<T>,
    resolvent: &Resolvent<T>,
    x_prev: &Vector<T>,
    sigma: T,
    policy: &InexactnessPolicy<T>,
    rng: &mut impl Rng,
    tol: &Tolerances<T>,
) -> Result<SpinTriple<T>> {
    policy.check_sigma(sigma)?;
    let exact = exact_triple(resolvent, x_prev)?;
    if policy.is_exact() {
        return Ok(exact);
    }
    let pv = problem.subspace.project(x_prev)?;
    let mut magnitude = policy.magnitude_fraction * exact.x_tilde.dist(&pv);
    if magnitude == T::zero() {
        return Ok(exact);
    }
    let dir = Vector::random_unit(x_prev.dim(), rng);
    for _ in 0..MAX_HALVINGS {
        let mut x = &exact.x_tilde + &dir.scaled(magnitude);
        magnitude = magnitude * T::of(0.5);
        if let MonotoneOp::Subdiff(f) = &problem.op {
            x = f.domain_projection(&x);
        }
        let u = x_prev - &x;
        let Ok(eps) = problem.op.enlargement_eps(&x, &u) else {
            continue;
        };
        if !eps.is_finite() {
            continue;
        }
        let cand = SpinTriple { x_tilde: x, u, eps };
        let adm = check_spin2_inequality(&problem.subspace, x_prev, &cand, sigma, tol)?;
        if adm.lhs <= adm.rhs {
            return Ok(cand);
        }
    }
    Ok(exact)
}

fn spin_triple<T: Scalar>(
    problem: &PartialInverseProblem<T>,
    resolvent: &Resolvent<T>,
    x_prev: &Vector<T>,
    sigma: T,
    policy: &InexactnessPolicy<T>,
    rng: &mut impl Rng,
    tol: &Tolerances<T>,
) -> Result<SpinTriple<T>> {
    policy.check_sigma(sigma)?;
    let exact = exact_triple(resolvent, x_prev)?;
    if policy.is_exact() {
        return Ok(exact);
    }
    let zt = &problem.subspace.project(&exact.x_tilde)? + &problem.subspace.project_complement(&exact.u)?;
    let mut magnitude = policy.magnitude_fraction * zt.dist(x_prev);
    if magnitude == T::zero() {
        return Ok(exact);
    }
    let dir = Vector::random_unit(x_prev.dim(), rng);
    for _ in 0..MAX_HALVINGS {
        let delta = dir.scaled(magnitude);
        magnitude = magnitude * T::of(0.5);
        let Ok(p) = perturbed_candidate(&problem.op, &exact.x_tilde, &exact.u, &delta, tol.eps_clamp) else {
            continue;
        };
        let cand = SpinTriple { x_tilde: p.x, u: p.v, eps: p.eps };
        if check_spin_inequality(&problem.subspace, x_prev, &cand, sigma, T::zero())?.admitted {
            return Ok(cand);
        }
    }
    Ok(exact)
}

/// Distances of `x̃` from `V` and of `u` from `V⊥`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinResiduals<T> {
    /// `‖x̃ − P_V x̃‖`
    pub r_primal: T,
    /// `‖u − P_{V⊥} u‖`
    pub r_dual: T,
    /// `√(r_primal² + r_dual²)`
    pub r_combined: T,
    pub eps: T,
}

impl<T: Scalar> SpinResiduals<T> {
    /// `max(r_primal, r_dual)`
    pub fn r_max(&self) -> T {
        self.r_primal.max(self.r_dual)
    }
}

pub fn spin_residuals<T: Scalar>(v: &Subspace<T>, x_tilde: &Vector<T>, u: &Vector<T>, eps: T) -> Result<SpinResiduals<T>> {
    let r_primal = v.project_complement(x_tilde)?.norm();
    let r_dual = v.project(u)?.norm();
    Ok(SpinResiduals { r_primal, r_dual, r_combined: r_primal.hypot(r_dual), eps })
}

/// `(z̃, v) = (P_V x̃ + P_{V⊥}u, P_V u + P_{V⊥}x̃)` with `λ = 1`.
pub fn embed_to_hpe<T: Scalar>(v: &Subspace<T>, t: &SpinTriple<T>) -> Result<IterateTriple<T>> {
    let (xv, xp) = v.project_pair(&t.x_tilde)?;
    let (uv, up) = v.project_pair(&t.u)?;
    Ok(IterateTriple { x_tilde: &xv + &up, v: &uv + &xp, eps: t.eps, lambda: T::one() })
}

/// Inverse of [`embed_to_hpe`]: `x̃ = P_V z̃ + P_{V⊥}v`, `u = P_V v + P_{V⊥}z̃`.
pub fn embed_from_hpe<T: Scalar>(v: &Subspace<T>, t: &IterateTriple<T>) -> Result<SpinTriple<T>> {
    let (zv, zp) = v.project_pair(&t.x_tilde)?;
    let (vv, vp) = v.project_pair(&t.v)?;
    Ok(SpinTriple { x_tilde: &zv + &vp, u: &vv + &zp, eps: t.eps })
}

/// Pointwise and ergodic bounds on `r_combined` and `ε` after `k` iterations.
pub fn spin_bounds<T: Scalar>(k: usize, d0: T, sigma: T) -> Result<(BoundPair<T>, BoundPair<T>)> {
    Ok((pointwise_bound(k, d0, sigma, T::one())?, ergodic_bound(k, d0, sigma, T::one())?))
}

/// Iteration budget `⌈d0²/ρ²⌉` of the exact method for `r_combined ≤ ρ`.
pub fn exact_budget<T: Scalar>(d0: T, rho: T) -> usize {
    let b = (d0 * d0 / (rho * rho)).ceil().as_f64();
    (b as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinAlgorithm {
    /// General relative-error triples.
    Spin,
    /// `u = x_prev − x̃` with an ε-only error budget.
    Spin2,
}

#[derive(Debug, Clone)]
pub struct SpinOptions<T> {
    pub sigma: T,
    pub algorithm: SpinAlgorithm,
    pub policy: InexactnessPolicy<T>,
    pub rho: T,
    pub eps_tol: T,
    pub k_max: usize,
    pub run_to_k_max: bool,
    pub keep_history: bool,
    pub tol: Tolerances<T>,
}

impl<T: Scalar> SpinOptions<T> {
    pub fn new(sigma: T, algorithm: SpinAlgorithm, rho: T, eps_tol: T, k_max: usize) -> Result<Self> {
        crate::hpe::check_sigma(sigma)?;
        if !(rho > T::zero()) || !(eps_tol > T::zero()) {
            return Err(Error::InvalidParameter { name: "tolerances", reason: "rho and eps_tol must be positive".into() });
        }
        Ok(Self {
            sigma,
            algorithm,
            policy: InexactnessPolicy::exact(),
            rho,
            eps_tol,
            k_max,
            run_to_k_max: false,
            keep_history: false,
            tol: Tolerances::default(),
        })
    }

    pub fn with_policy(mut self, policy: InexactnessPolicy<T>) -> Self {
        self.policy = policy;
        self
    }

    pub fn audit(mut self) -> Self {
        self.run_to_k_max = true;
        self
    }

    pub fn with_history(mut self) -> Self {
        self.keep_history = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinCertificate<T> {
    pub x: Vector<T>,
    pub u: Vector<T>,
    pub eps: T,
    pub k: usize,
    pub index: usize,
    pub kind: CertificateKind,
    pub residuals: SpinResiduals<T>,
    pub membership: Membership,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinTraceRow<T> {
    pub k: usize,
    pub residuals: SpinResiduals<T>,
    pub admission_lhs: T,
    pub admission_rhs: T,
    pub admission_rel_margin: T,
    pub best_index: usize,
    /// `argmin_{i≤k} ‖P_V x̃_i + P_{V⊥}u_i − x_{i−1}‖`
    pub audit_index: usize,
    pub audit_r_combined: T,
    pub audit_eps: T,
    pub min_r_combined: T,
    pub ergodic: SpinResiduals<T>,
    pub dist_solution: Option<T>,
    pub pointwise_bound: Option<BoundPair<T>>,
    pub ergodic_bound: Option<BoundPair<T>>,
}

#[derive(Debug, Clone)]
pub struct SpinRun<T> {
    pub certificate: Option<SpinCertificate<T>>,
    pub trace: Vec<SpinTraceRow<T>>,
    pub x: Vector<T>,
    pub d0: Option<T>,
    /// `⌈d0²/ρ²⌉` for exact runs with a known solution.
    pub budget: Option<usize>,
    pub ergodic: ErgodicState<T>,
    pub history: Vec<(Vector<T>, SpinTriple<T>)>,
}

/// Runs either partial inverse scheme from `x0` until `r_combined ≤ ρ` and
/// `ε ≤ ε_tol` hold for the best iterate or the ergodic mean.
pub fn run_spin<T: Scalar>(problem: &PartialInverseProblem<T>, x0: &Vector<T>, opts: &SpinOptions<T>) -> Result<SpinRun<T>> {
    x0.check_dim(problem.dim())?;
    opts.policy.check_sigma(opts.sigma)?;
    let v = &problem.subspace;
    let resolvent = problem.op.prepare_resolvent(T::one())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.policy.seed);
    let d0 = problem.d0(x0);
    let sol = problem.hpe_solution();
    let budget = match d0 {
        Some(d) if opts.sigma == T::zero() || opts.policy.is_exact() => Some(exact_budget(d, opts.rho)),
        _ => None,
    };

    let mut x = x0.clone();
    let mut ergodic = ErgodicState::new(problem.dim());
    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut certificate = None;
    let mut best: Option<(usize, T, SpinTriple<T>, SpinResiduals<T>)> = None;
    let (mut audit_index, mut audit_delta, mut audit_r, mut audit_eps) = (0, T::infinity(), T::zero(), T::zero());
    let mut min_r = T::infinity();

    for k in 1..=opts.k_max {
        let (t, x_next, adm) = match opts.algorithm {
            SpinAlgorithm::Spin => {
                let t = spin_triple(problem, &resolvent, &x, opts.sigma, &opts.policy, &mut rng, &opts.tol)?;
                let adm = check_spin_inequality(v, &x, &t, opts.sigma, opts.tol.admission)?;
                let next = spin_step(problem, &x, &t, opts.sigma, &opts.tol)?;
                (t, next, adm)
            }
            SpinAlgorithm::Spin2 => {
                let t = spin2_triple(problem, &resolvent, &x, opts.sigma, &opts.policy, &mut rng, &opts.tol)?;
                let adm = check_spin2_inequality(v, &x, &t, opts.sigma, &opts.tol)?.into_result(None)?;
                (t.clone(), spin2_update(v, &t)?, adm)
            }
        };
        ergodic.update(T::one(), &t.x_tilde, &t.u, t.eps)?;
        let res = spin_residuals(v, &t.x_tilde, &t.u, t.eps)?;
        let zt = &v.project(&t.x_tilde)? + &v.project_complement(&t.u)?;
        let delta = zt.dist(&x);
        if delta < audit_delta {
            (audit_index, audit_delta, audit_r, audit_eps) = (k, delta, res.r_combined, t.eps);
        }
        min_r = min_r.min(res.r_combined);
        let score = (res.r_combined / opts.rho).max(t.eps / opts.eps_tol);
        if best.as_ref().map_or(true, |b| score < b.1) {
            best = Some((k, score, t.clone(), res));
        }
        let erg = ergodic.query(opts.tol.eps_clamp)?;
        let erg_res = spin_residuals(v, &erg.x, &erg.v, erg.eps)?;
        let bounds = match d0 {
            Some(d) => Some(spin_bounds(k, d, opts.sigma)?),
            None => None,
        };
        if opts.keep_history {
            history.push((x.clone(), t));
        }
        x = x_next;
        let (bi, _, bt, bres) = best.as_ref().expect("set after the first iteration");
        trace.push(SpinTraceRow {
            k,
            residuals: res,
            admission_lhs: adm.lhs,
            admission_rhs: adm.rhs,
            admission_rel_margin: adm.relative_margin(),
            best_index: *bi,
            audit_index,
            audit_r_combined: audit_r,
            audit_eps,
            min_r_combined: min_r,
            ergodic: erg_res,
            dist_solution: sol.as_ref().map(|s| x.dist(s)),
            pointwise_bound: bounds.map(|b| b.0),
            ergodic_bound: bounds.map(|b| b.1),
        });

        if certificate.is_none() {
            let found = if bres.r_combined <= opts.rho && bres.eps <= opts.eps_tol {
                Some((bt.x_tilde.clone(), bt.u.clone(), bt.eps, *bi, CertificateKind::Pointwise, *bres))
            } else if erg_res.r_combined <= opts.rho && erg_res.eps <= opts.eps_tol {
                Some((erg.x, erg.v, erg.eps, k, CertificateKind::Ergodic, erg_res))
            } else {
                None
            };
            if let Some((cx, cu, ce, index, kind, residuals)) = found {
                let membership = Membership::check(&problem.op, &cx, &cu, ce, opts.tol.membership);
                certificate = Some(SpinCertificate { x: cx, u: cu, eps: ce, k, index, kind, residuals, membership });
                if !opts.run_to_k_max {
                    break;
                }
            }
        }
    }
    Ok(SpinRun { certificate, trace, x, d0, budget, ergodic, history })
}
