use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hpe::{
    check_hpe_inequality, controlled_inexact_resolvent, ergodic_bound, hpe_step, pointwise_bound, BoundPair,
    ErgodicState, HpeConfig, InexactnessPolicy, IterateTriple, StepRule,
};
use crate::operators::MonotoneOp;
use crate::spaces::Vector;
use crate::Scalar;

#[derive(Debug, Clone)]
pub struct HpeRunOptions<T> {
    /// Residual tolerance on `‖v‖`.
    pub rho: T,
    /// Tolerance on `ε`.
    pub eps_tol: T,
    pub k_max: usize,
    /// A point of `T⁻¹(0)`; enables bound audits with `d0 = ‖z0 − z*‖`.
    pub solution: Option<Vector<T>>,
    /// Keep iterating after the first certificate (for audits).
    pub run_to_k_max: bool,
    /// Store every `(z_prev, triple)` pair.
    pub keep_history: bool,
}

impl<T: Scalar> HpeRunOptions<T> {
    pub fn new(rho: T, eps_tol: T, k_max: usize) -> Result<Self> {
        if !(rho > T::zero()) || !(eps_tol > T::zero()) {
            return Err(Error::InvalidParameter { name: "tolerances", reason: "rho and eps_tol must be positive".into() });
        }
        Ok(Self { rho, eps_tol, k_max, solution: None, run_to_k_max: false, keep_history: false })
    }

    pub fn with_solution(mut self, z: Vector<T>) -> Self {
        self.solution = Some(z);
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    Pointwise,
    Ergodic,
}

impl CertificateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pointwise => "pointwise",
            Self::Ergodic => "ergodic",
        }
    }
}

/// Outcome of checking `v ∈ T^ε(z)` for a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Verified,
    Refuted,
    /// No decidable check for this operator.
    Undecided,
}

impl Membership {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Verified => "verified",
            Self::Refuted => "refuted",
            Self::Undecided => "undecided",
        }
    }

    pub(crate) fn check<T: Scalar>(op: &MonotoneOp<T>, z: &Vector<T>, v: &Vector<T>, eps: T, tol: T) -> Self {
        match op.enlargement_eps(z, v) {
            Ok(e) if e <= eps + tol => Self::Verified,
            Ok(_) if op.capabilities().is_affine => Self::Refuted,
            _ => Self::Undecided,
        }
    }
}

/// `(z, v, ε)` meeting `‖v‖ ≤ ρ` and `ε ≤ ε_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T> {
    pub z: Vector<T>,
    pub v: Vector<T>,
    pub eps: T,
    /// Iteration at which the certificate was found.
    pub k: usize,
    /// Index of the certified iterate (equals `k` for ergodic certificates).
    pub index: usize,
    pub kind: CertificateKind,
    pub membership: Membership,
}

/// One row of the per-iteration audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct HpeTraceRow<T> {
    pub k: usize,
    pub lambda: T,
    pub norm_z: T,
    pub norm_v: T,
    pub eps: T,
    /// `‖z̃_k − z_{k−1}‖`
    pub norm_delta: T,
    pub admission_lhs: T,
    pub admission_rhs: T,
    pub admission_rel_margin: T,
    /// Best index under the `max(‖v‖/ρ, ε/ε_tol)` scalarization.
    pub best_index: usize,
    /// `argmin_{i≤k} ‖z̃_i − z_{i−1}‖`, the index the pointwise bounds speak about.
    pub audit_index: usize,
    pub audit_norm_v: T,
    pub audit_eps: T,
    pub min_norm_v: T,
    pub ergodic_norm_v: T,
    pub ergodic_eps: T,
    pub dist_solution: Option<T>,
    pub pointwise_bound: Option<BoundPair<T>>,
    pub ergodic_bound: Option<BoundPair<T>>,
}

#[derive(Debug, Clone)]
pub struct HpeRun<T> {
    pub certificate: Option<Certificate<T>>,
    pub trace: Vec<HpeTraceRow<T>>,
    pub z: Vector<T>,
    pub d0: Option<T>,
    pub ergodic: ErgodicState<T>,
    pub history: Vec<(Vector<T>, IterateTriple<T>)>,
}

struct Best<T> {
    index: usize,
    score: T,
    z: Vector<T>,
    v: Vector<T>,
    eps: T,
}

/// Runs the HPE method with triples from `supply(k, z_prev, λ_k)`.
/// `certify` enables membership checks on the returned certificate.
pub fn run_hpe_with<T: Scalar>(
    z0: &Vector<T>,
    cfg: &HpeConfig<T>,
    opts: &HpeRunOptions<T>,
    certify: Option<&MonotoneOp<T>>,
    mut supply: impl FnMut(usize, &Vector<T>, T) -> Result<IterateTriple<T>>,
) -> Result<HpeRun<T>> {
    let n = z0.dim();
    let d0 = match &opts.solution {
        Some(s) => {
            s.check_dim(n)?;
            Some(z0.dist(s))
        }
        None => None,
    };
    let mut z = z0.clone();
    let mut ergodic = ErgodicState::new(n);
    let mut trace = Vec::with_capacity(opts.k_max.min(1 << 16));
    let mut history = Vec::new();
    let mut certificate: Option<Certificate<T>> = None;
    let mut best: Option<Best<T>> = None;
    let (mut audit_index, mut audit_delta, mut audit_v, mut audit_eps) = (0, T::infinity(), T::zero(), T::zero());
    let mut min_norm_v = T::infinity();

    for k in 1..=opts.k_max {
        let lambda = cfg.lambda(k)?;
        let t = supply(k, &z, lambda)?;
        if t.lambda != lambda {
            return Err(Error::Invariant(format!("triple computed for stepsize {} instead of {lambda}", t.lambda)));
        }
        let adm = check_hpe_inequality(&z, &t, cfg.sigma, cfg.tol.admission)?;
        let z_next = hpe_step(cfg, &z, &t)?;
        ergodic.update(lambda, &t.x_tilde, &t.v, t.eps)?;

        let norm_v = t.v.norm();
        let norm_delta = t.x_tilde.dist(&z);
        min_norm_v = min_norm_v.min(norm_v);
        if norm_delta < audit_delta {
            (audit_index, audit_delta, audit_v, audit_eps) = (k, norm_delta, norm_v, t.eps);
        }
        let score = (norm_v / opts.rho).max(t.eps / opts.eps_tol);
        if best.as_ref().map_or(true, |b| score < b.score) {
            best = Some(Best { index: k, score, z: t.x_tilde.clone(), v: t.v.clone(), eps: t.eps });
        }
        let erg = ergodic.query(cfg.tol.eps_clamp)?;
        let erg_norm_v = erg.v.norm();

        let (pb, eb) = match d0 {
            Some(d) => (
                Some(pointwise_bound(k, d, cfg.sigma, cfg.lambda_lower())?),
                Some(ergodic_bound(k, d, cfg.sigma, cfg.lambda_lower())?),
            ),
            None => (None, None),
        };
        if opts.keep_history {
            history.push((z.clone(), t.clone()));
        }
        z = z_next;
        let b = best.as_ref().expect("best is set after the first iteration");
        trace.push(HpeTraceRow {
            k,
            lambda,
            norm_z: z.norm(),
            norm_v,
            eps: t.eps,
            norm_delta,
            admission_lhs: adm.lhs,
            admission_rhs: adm.rhs,
            admission_rel_margin: adm.relative_margin(),
            best_index: b.index,
            audit_index,
            audit_norm_v: audit_v,
            audit_eps,
            min_norm_v,
            ergodic_norm_v: erg_norm_v,
            ergodic_eps: erg.eps,
            dist_solution: opts.solution.as_ref().map(|s| z.dist(s)),
            pointwise_bound: pb,
            ergodic_bound: eb,
        });

        if certificate.is_none() {
            let found = if b.v.norm() <= opts.rho && b.eps <= opts.eps_tol {
                Some((b.z.clone(), b.v.clone(), b.eps, b.index, CertificateKind::Pointwise))
            } else if erg_norm_v <= opts.rho && erg.eps <= opts.eps_tol {
                Some((erg.x, erg.v, erg.eps, k, CertificateKind::Ergodic))
            } else {
                None
            };
            if let Some((cz, cv, ce, index, kind)) = found {
                let membership = certify
                    .map(|op| Membership::check(op, &cz, &cv, ce, cfg.tol.membership))
                    .unwrap_or(Membership::Undecided);
                certificate = Some(Certificate { z: cz, v: cv, eps: ce, k, index, kind, membership });
                if !opts.run_to_k_max {
                    break;
                }
            }
        }
    }
    Ok(HpeRun { certificate, trace, z, d0, ergodic, history })
}

/// Runs the HPE method on `op` with triples from the controlled inexact
/// resolvent.
pub fn run_hpe<T: Scalar>(
    op: &MonotoneOp<T>,
    z0: &Vector<T>,
    cfg: &HpeConfig<T>,
    policy: &InexactnessPolicy<T>,
    opts: &HpeRunOptions<T>,
) -> Result<HpeRun<T>> {
    z0.check_dim(op.dim())?;
    policy.check_sigma(cfg.sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let fixed = match cfg.step {
        StepRule::Constant(l) => Some(op.prepare_resolvent(l)?),
        StepRule::Sequence { .. } => None,
    };
    let clamp = cfg.tol.eps_clamp;
    run_hpe_with(z0, cfg, opts, Some(op), |_, z, lambda| {
        let owned;
        let res = match &fixed {
            Some(r) => r,
            None => {
                owned = op.prepare_resolvent(lambda)?;
                &owned
            }
        };
        controlled_inexact_resolvent(op, res, z, lambda, cfg.sigma, policy, &mut rng, clamp)
    })
}
