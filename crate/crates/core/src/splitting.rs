//! Inexact Spingarn operator splitting for `0 ∈ T₁(x) + ⋯ + T_m(x)`:
//! per-block relative-error subproblems, the consensus update, residuals,
//! complexity bounds and the product-space embedding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hpe::{Admission, CertificateKind, ErgodicState, InexactnessPolicy, Membership, MAX_HALVINGS};
use crate::operators::{MonotoneOp, Resolvent};
use crate::partial_inverse::{PartialInverseProblem, SpinTriple};
use crate::spaces::{Subspace, Vector};
use crate::tolerance::Tolerances;
use crate::Scalar;

/// Above this many blocks the pairwise distance is bounded through the mean.
pub const EXACT_PAIRS_MAX_BLOCKS: usize = 16;

/// `m ≥ 2` operators on ℝⁿ.
#[derive(Debug, Clone)]
pub struct SumProblem<T> {
    ops: Vec<MonotoneOp<T>>,
    solution: Option<(Vector<T>, Vec<Vector<T>>)>,
}

impl<T: Scalar> SumProblem<T> {
    pub fn new(ops: Vec<MonotoneOp<T>>) -> Result<Self> {
        if ops.len() < 2 {
            return Err(Error::InvalidParameter { name: "ops", reason: format!("need m >= 2 operators, got {}", ops.len()) });
        }
        let n = ops[0].dim();
        if let Some(op) = ops.iter().find(|o| o.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: op.dim() });
        }
        Ok(Self { ops, solution: None })
    }

    /// Attaches `(x*, u*₁, …, u*_m)` after checking `Σu*_i = 0` and
    /// `u*_i ∈ T_i(x*)`.
    pub fn with_solution(mut self, x: Vector<T>, us: Vec<Vector<T>>) -> Result<Self> {
        if us.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), found: us.len() });
        }
        let tol = Tolerances::<T>::default();
        let scale = T::one() + x.norm() + us.iter().map(Vector::norm).fold(T::zero(), T::max);
        let s = Vector::sum(&us).norm();
        if s > tol.membership * scale {
            return Err(Error::Invariant(format!("known dual solution does not sum to zero: |sum u| = {s:e}")));
        }
        for (i, (op, u)) in self.ops.iter().zip(&us).enumerate() {
            let e = op.enlargement_eps(&x, u)?;
            if !(e <= tol.membership * scale * scale) {
                return Err(Error::Invariant(format!("known solution fails u_{i} in T_{i}(x): gap {e:e}")));
            }
        }
        self.solution = Some((x, us));
        Ok(self)
    }

    /// Attaches a solution already verified by the caller.
    pub(crate) fn with_verified_solution(mut self, x: Vector<T>, us: Vec<Vector<T>>) -> Self {
        self.solution = Some((x, us));
        self
    }

    pub fn m(&self) -> usize {
        self.ops.len()
    }

    pub fn n(&self) -> usize {
        self.ops[0].dim()
    }

    pub fn ops(&self) -> &[MonotoneOp<T>] {
        &self.ops
    }

    pub fn solution(&self) -> Option<(&Vector<T>, &[Vector<T>])> {
        self.solution.as_ref().map(|(x, u)| (x, u.as_slice()))
    }

    /// `(x* + u*₁, …, x* + u*_m)` flattened.
    pub fn lifted_solution(&self) -> Option<Vector<T>> {
        self.solution.as_ref().map(|(x, us)| flatten(&us.iter().map(|u| x + u).collect::<Vec<_>>()))
    }

    /// Distance of the lifted start `(x0 + y_i)_i` to the lifted solution.
    pub fn d0(&self, state: &SplitState<T>) -> Option<T> {
        self.lifted_solution().map(|s| state.lift().dist(&s))
    }

    /// The same problem as a partial inverse problem on `(ℝⁿ)^m` with the
    /// block-diagonal operator and the consensus subspace.
    pub fn product_problem(&self) -> Result<PartialInverseProblem<T>> {
        let p = PartialInverseProblem::new(MonotoneOp::product(self.ops.clone())?, Subspace::consensus(self.m(), self.n())?)?;
        match &self.solution {
            Some((x, us)) => {
                let xs = flatten(&vec![x.clone(); self.m()]);
                p.with_solution(xs, flatten(us))
            }
            None => Ok(p),
        }
    }
}

pub(crate) fn flatten<T: Scalar>(blocks: &[Vector<T>]) -> Vector<T> {
    Vector::raw(blocks.iter().flat_map(|b| b.as_slice().iter().copied()).collect())
}

/// `(x, y₁, …, y_m)` with `Σy_i = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitState<T> {
    pub x: Vector<T>,
    pub y: Vec<Vector<T>>,
}

impl<T: Scalar> SplitState<T> {
    pub fn new(x: Vector<T>, y: Vec<Vector<T>>) -> Result<Self> {
        for yi in &y {
            yi.check_dim(x.dim())?;
        }
        let s = Self { x, y };
        s.check_invariant(&Tolerances::default())?;
        Ok(s)
    }

    /// `y = 0`.
    pub fn start(x: Vector<T>, m: usize) -> Self {
        let y = vec![Vector::zeros(x.dim()); m];
        Self { x, y }
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    /// `‖Σy_i‖`
    pub fn y_drift(&self) -> T {
        Vector::sum(&self.y).norm()
    }

    pub fn check_invariant(&self, tol: &Tolerances<T>) -> Result<()> {
        let scale = self.y.iter().map(Vector::norm).fold(T::zero(), T::max);
        let d = self.y_drift();
        if !tol.structural_ok(d, scale) {
            return Err(Error::Invariant(format!("sum of y drifted to {d:e}")));
        }
        Ok(())
    }

    /// `(x + y₁, …, x + y_m)` flattened.
    pub fn lift(&self) -> Vector<T> {
        flatten(&self.y.iter().map(|y| &self.x + y).collect::<Vec<_>>())
    }
}

/// `(x̃_i, u_i, ε_i)` for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTriple<T> {
    pub x_tilde: Vector<T>,
    pub u: Vector<T>,
    pub eps: T,
}

/// `2ε_i ≤ σ²‖x̃_i − x_prev‖²`
pub fn check_block_admission<T: Scalar>(x_prev: &Vector<T>, t: &BlockTriple<T>, sigma: T, slack: T) -> Admission<T> {
    Admission::new(T::of(2.0) * t.eps, sigma * sigma * t.x_tilde.dist(x_prev).powi(2), slack)
}

/// Residuals of the approximate-solution criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitResiduals<T> {
    /// `‖Σu_i‖`
    pub sum_u_norm: T,
    /// `max_{i,ℓ} ‖x_i − x_ℓ‖` (or its mean-radius bound for many blocks)
    pub max_pair_dist: T,
    /// `Σε_i`
    pub eps_total: T,
}

/// `max_{i,ℓ} ‖x_i − x_ℓ‖`, computed exactly up to
/// [`EXACT_PAIRS_MAX_BLOCKS`] blocks and bounded by `2 max_i ‖x_i − x̄‖` beyond.
pub fn max_pair_distance<T: Scalar>(xs: &[Vector<T>]) -> T {
    if xs.len() <= EXACT_PAIRS_MAX_BLOCKS {
        let mut best = T::zero();
        for (i, a) in xs.iter().enumerate() {
            for b in &xs[i + 1..] {
                best = best.max(a.dist(b));
            }
        }
        best
    } else {
        let mean = Vector::mean(xs);
        T::of(2.0) * xs.iter().map(|x| x.dist(&mean)).fold(T::zero(), T::max)
    }
}

pub fn split_residuals<T: Scalar>(x_tildes: &[Vector<T>], us: &[Vector<T>], eps: &[T]) -> SplitResiduals<T> {
    SplitResiduals {
        sum_u_norm: Vector::sum(us).norm(),
        max_pair_dist: max_pair_distance(x_tildes),
        eps_total: eps.iter().copied().fold(T::zero(), |a, b| a + b),
    }
}

fn triples_residuals<T: Scalar>(ts: &[BlockTriple<T>]) -> SplitResiduals<T> {
    let xs: Vec<Vector<T>> = ts.iter().map(|t| t.x_tilde.clone()).collect();
    let us: Vec<Vector<T>> = ts.iter().map(|t| t.u.clone()).collect();
    let eps: Vec<T> = ts.iter().map(|t| t.eps).collect();
    split_residuals(&xs, &us, &eps)
}

/// `x = mean x̃_i`, `y_i = u_i − mean u`.
pub fn sum_update<T: Scalar>(triples: &[BlockTriple<T>]) -> SplitState<T> {
    let xs: Vec<Vector<T>> = triples.iter().map(|t| t.x_tilde.clone()).collect();
    let us: Vec<Vector<T>> = triples.iter().map(|t| t.u.clone()).collect();
    let mu = Vector::mean(&us);
    SplitState { x: Vector::mean(&xs), y: us.iter().map(|u| u - &mu).collect() }
}

/// One iteration. `supply(i, x_prev, w_i)` returns `(x̃_i, ε_i)` for
/// `w_i = x_prev + y_i`; `u_i = w_i − x̃_i` is formed here and every block is
/// checked against its error budget. Blocks run on the rayon pool when
/// `parallel` is set.
pub fn sum_step<T, F>(
    state: &SplitState<T>,
    sigma: T,
    tol: &Tolerances<T>,
    parallel: bool,
    supply: F,
) -> Result<(SplitState<T>, Vec<BlockTriple<T>>)>
where
    T: Scalar,
    F: Fn(usize, &Vector<T>, &Vector<T>) -> Result<(Vector<T>, T)> + Sync,
{
    crate::hpe::check_sigma(sigma)?;
    let block = |i: usize| -> Result<BlockTriple<T>> {
        let w = &state.x + &state.y[i];
        let (x_tilde, eps) = supply(i, &state.x, &w)?;
        x_tilde.check_dim(w.dim())?;
        if !(eps >= T::zero()) {
            return Err(Error::InvalidParameter { name: "eps", reason: format!("block {i}: must be nonnegative") });
        }
        let u = &w - &x_tilde;
        let t = BlockTriple { x_tilde, u, eps };
        check_block_admission(&state.x, &t, sigma, tol.admission).into_result(Some(i))?;
        Ok(t)
    };
    let triples: Vec<BlockTriple<T>> = if parallel {
        (0..state.m()).into_par_iter().map(block).collect::<Result<_>>()?
    } else {
        (0..state.m()).map(block).collect::<Result<_>>()?
    };
    Ok((sum_update(&triples), triples))
}

/// Default block solver: exact resolvents `(T_i + I)⁻¹`, optionally
/// perturbed under an inexactness policy. Each `(k, i)` draws from its own
/// ChaCha stream, so results do not depend on scheduling.
#[derive(Debug, Clone)]
pub struct BlockSolver<T> {
    ops: Vec<MonotoneOp<T>>,
    resolvents: Vec<Resolvent<T>>,
    sigma: T,
    policy: InexactnessPolicy<T>,
}

impl<T: Scalar> BlockSolver<T> {
    pub fn new(problem: &SumProblem<T>, sigma: T, policy: InexactnessPolicy<T>) -> Result<Self> {
        policy.check_sigma(sigma)?;
        let resolvents = problem.ops.iter().map(|o| o.prepare_resolvent(T::one())).collect::<Result<_>>()?;
        Ok(Self { ops: problem.ops.clone(), resolvents, sigma, policy })
    }

    /// `(x̃_i, ε_i)` at iteration `k`.
    pub fn solve(&self, k: usize, i: usize, x_prev: &Vector<T>, w: &Vector<T>) -> Result<(Vector<T>, T)> {
        let exact = self.resolvents[i].apply(w)?;
        if self.policy.is_exact() {
            return Ok((exact, T::zero()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.policy.seed);
        rng.set_stream(((k as u64) << 24) ^ i as u64);
        let op = &self.ops[i];
        let mut magnitude = self.policy.magnitude_fraction * exact.dist(x_prev);
        let dir = Vector::random_unit(w.dim(), &mut rng);
        let budget = |x: &Vector<T>| self.sigma * self.sigma * x.dist(x_prev).powi(2) / T::of(2.0);
        for _ in 0..MAX_HALVINGS {
            if magnitude == T::zero() {
                break;
            }
            let mut x = &exact + &dir.scaled(magnitude);
            magnitude = magnitude * T::of(0.5);
            if let MonotoneOp::Subdiff(f) = op {
                x = f.domain_projection(&x);
            }
            let u = w - &x;
            match op.enlargement_eps(&x, &u) {
                Ok(eps) if eps.is_finite() && eps <= budget(&x) => return Ok((x, eps)),
                _ => continue,
            }
        }
        Ok((exact, T::zero()))
    }
}

/// The iterate in product-space form: `x_prev = (x + y_i)_i`, the stacked
/// triple with `ε = Σε_i`, and `x_next` for the new state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductIterate<T> {
    pub x_prev: Vector<T>,
    pub triple: SpinTriple<T>,
    pub x_next: Vector<T>,
}

/// Stacks one iteration and asserts the four product-space relations:
/// `u ∈ T^ε(x̃)` blockwise, `u + x̃ − x_prev = 0`,
/// `ε ≤ σ²/2‖x̃ − P_V x_prev‖²` and `x_next = P_V x̃ + P_{V⊥}u`.
pub fn embed_to_spin2<T: Scalar>(
    problem: &SumProblem<T>,
    prev: &SplitState<T>,
    next: &SplitState<T>,
    triples: &[BlockTriple<T>],
    sigma: T,
    tol: &Tolerances<T>,
) -> Result<ProductIterate<T>> {
    let m = problem.m();
    if triples.len() != m || prev.m() != m || next.m() != m {
        return Err(Error::DimensionMismatch { expected: m, found: triples.len() });
    }
    let v = Subspace::consensus(m, problem.n())?;
    let x_prev = prev.lift();
    let xt = flatten(&triples.iter().map(|t| t.x_tilde.clone()).collect::<Vec<_>>());
    let u = flatten(&triples.iter().map(|t| t.u.clone()).collect::<Vec<_>>());
    let eps = triples.iter().fold(T::zero(), |a, t| a + t.eps);
    let x_next = next.lift();
    let scale = T::one() + x_prev.norm() + xt.norm();

    for (i, (op, t)) in problem.ops.iter().zip(triples).enumerate() {
        if let Ok(e) = op.enlargement_eps(&t.x_tilde, &t.u) {
            if e > t.eps + tol.membership * scale * scale {
                return Err(Error::Invariant(format!("block {i}: u is not in the {}-enlargement", t.eps)));
            }
        }
    }
    let r = (&(&u + &xt) - &x_prev).norm();
    if !tol.structural_ok(r, scale) {
        return Err(Error::Invariant(format!("u + x_tilde - x_prev = {r:e}")));
    }
    let d = (&xt - &v.project(&x_prev)?).norm_sq();
    Admission::new(T::of(2.0) * eps, sigma * sigma * d, tol.admission).into_result(None)?;
    let upd = &v.project(&xt)? + &v.project_complement(&u)?;
    let gap = upd.dist(&x_next);
    if !tol.structural_ok(gap, scale) {
        return Err(Error::Invariant(format!("x_next differs from P_V x_tilde + P_Vperp u by {gap:e}")));
    }
    Ok(ProductIterate { x_prev, triple: SpinTriple { x_tilde: xt, u, eps }, x_next })
}

/// Bounds on `‖Σu‖`, the pairwise spread and `Σε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumBoundSet<T> {
    pub sum_u: T,
    pub pair: T,
    pub eps: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumBounds<T> {
    pub pointwise: SumBoundSet<T>,
    pub ergodic: SumBoundSet<T>,
}

/// Pointwise: `√m·d/√k·c`, `2d/√k·c`, `σ²d²/(2(1−σ²)k)` with
/// `c = √((1+σ)/(1−σ))`. Ergodic: `2√m·d/k`, `4d/k`,
/// `2(1 + σ/√(1−σ²))d²/k`.
pub fn sum_bounds<T: Scalar>(k: usize, d0: T, sigma: T, m: usize) -> Result<SumBounds<T>> {
    if m < 2 {
        return Err(Error::InvalidParameter { name: "m", reason: format!("need m >= 2, got {m}") });
    }
    let (pb, eb) = crate::partial_inverse::spin_bounds(k, d0, sigma)?;
    let sm = T::of(m as f64).sqrt();
    let two = T::of(2.0);
    Ok(SumBounds {
        pointwise: SumBoundSet { sum_u: sm * pb.v, pair: two * pb.v, eps: pb.eps },
        ergodic: SumBoundSet { sum_u: sm * eb.v, pair: two * eb.v, eps: eb.eps },
    })
}

/// Iteration budget of the exact method:
/// `max(⌈m·d²/ρ²⌉, ⌈4d²/δ²⌉)`.
pub fn exact_sum_budget<T: Scalar>(d0: T, rho: T, delta: T, m: usize) -> usize {
    let d2 = d0 * d0;
    let a = (T::of(m as f64) * d2 / (rho * rho)).ceil().as_f64() as usize;
    let b = (T::of(4.0) * d2 / (delta * delta)).ceil().as_f64() as usize;
    a.max(b).max(1)
}

#[derive(Debug, Clone)]
pub struct SumOptions<T> {
    pub sigma: T,
    pub policy: InexactnessPolicy<T>,
    pub rho: T,
    pub delta: T,
    pub eps_tol: T,
    pub k_max: usize,
    pub run_to_k_max: bool,
    pub keep_history: bool,
    pub parallel: bool,
    pub tol: Tolerances<T>,
}

impl<T: Scalar> SumOptions<T> {
    pub fn new(sigma: T, rho: T, delta: T, eps_tol: T, k_max: usize) -> Result<Self> {
        crate::hpe::check_sigma(sigma)?;
        if !(rho > T::zero()) || !(delta > T::zero()) || !(eps_tol > T::zero()) {
            return Err(Error::InvalidParameter { name: "tolerances", reason: "rho, delta and eps_tol must be positive".into() });
        }
        Ok(Self {
            sigma,
            policy: InexactnessPolicy::exact(),
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

#[derive(Debug, Clone, PartialEq)]
pub struct SumCertificate<T> {
    pub x: Vec<Vector<T>>,
    pub u: Vec<Vector<T>>,
    pub eps: Vec<T>,
    pub k: usize,
    pub index: usize,
    pub kind: CertificateKind,
    pub residuals: SplitResiduals<T>,
    pub membership: Vec<Membership>,
}

impl<T: Scalar> SumCertificate<T> {
    /// Mean of the block points.
    pub fn x_mean(&self) -> Vector<T> {
        Vector::mean(&self.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumTraceRow<T> {
    pub k: usize,
    pub residuals: SplitResiduals<T>,
    /// Largest relative admission margin over the blocks (≤ 0 when admitted).
    pub admission_rel_margin: T,
    pub best_index: usize,
    /// `argmin_{j≤k} Σ_i ‖x̃_{i,j} − x_{j−1}‖²`
    pub audit_index: usize,
    pub audit: SplitResiduals<T>,
    pub ergodic: SplitResiduals<T>,
    pub y_drift: T,
    pub dist_solution: Option<T>,
    pub bounds: Option<SumBounds<T>>,
}

#[derive(Debug, Clone)]
pub struct SumRun<T> {
    pub certificate: Option<SumCertificate<T>>,
    pub trace: Vec<SumTraceRow<T>>,
    pub state: SplitState<T>,
    pub d0: Option<T>,
    /// Exact-method budget when a solution is known.
    pub budget: Option<usize>,
    pub ergodic: Vec<ErgodicState<T>>,
    pub history: Vec<(SplitState<T>, Vec<BlockTriple<T>>)>,
}

/// Per-block ergodic means and `ε^a_i`.
pub(crate) fn ergodic_blocks<T: Scalar>(
    states: &[ErgodicState<T>],
    clamp: T,
) -> Result<(Vec<Vector<T>>, Vec<Vector<T>>, Vec<T>)> {
    let mut xs = Vec::with_capacity(states.len());
    let mut us = Vec::with_capacity(states.len());
    let mut es = Vec::with_capacity(states.len());
    for s in states {
        let p = s.query(clamp)?;
        xs.push(p.x);
        us.push(p.v);
        es.push(p.eps);
    }
    Ok((xs, us, es))
}

/// Runs the splitting method with the default block solver.
pub fn run_sum<T: Scalar>(problem: &SumProblem<T>, start: &SplitState<T>, opts: &SumOptions<T>) -> Result<SumRun<T>> {
    let solver = BlockSolver::new(problem, opts.sigma, opts.policy)?;
    run_sum_with(problem, start, opts, |k, i, x, w| solver.solve(k, i, x, w))
}

/// Runs the splitting method with block triples from `supply(k, i, x_prev, w_i)`.
pub fn run_sum_with<T, F>(problem: &SumProblem<T>, start: &SplitState<T>, opts: &SumOptions<T>, supply: F) -> Result<SumRun<T>>
where
    T: Scalar,
    F: Fn(usize, usize, &Vector<T>, &Vector<T>) -> Result<(Vector<T>, T)> + Sync,
{
    let m = problem.m();
    if start.m() != m {
        return Err(Error::DimensionMismatch { expected: m, found: start.m() });
    }
    start.x.check_dim(problem.n())?;
    start.check_invariant(&opts.tol)?;
    let d0 = problem.d0(start);
    let lifted = problem.lifted_solution();
    let budget = match d0 {
        Some(d) if opts.policy.is_exact() => Some(exact_sum_budget(d, opts.rho, opts.delta, m)),
        _ => None,
    };

    let mut state = start.clone();
    let mut ergodic: Vec<ErgodicState<T>> = (0..m).map(|_| ErgodicState::new(problem.n())).collect();
    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut certificate = None;
    let mut best: Option<(usize, T, Vec<BlockTriple<T>>, SplitResiduals<T>)> = None;
    let mut audit: Option<(usize, T, SplitResiduals<T>)> = None;

    for k in 1..=opts.k_max {
        let (next, triples) = sum_step(&state, opts.sigma, &opts.tol, opts.parallel, |i, x, w| supply(k, i, x, w))?;
        let margin = triples
            .iter()
            .map(|t| check_block_admission(&state.x, t, opts.sigma, T::zero()).relative_margin())
            .fold(T::neg_infinity(), T::max);
        for (e, t) in ergodic.iter_mut().zip(&triples) {
            e.update(T::one(), &t.x_tilde, &t.u, t.eps)?;
        }
        let res = triples_residuals(&triples);
        let spread = triples.iter().fold(T::zero(), |a, t| a + t.x_tilde.dist(&state.x).powi(2));
        if audit.as_ref().map_or(true, |a| spread < a.1) {
            audit = Some((k, spread, res));
        }
        let score = opts.score(&res);
        if best.as_ref().map_or(true, |b| score < b.1) {
            best = Some((k, score, triples.clone(), res));
        }
        let (ex, eu, ee) = ergodic_blocks(&ergodic, opts.tol.eps_clamp)?;
        let erg = split_residuals(&ex, &eu, &ee);
        let bounds = match d0 {
            Some(d) => Some(sum_bounds(k, d, opts.sigma, m)?),
            None => None,
        };
        if opts.keep_history {
            history.push((state.clone(), triples));
        }
        state = next;
        let (bi, _, bt, bres) = best.as_ref().expect("set after the first iteration");
        let (ai, _, ares) = audit.as_ref().expect("set after the first iteration");
        trace.push(SumTraceRow {
            k,
            residuals: res,
            admission_rel_margin: margin,
            best_index: *bi,
            audit_index: *ai,
            audit: *ares,
            ergodic: erg,
            y_drift: state.y_drift(),
            dist_solution: lifted.as_ref().map(|s| state.lift().dist(s)),
            bounds,
        });

        if certificate.is_none() {
            let found = if opts.meets(bres) {
                Some((
                    bt.iter().map(|t| t.x_tilde.clone()).collect(),
                    bt.iter().map(|t| t.u.clone()).collect(),
                    bt.iter().map(|t| t.eps).collect(),
                    *bi,
                    CertificateKind::Pointwise,
                    *bres,
                ))
            } else if opts.meets(&erg) {
                Some((ex, eu, ee, k, CertificateKind::Ergodic, erg))
            } else {
                None
            };
            if let Some((x, u, eps, index, kind, residuals)) = found {
                let membership: Vec<Membership> = problem
                    .ops
                    .iter()
                    .zip(x.iter().zip(&u).zip(&eps))
                    .map(|(op, ((xi, ui), &ei))| Membership::check(op, xi, ui, ei, opts.tol.membership))
                    .collect();
                certificate = Some(SumCertificate { x, u, eps, k, index, kind, residuals, membership });
                if !opts.run_to_k_max {
                    break;
                }
            }
        }
    }
    Ok(SumRun { certificate, trace, state, d0, budget, ergodic, history })
}
