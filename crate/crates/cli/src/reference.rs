//! Cached reference optima for the builtin composite problems, computed by
//! proximal gradient on the aggregated objective. The cache is regenerated
//! by the `reference_cache` test with `SPINGARN_BLESS=1`.

use serde::{Deserialize, Serialize};

use spingarn::forward_backward::{CompositeProblem, ReferenceOptimum};
use spingarn::{Error, SubdiffOp, Vector};

use crate::config::ProblemSpec;

pub const CACHE_JSON: &str = include_str!("../fixtures/references.json");

/// Stopping tolerance of the oracle on `‖x⁺ − x‖/t`.
pub const ORACLE_TOL: f64 = 1e-10;
pub const ORACLE_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CachedReference {
    /// Problem kind as written in configs.
    pub kind: String,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub x: Vec<f64>,
    pub value: f64,
    /// How the optimum was computed.
    pub oracle: String,
    pub iterations: usize,
    /// Final `‖x⁺ − x‖/t` of the oracle.
    pub residual: f64,
}

/// Problems with cached optima.
pub fn cached_specs() -> Vec<ProblemSpec> {
    vec![
        ProblemSpec::ConsensusLasso { m: 2, n: 20, seed: 1 },
        ProblemSpec::ConsensusLeastSquares { m: 3, n: 10, seed: 1 },
    ]
}

fn key(spec: &ProblemSpec) -> Option<(&'static str, usize, usize, u64)> {
    match spec {
        ProblemSpec::ConsensusLasso { m, n, seed } => Some(("consensus_lasso", *m, *n, *seed)),
        ProblemSpec::ConsensusLeastSquares { m, n, seed } => Some(("consensus_least_squares", *m, *n, *seed)),
        _ => None,
    }
}

pub fn cache() -> Vec<CachedReference> {
    serde_json::from_str(CACHE_JSON).expect("bundled reference cache is valid JSON")
}

pub fn lookup(spec: &ProblemSpec) -> Option<CachedReference> {
    let (kind, m, n, seed) = key(spec)?;
    cache().into_iter().find(|r| r.kind == kind && r.m == m && r.n == n && r.seed == seed)
}

/// Attaches `r` with the dual lift `g_i = ∇f_i(x*) + s`, where `s` is
/// `−mean_j ∇f_j(x*)` moved into the domain of the `φ_i` conjugate
/// (`[−τ, τ]ⁿ` for `τ‖·‖₁`, `{0}` for `φ = 0`). The optimum is attached
/// without a lift when that lift fails the checks.
pub fn attach(problem: CompositeProblem<f64>, r: &CachedReference) -> Result<CompositeProblem<f64>, Error> {
    let x = Vector::new(r.x.clone())?;
    let grads: Vec<Vector<f64>> = problem.terms().iter().map(|t| t.f.gradient(&x)).collect();
    let minus_mean = Vector::mean(&grads).scaled(-1.0);
    let dual: Vec<Vector<f64>> = problem
        .terms()
        .iter()
        .zip(&grads)
        .map(|(t, g)| {
            let s = match &t.phi {
                SubdiffOp::L1 { tau, .. } => minus_mean.map(|v| v.clamp(-*tau, *tau)),
                SubdiffOp::Zero { dim } => Vector::zeros(*dim),
                _ => minus_mean.clone(),
            };
            g + &s
        })
        .collect();
    let with_dual = ReferenceOptimum { x: x.clone(), value: r.value, dual: Some(dual) };
    problem
        .clone()
        .with_reference(with_dual)
        .or_else(|_| problem.with_reference(ReferenceOptimum { x, value: r.value, dual: None }))
}

/// Output of [`prox_gradient_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub x: Vector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Proximal gradient `x ← prox_{tΦ}(x − t∇F(x))` with `t = 1/L_F` on
/// `F = Σf_i`, `Φ = Σφ_i`. Needs identical (or zero) `φ_i`, so that
/// `Φ = mφ_1`.
pub fn prox_gradient_oracle(problem: &CompositeProblem<f64>, tol: f64, max_iter: usize) -> Result<OracleResult, Error> {
    let terms = problem.terms();
    let phi0 = &terms[0].phi;
    if terms.iter().any(|t| &t.phi != phi0) {
        return Err(Error::Unsupported("oracle needs identical nonsmooth terms".into()));
    }
    let phi = phi0.scaled(terms.len() as f64);
    let mut f = terms[0].f.clone();
    for t in &terms[1..] {
        f = f.add(&t.f)?;
    }
    let step = 1.0 / f.lipschitz();
    let mut x = Vector::zeros(problem.n());
    for it in 1..=max_iter {
        let mut z = x.clone();
        z.axpy(-step, &f.gradient(&x));
        let next = phi.prox(step, &z)?;
        let residual = next.dist(&x) / step;
        x = next;
        if residual <= tol {
            let value = problem.objective(&x);
            return Ok(OracleResult { x, value, iterations: it, residual });
        }
    }
    Err(Error::Invariant(format!("oracle did not reach {tol:e} in {max_iter} iterations")))
}

/// Cache entry for `spec` computed from scratch.
pub fn compute(spec: &ProblemSpec) -> Result<CachedReference, crate::CliError> {
    let (kind, m, n, seed) = key(spec).ok_or_else(|| crate::CliError::Config {
        field: "problem".into(),
        message: format!("no reference oracle for {}", spec.describe()),
    })?;
    let problem = match spec {
        ProblemSpec::ConsensusLasso { .. } => spingarn::fixtures::consensus_lasso::<f64>(m, n, seed)?,
        _ => spingarn::fixtures::consensus_least_squares::<f64>(m, n, seed)?,
    };
    let r = prox_gradient_oracle(&problem, ORACLE_TOL, ORACLE_MAX_ITER)?;
    Ok(CachedReference {
        kind: kind.into(),
        m,
        n,
        seed,
        x: r.x.as_slice().to_vec(),
        value: r.value,
        oracle: format!("proximal gradient on the aggregated objective, step 1/L, stopped at |x+ - x|/t <= {ORACLE_TOL:e}"),
        iterations: r.iterations,
        residual: r.residual,
    })
}
