//! Recomputes the bundled reference optima with the proximal gradient
//! oracle. `SPINGARN_BLESS=1` rewrites the cache instead of comparing.

use spingarn_cli::reference::{self, cached_specs, compute, CachedReference};

const CACHE_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/references.json");

#[test]
fn cache_matches_the_oracle() {
    let fresh: Vec<CachedReference> = cached_specs().iter().map(|s| compute(s).unwrap()).collect();
    if std::env::var_os("SPINGARN_BLESS").is_some() {
        let text = serde_json::to_string_pretty(&fresh).unwrap() + "\n";
        std::fs::write(CACHE_PATH, text).unwrap();
        return;
    }
    let cached = reference::cache();
    assert_eq!(cached.len(), fresh.len(), "rerun with SPINGARN_BLESS=1");
    for (c, f) in cached.iter().zip(&fresh) {
        assert_eq!((&c.kind, c.m, c.n, c.seed), (&f.kind, f.m, f.n, f.seed));
        assert!(c.residual <= reference::ORACLE_TOL);
        let dx = c.x.iter().zip(&f.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dx <= 1e-12, "{}: cached minimizer moved by {dx:e}", c.kind);
        assert!((c.value - f.value).abs() <= 1e-12 * (1.0 + f.value.abs()), "{}", c.kind);
    }
}

#[test]
fn least_squares_oracle_agrees_with_normal_equations() {
    let spec = cached_specs().into_iter().find(|s| matches!(s, spingarn_cli::config::ProblemSpec::ConsensusLeastSquares { .. })).unwrap();
    let spingarn_cli::config::ProblemSpec::ConsensusLeastSquares { m, n, seed } = spec else { unreachable!() };
    let problem = spingarn::fixtures::consensus_least_squares::<f64>(m, n, seed).unwrap();
    let exact = problem.reference().unwrap();
    let cached = reference::lookup(&spec).unwrap();
    let dx = cached.x.iter().zip(exact.x.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dx <= 1e-8, "oracle vs normal equations: {dx:e}");
    assert!((cached.value - exact.value).abs() <= 1e-10 * (1.0 + exact.value.abs()));
}

#[test]
fn lasso_reference_satisfies_optimality() {
    let spec = spingarn_cli::config::ProblemSpec::ConsensusLasso { m: 2, n: 20, seed: 1 };
    let cached = reference::lookup(&spec).unwrap();
    let problem = spingarn_cli::experiment::composite_problem(&spec).unwrap();
    let r = problem.reference().unwrap();
    assert_eq!(r.x.as_slice(), cached.x.as_slice());
    assert!(r.dual.is_some(), "the dual lift should pass the membership checks");
    // The minimizer is sparse but not trivial.
    let nonzero = cached.x.iter().filter(|v| **v != 0.0).count();
    assert!(nonzero > 0 && nonzero < cached.n, "{nonzero} nonzeros");
}

#[test]
fn least_squares_reference_keeps_a_dual_lift() {
    let spec = spingarn_cli::config::ProblemSpec::ConsensusLeastSquares { m: 3, n: 10, seed: 1 };
    let problem = spingarn_cli::experiment::composite_problem(&spec).unwrap();
    assert!(problem.reference().unwrap().dual.is_some());
}
