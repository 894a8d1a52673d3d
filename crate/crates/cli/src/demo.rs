//! Builtin demonstrations, each expressed as an [`ExperimentConfig`] so
//! that they run through the same trace and report path as config files.

use crate::config::{ExperimentConfig, Outputs, Params, ProblemSpec, SolverKind, CONFIG_VERSION};

/// Stopping tolerances of the composite demos, tight enough for a final
/// objective gap within [`DEMO_GAP_TOL`].
pub const DEMO_TOL: f64 = 1e-9;
pub const DEMO_K_MAX: usize = 200_000;
pub const DEMO_GAP_TOL: f64 = 1e-6;

fn outputs(name: &str) -> Outputs {
    Outputs { trace: format!("{name}.trace.csv").into(), report: format!("{name}.report.txt").into() }
}

fn config(problem: ProblemSpec, solver: SolverKind, params: Params, name: &str) -> ExperimentConfig {
    ExperimentConfig { version: CONFIG_VERSION, problem, solver, params, outputs: outputs(name) }
}

/// The variant method on `T = αI` diverging for `σ̂ > 1/√5`.
pub fn counterexample_divergent(sigma_hat: f64, k: usize) -> ExperimentConfig {
    let params = Params { sigma_hat: Some(sigma_hat), k_max: k, ..Params::default() };
    config(ProblemSpec::CounterexampleDivergent { n: 1 }, SolverKind::Variant, params, "counterexample-divergent")
}

/// HPE triples on `T = I` that no variant tolerance admits.
pub fn counterexample_hpe_not_variant(sigma: f64, k: usize) -> ExperimentConfig {
    let params = Params { sigma: Some(sigma), k_max: k, ..Params::default() };
    config(ProblemSpec::CounterexampleNotVariant { n: 1 }, SolverKind::Hpe, params, "counterexample-hpe-not-variant")
}

fn composite_params(sigma: f64) -> Params {
    Params {
        sigma: Some(sigma),
        rho: DEMO_TOL,
        delta: DEMO_TOL,
        eps: DEMO_TOL,
        k_max: DEMO_K_MAX,
        gap_tol: Some(DEMO_GAP_TOL),
        ..Params::default()
    }
}

pub fn consensus_lasso(m: usize, n: usize, sigma: f64, seed: u64) -> ExperimentConfig {
    config(ProblemSpec::ConsensusLasso { m, n, seed }, SolverKind::Fb, composite_params(sigma), "consensus-lasso")
}

pub fn consensus_least_squares(m: usize, n: usize, sigma: f64, seed: u64) -> ExperimentConfig {
    config(
        ProblemSpec::ConsensusLeastSquares { m, n, seed },
        SolverKind::Fb,
        composite_params(sigma),
        "consensus-least-squares",
    )
}
