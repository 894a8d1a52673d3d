//! Runs one configured experiment: builds the problem, runs the solver,
//! writes the trace and renders the report from the written trace.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spingarn::fixtures::{self, PhiKind};
use spingarn::forward_backward::{run_fb, CompositeProblem, FbOptions, FbState};
use spingarn::hpe::{
    check_hpe_inequality, check_variant_inequality, run_hpe, run_hpe_with, DivergentFixture, HpeConfig, HpeRunOptions,
    InexactnessPolicy, Membership, NotVariantFixture, StepRule,
};
use spingarn::partial_inverse::{run_spin, PartialInverseProblem, SpinAlgorithm, SpinOptions};
use spingarn::splitting::{run_sum, SplitResiduals, SplitState, SumBounds, SumOptions};
use spingarn::{AffineOp, Matrix, MonotoneOp, Vector};

use crate::config::{AffineData, ExperimentConfig, LambdaRule, PhiSpec, ProblemSpec, SolverKind, Start};
use crate::report::RunReport;
use crate::trace::{fmt_num, Check, Trace};
use crate::{reference, CliError};

/// Slack on relative admission margins in traces.
pub const ADMISSION_SLACK: f64 = 1e-10;
/// Slack on `‖z_k − z*‖ ≤ d0`.
pub const FEJER_SLACK: f64 = 1e-9;
/// Largest `Σy_i` drift.
pub const DRIFT_LIMIT: f64 = 1e-10;
/// Largest relative gap between the two sides of an inequality met with equality.
pub const EQUALITY_LIMIT: f64 = 1e-12;
/// Largest relative gap on variant equalities at growing iterates.
pub const VARIANT_EQUALITY_LIMIT: f64 = 1e-10;

/// Result of [`run_experiment`].
#[derive(Debug)]
pub struct Outcome {
    pub trace: Trace,
    pub report: RunReport,
    /// Rendered report, identical to what `audit` prints for the trace file.
    pub text: String,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
    /// Solver time. Printed, never stored in the trace or report.
    pub wall_time: Duration,
}

/// Builds the trace for `cfg`, writes it under `out_dir`, re-reads it and
/// writes the report rendered from the re-read copy.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    let trace = build_trace(cfg)?;
    let wall_time = started.elapsed();

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let trace_path = out_dir.join(&cfg.outputs.trace);
    let report_path = out_dir.join(&cfg.outputs.report);
    let csv = trace.to_csv();
    std::fs::write(&trace_path, &csv).map_err(|e| CliError::io(&trace_path, e))?;
    let parsed = Trace::parse(&csv)?;
    let report = RunReport::from_trace(&parsed);
    let text = report.render();
    std::fs::write(&report_path, &text).map_err(|e| CliError::io(&report_path, e))?;
    Ok(Outcome { trace: parsed, report, text, trace_path, report_path, wall_time })
}

/// Runs the solver and collects its trace without touching the filesystem
/// (beyond reading an affine sidecar).
pub fn build_trace(cfg: &ExperimentConfig) -> Result<Trace, CliError> {
    let mut t = Trace::new();
    t.meta("solver", cfg.solver.as_str());
    t.meta("problem", cfg.problem.describe());
    let p = &cfg.params;
    match cfg.solver {
        SolverKind::Variant => t.meta_num("sigma_hat", p.sigma_hat.expect("validated")),
        _ => t.meta_num("sigma", cfg.sigma()),
    }
    t.meta_num("rho", p.rho);
    if matches!(cfg.solver, SolverKind::Split | SolverKind::Fb) {
        t.meta_num("delta", p.delta);
    }
    t.meta_num("eps", p.eps);
    t.meta("k_max", p.k_max.to_string());
    if let Some(inx) = &p.inexact {
        t.meta("inexact", format!("fraction {} seed {}", fmt_num(inx.fraction), inx.seed));
    }
    match (&cfg.problem, cfg.solver) {
        (ProblemSpec::CounterexampleNotVariant { n }, _) => not_variant(cfg, *n, &mut t)?,
        (ProblemSpec::CounterexampleDivergent { n }, _) => divergent(cfg, *n, &mut t)?,
        (_, SolverKind::Hpe) => hpe(cfg, &mut t)?,
        (_, SolverKind::Spin | SolverKind::Spin2) => spin(cfg, &mut t)?,
        (_, SolverKind::Split) => split(cfg, &mut t)?,
        (_, SolverKind::Fb) => fb(cfg, &mut t)?,
        (_, SolverKind::Variant) => unreachable!("validated problem/solver pairing"),
    }
    Ok(t)
}

fn config_err(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), message: message.into() }
}

fn start_point(cfg: &ExperimentConfig, n: usize, default: Start) -> Result<Vector<f64>, CliError> {
    let coords = match cfg.params.start.clone().unwrap_or(default) {
        Start::Zeros => vec![0.0; n],
        Start::Ones => vec![1.0; n],
        Start::Random { seed, scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| scale * rng.gen_range(-1.0..=1.0)).collect()
        }
        Start::Point(x) => x,
    };
    Vector::new(coords).map_err(|e| config_err("params.start", e.to_string()))
}

fn policy(cfg: &ExperimentConfig) -> Result<InexactnessPolicy<f64>, CliError> {
    match &cfg.params.inexact {
        Some(i) if i.fraction > 0.0 => {
            InexactnessPolicy::perturbed(i.fraction, i.seed).map_err(|e| config_err("params.inexact", e.to_string()))
        }
        _ => Ok(InexactnessPolicy::exact()),
    }
}

fn memberships(ms: &[Membership]) -> String {
    if ms.iter().all(|m| *m == Membership::Verified) {
        "verified".into()
    } else {
        ms.iter().map(Membership::as_str).collect::<Vec<_>>().join(",")
    }
}

fn certificate_meta(t: &mut Trace, found: Option<(&str, usize, usize, String)>, k_max: usize) {
    match found {
        Some((kind, k, index, membership)) => {
            t.meta("certificate", format!("{kind} at k={k} from iterate {index}, membership {membership}"));
        }
        None => t.meta("certificate", format!("none within k_max={k_max}")),
    }
}

fn fejer_check(t: &mut Trace, d0: Option<f64>) {
    if let Some(d) = d0 {
        t.meta_num("d0", d);
        t.check(Check::AtMost { name: "fejer".into(), column: "dist_solution".into(), limit: d * (1.0 + FEJER_SLACK) });
    }
}

fn int(v: usize) -> Option<f64> {
    Some(v as f64)
}

// ---------------------------------------------------------------- hpe

fn affine_from_data(d: &AffineData, field: &str) -> Result<(AffineOp<f64>, Option<Vector<f64>>), CliError> {
    let a = Matrix::from_rows(d.matrix.clone()).map_err(|e| config_err(&format!("{field}.matrix"), e.to_string()))?;
    let b = Vector::new(d.b.clone()).map_err(|e| config_err(&format!("{field}.b"), e.to_string()))?;
    let op = AffineOp::new(a, b).map_err(|e| config_err(&format!("{field}.matrix"), e.to_string()))?;
    let sol = match &d.solution {
        Some(s) => {
            let s = Vector::new(s.clone()).map_err(|e| config_err(&format!("{field}.solution"), e.to_string()))?;
            let r = op.eval(&s)?.norm();
            if r > 1e-8 * (1.0 + s.norm()) {
                return Err(config_err(&format!("{field}.solution"), format!("not a zero of the operator: residual {r:e}")));
            }
            Some(s)
        }
        None => None,
    };
    Ok((op, sol))
}

fn hpe_config(cfg: &ExperimentConfig) -> Result<HpeConfig<f64>, CliError> {
    let step = match &cfg.params.lambda {
        LambdaRule::Constant(l) => StepRule::Constant(*l),
        LambdaRule::Cyclic(ls) => {
            let lower = ls.iter().copied().fold(f64::INFINITY, f64::min);
            let ls = ls.clone();
            StepRule::Sequence { rule: Arc::new(move |k| ls[(k - 1) % ls.len()]), lower }
        }
    };
    HpeConfig::new(cfg.sigma(), step).map_err(|e| config_err("params", e.to_string()))
}

fn hpe_columns(t: &mut Trace) {
    t.int_column("k", "iteration");
    t.column("lambda", "λ_k");
    t.column("norm_z", "‖z_k‖");
    t.column("norm_v", "‖v_k‖");
    t.column("eps", "ε_k");
    t.column("norm_delta", "‖z̃_k − z_{k−1}‖");
    t.column("admission_lhs", "‖λ_k v_k + z̃_k − z_{k−1}‖² + 2λ_k ε_k");
    t.column("admission_rhs", "σ²‖z̃_k − z_{k−1}‖²");
    t.column("admission_rel_margin", "(lhs − rhs)/max(lhs, rhs), ≤ 0 when admitted");
    t.int_column("best_index", "iterate closest to the stopping tolerances");
    t.int_column("audit_index", "j = argmin_{i≤k} ‖z̃_i − z_{i−1}‖");
    t.column("audit_norm_v", "‖v_j‖");
    t.column("audit_eps", "ε_j");
    t.column("min_norm_v", "min_{i≤k} ‖v_i‖");
    t.column("ergodic_norm_v", "‖v^a_k‖, λ-weighted mean of v_i");
    t.column("ergodic_eps", "ε^a_k from the transportation formula");
    t.column("dist_solution", "‖z_k − z*‖");
    t.column("bound_pointwise_v", "d0/(λ̲√k)·√((1+σ)/(1−σ))");
    t.column("bound_pointwise_eps", "σ²d0²/(2(1−σ²)λ̲k)");
    t.column("bound_ergodic_v", "2d0/(λ̲k)");
    t.column("bound_ergodic_eps", "2(1 + σ/√(1−σ²))d0²/(λ̲k)");
    for (name, observed, bound) in [
        ("pointwise_v", "audit_norm_v", "bound_pointwise_v"),
        ("pointwise_eps", "audit_eps", "bound_pointwise_eps"),
        ("ergodic_v", "ergodic_norm_v", "bound_ergodic_v"),
        ("ergodic_eps", "ergodic_eps", "bound_ergodic_eps"),
    ] {
        t.check(Check::Bound { name: name.into(), observed: observed.into(), bound: bound.into() });
    }
    t.check(Check::AtMost { name: "admission".into(), column: "admission_rel_margin".into(), limit: ADMISSION_SLACK });
}

fn hpe_rows(t: &mut Trace, run: &spingarn::hpe::HpeRun<f64>) {
    for r in &run.trace {
        t.push_row(vec![
            int(r.k),
            Some(r.lambda),
            Some(r.norm_z),
            Some(r.norm_v),
            Some(r.eps),
            Some(r.norm_delta),
            Some(r.admission_lhs),
            Some(r.admission_rhs),
            Some(r.admission_rel_margin),
            int(r.best_index),
            int(r.audit_index),
            Some(r.audit_norm_v),
            Some(r.audit_eps),
            Some(r.min_norm_v),
            Some(r.ergodic_norm_v),
            Some(r.ergodic_eps),
            r.dist_solution,
            r.pointwise_bound.map(|b| b.v),
            r.pointwise_bound.map(|b| b.eps),
            r.ergodic_bound.map(|b| b.v),
            r.ergodic_bound.map(|b| b.eps),
        ]);
    }
    let found = run.certificate.as_ref().map(|c| (c.kind.as_str(), c.k, c.index, c.membership.as_str().to_string()));
    certificate_meta(t, found, run.trace.len());
}

fn hpe(cfg: &ExperimentConfig, t: &mut Trace) -> Result<(), CliError> {
    let (op, sol) = match &cfg.problem {
        ProblemSpec::Affine { n, seed } => {
            let (op, z) = fixtures::affine_with_solution::<f64>(*n, &mut ChaCha8Rng::seed_from_u64(*seed));
            (op, Some(z))
        }
        ProblemSpec::AffineInline(d) => affine_from_data(d, "problem")?,
        ProblemSpec::AffineFile { path } => affine_from_data(&crate::config::read_sidecar(path)?, "problem.path")?,
        _ => unreachable!("validated problem/solver pairing"),
    };
    let op: MonotoneOp<f64> = op.into();
    let hcfg = hpe_config(cfg)?;
    t.meta_num("lambda_lower", hcfg.lambda_lower());
    let p = &cfg.params;
    let mut opts = HpeRunOptions::new(p.rho, p.eps, p.k_max)?;
    opts.run_to_k_max = p.run_to_k_max;
    if let Some(s) = sol {
        opts = opts.with_solution(s);
    }
    let z0 = start_point(cfg, op.dim(), Start::Zeros)?;
    let run = run_hpe(&op, &z0, &hcfg, &policy(cfg)?, &opts)?;
    hpe_columns(t);
    fejer_check(t, run.d0);
    hpe_rows(t, &run);
    Ok(())
}

/// HPE run fed with the separating triples, with the variant inequality at
/// its supremal tolerance `σ̂² = 1/5` evaluated alongside.
fn not_variant(cfg: &ExperimentConfig, n: usize, t: &mut Trace) -> Result<(), CliError> {
    let sigma = cfg.sigma();
    let fx = NotVariantFixture::new(sigma).map_err(|e| config_err("params.sigma", e.to_string()))?;
    let op = fx.op(n)?;
    t.meta_num("lambda_lower", fx.lambda());
    t.note("stepsize is fixed to σ² by the construction; the run continues to k_max");
    let hcfg = HpeConfig::constant(sigma, fx.lambda())?;
    let mut opts = HpeRunOptions::new(cfg.params.rho, cfg.params.eps, cfg.params.k_max)?.with_solution(Vector::zeros(n));
    opts.run_to_k_max = true;
    opts.keep_history = true;
    let z0 = start_point(cfg, n, Start::Ones)?;
    let run = run_hpe_with(&z0, &hcfg, &opts, Some(&op), |_, z, _| Ok(fx.triple(z)))?;

    hpe_columns(t);
    fejer_check(t, run.d0);
    hpe_rows(t, &run);
    t.column("hpe_equality_gap", "|lhs − rhs|/max(lhs, rhs) of the HPE inequality");
    t.column("variant_excess", "(lhs − rhs)/max(lhs, rhs) of the variant inequality at σ̂² = 1/5");
    t.column("z_rel_error", "‖z_k − (1−σ²)^k z_0‖/((1−σ²)^k ‖z_0‖)");
    t.check(Check::AtMost { name: "hpe_equality".into(), column: "hpe_equality_gap".into(), limit: EQUALITY_LIMIT });
    t.check(Check::Above { name: "variant_violated".into(), column: "variant_excess".into(), limit: 0.0 });
    t.check(Check::AtMost { name: "closed_form".into(), column: "z_rel_error".into(), limit: EQUALITY_LIMIT });

    let sigma_hat_sup = (0.2f64).sqrt();
    let contraction = 1.0 - sigma * sigma;
    for (row, (z_prev, triple)) in t.rows.iter_mut().zip(&run.history) {
        let k = row[0].expect("k") as i32;
        let hpe = check_hpe_inequality(z_prev, triple, sigma, 0.0)?;
        let var = check_variant_inequality(z_prev, triple, sigma_hat_sup, 0.0)?;
        let mut z = z_prev.clone();
        z.axpy(-triple.lambda, &triple.v);
        let expected = z0.scaled(contraction.powi(k));
        let err = z.dist(&expected) / expected.norm();
        row.extend([Some(hpe.relative_margin().abs()), Some(var.relative_margin()), Some(err)]);
    }
    Ok(())
}

/// The variant method on its divergent instance. No solution-distance bound
/// applies, so the bound families are present but empty.
fn divergent(cfg: &ExperimentConfig, n: usize, t: &mut Trace) -> Result<(), CliError> {
    let sigma_hat = cfg.params.sigma_hat.expect("validated");
    let fx = DivergentFixture::new(sigma_hat).map_err(|e| config_err("params.sigma_hat", e.to_string()))?;
    t.meta_num("theta", fx.theta);
    t.meta_num("gamma", fx.gamma);
    t.meta_num("alpha", fx.alpha);
    t.meta_num("ratio", fx.ratio);
    t.meta_num("growth", fx.growth());
    t.meta("certificate", "none: the iterates diverge");
    t.note("bounds N/A: the variant tolerance exceeds 1/sqrt(5), where no HPE tolerance covers it, and the operator zero is never approached");

    t.int_column("k", "iteration");
    t.column("norm_z", "‖z_k‖");
    t.column("growth", "‖z_k‖/‖z_{k−1}‖");
    t.column("ratio", "αγ/(α+γ)");
    t.column("variant_lhs", "‖λv_k + z̃_k − z_{k−1}‖² + 2λε_k");
    t.column("variant_rhs", "σ̂²(‖z̃_k − z_{k−1}‖² + ‖λv_k‖²)");
    t.column("variant_equality_gap", "|lhs − rhs|/max(lhs, rhs)");
    t.column("norm_v", "‖v_k‖");
    t.column("bound_pointwise_v", "not applicable");
    t.check(Check::AtMost {
        name: "variant_equality".into(),
        column: "variant_equality_gap".into(),
        limit: VARIANT_EQUALITY_LIMIT,
    });
    t.check(Check::Above { name: "ratio_above_two".into(), column: "ratio".into(), limit: 2.0 });
    t.check(Check::Above { name: "diverges".into(), column: "growth".into(), limit: 1.0 });
    t.check(Check::Bound { name: "pointwise_v".into(), observed: "norm_v".into(), bound: "bound_pointwise_v".into() });

    let z0 = start_point(cfg, n, Start::Ones)?;
    if z0.norm() == 0.0 {
        return Err(config_err("params.start", "the divergent construction needs a nonzero start"));
    }
    let mut z = z0;
    for k in 1..=cfg.params.k_max {
        let triple = fx.triple(&z);
        let adm = check_variant_inequality(&z, &triple, sigma_hat, 0.0)?;
        let mut next = z.clone();
        next.axpy(-triple.lambda, &triple.v);
        if !next.is_finite() {
            return Err(spingarn::Error::NonFinite { context: "divergent iterate" }.into());
        }
        t.push_row(vec![
            int(k),
            Some(next.norm()),
            Some(next.norm() / z.norm()),
            Some(fx.ratio),
            Some(adm.lhs),
            Some(adm.rhs),
            Some(adm.relative_margin().abs()),
            Some(triple.v.norm()),
            None,
        ]);
        z = next;
    }
    Ok(())
}

// ---------------------------------------------------------------- spin

fn spin(cfg: &ExperimentConfig, t: &mut Trace) -> Result<(), CliError> {
    let problem: PartialInverseProblem<f64> = match &cfg.problem {
        ProblemSpec::PartialInverse { n, p, seed } => {
            fixtures::partial_inverse_affine::<f64>(*n, *p, &mut ChaCha8Rng::seed_from_u64(*seed)).0
        }
        ProblemSpec::LineIntersection { a, b, w } => {
            let aw = a[0] * w[0] + a[1] * w[1];
            let pr = fixtures::line_intersection_problem(*a, *b, *w)?;
            // The line meets V = span{w} at (b/⟨a, w⟩)w, where 0 ∈ N_U.
            let x = Vector::new(vec![b / aw * w[0], b / aw * w[1]])?;
            pr.with_solution(x, Vector::zeros(2))?
        }
        _ => unreachable!("validated problem/solver pairing"),
    };
    let algorithm = if cfg.solver == SolverKind::Spin2 { SpinAlgorithm::Spin2 } else { SpinAlgorithm::Spin };
    let p = &cfg.params;
    let mut opts = SpinOptions::new(cfg.sigma(), algorithm, p.rho, p.eps, p.k_max)?.with_policy(policy(cfg)?);
    opts.run_to_k_max = p.run_to_k_max;
    let x0 = start_point(cfg, problem.dim(), Start::Zeros)?;
    let run = run_spin(&problem, &x0, &opts)?;

    t.int_column("k", "iteration");
    t.column("r_primal", "‖P_{V⊥} x̃_k‖");
    t.column("r_dual", "‖P_V u_k‖");
    t.column("r_combined", "‖P_V u_k + P_{V⊥} x̃_k‖");
    t.column("eps", "ε_k");
    t.column("admission_rel_margin", "(lhs − rhs)/max(lhs, rhs) of the relative error criterion, ≤ 0 when admitted");
    t.int_column("best_index", "iterate closest to the stopping tolerances");
    t.int_column("audit_index", "j = argmin_{i≤k} ‖P_V x̃_i + P_{V⊥} u_i − x_{i−1}‖");
    t.column("audit_r_combined", "r_combined at j");
    t.column("audit_eps", "ε_j");
    t.column("min_r_combined", "min_{i≤k} r_combined");
    t.column("ergodic_r_combined", "r_combined of the mean triple");
    t.column("ergodic_eps", "ε^a_k from the transportation formula");
    t.column("dist_solution", "‖x_k − (x* + u*)‖");
    t.column("bound_pointwise_r", "d0/√k·√((1+σ)/(1−σ))");
    t.column("bound_pointwise_eps", "σ²d0²/(2(1−σ²)k)");
    t.column("bound_ergodic_r", "2d0/k");
    t.column("bound_ergodic_eps", "2(1 + σ/√(1−σ²))d0²/k");
    for (name, observed, bound) in [
        ("pointwise_r", "audit_r_combined", "bound_pointwise_r"),
        ("pointwise_eps", "audit_eps", "bound_pointwise_eps"),
        ("ergodic_r", "ergodic_r_combined", "bound_ergodic_r"),
        ("ergodic_eps", "ergodic_eps", "bound_ergodic_eps"),
    ] {
        t.check(Check::Bound { name: name.into(), observed: observed.into(), bound: bound.into() });
    }
    t.check(Check::AtMost { name: "admission".into(), column: "admission_rel_margin".into(), limit: ADMISSION_SLACK });
    fejer_check(t, run.d0);
    if let Some(b) = run.budget {
        t.meta("exact_budget", b.to_string());
        if run.certificate.is_some() && !p.run_to_k_max && cfg.sigma() == 0.0 {
            t.check(Check::AtMost { name: "exact_budget".into(), column: "k".into(), limit: b as f64 });
        }
    }
    for r in &run.trace {
        t.push_row(vec![
            int(r.k),
            Some(r.residuals.r_primal),
            Some(r.residuals.r_dual),
            Some(r.residuals.r_combined),
            Some(r.residuals.eps),
            Some(r.admission_rel_margin),
            int(r.best_index),
            int(r.audit_index),
            Some(r.audit_r_combined),
            Some(r.audit_eps),
            Some(r.min_r_combined),
            Some(r.ergodic.r_combined),
            Some(r.ergodic.eps),
            r.dist_solution,
            r.pointwise_bound.map(|b| b.v),
            r.pointwise_bound.map(|b| b.eps),
            r.ergodic_bound.map(|b| b.v),
            r.ergodic_bound.map(|b| b.eps),
        ]);
    }
    let found = run.certificate.as_ref().map(|c| (c.kind.as_str(), c.k, c.index, c.membership.as_str().to_string()));
    certificate_meta(t, found, p.k_max);
    Ok(())
}

// ---------------------------------------------------------------- split and fb

/// Columns shared by the splitting and forward-backward traces. `u` names
/// the residual vectors (`u` or `u′`), `e` the epsilons.
fn split_columns(t: &mut Trace, u: &str, e: &str) {
    t.int_column("k", "iteration");
    t.column("sum_u", &format!("‖Σ{u}_i‖"));
    t.column("pair", "max_{i,l} ‖x̃_i − x̃_l‖");
    t.column("eps_total", &format!("Σ{e}_i"));
    t.int_column("best_index", "iterate closest to the stopping tolerances");
    t.int_column("audit_index", "j = argmin_{s≤k} Σ_i ‖x̃_{i,s} − x_{s−1}‖²");
    t.column("audit_sum_u", "sum_u at j");
    t.column("audit_pair", "pair at j");
    t.column("audit_eps", "eps_total at j");
    t.column("ergodic_sum_u", &format!("‖Σ{u}^a_i‖ of the per-block means"));
    t.column("ergodic_pair", "max_{i,l} ‖x̃^a_i − x̃^a_l‖");
    t.column("ergodic_eps", &format!("Σ{e}^a_i from the transportation formula"));
}

fn split_bound_columns(t: &mut Trace, scale: &str) {
    t.column("bound_pointwise_sum_u", &format!("√m·d0/√k·√((1+σ)/(1−σ)){scale}"));
    t.column("bound_pointwise_pair", "2d0/√k·√((1+σ)/(1−σ))");
    t.column("bound_pointwise_eps", &format!("σ²d0²/(2(1−σ²)k){scale}"));
    t.column("bound_ergodic_sum_u", &format!("2√m·d0/k{scale}"));
    t.column("bound_ergodic_pair", "4d0/k");
    t.column("bound_ergodic_eps", &format!("2(1 + σ/√(1−σ²))d0²/k{scale}"));
    for (name, observed) in [
        ("pointwise_sum_u", "audit_sum_u"),
        ("pointwise_pair", "audit_pair"),
        ("pointwise_eps", "audit_eps"),
        ("ergodic_sum_u", "ergodic_sum_u"),
        ("ergodic_pair", "ergodic_pair"),
        ("ergodic_eps", "ergodic_eps"),
    ] {
        t.check(Check::Bound { name: name.into(), observed: observed.into(), bound: format!("bound_{name}") });
    }
    t.check(Check::AtMost { name: "y_drift".into(), column: "y_drift".into(), limit: DRIFT_LIMIT });
}

fn residual_cells(r: &SplitResiduals<f64>) -> [Option<f64>; 3] {
    [Some(r.sum_u_norm), Some(r.max_pair_dist), Some(r.eps_total)]
}

fn bound_cells(b: &Option<SumBounds<f64>>) -> [Option<f64>; 6] {
    match b {
        Some(b) => [
            Some(b.pointwise.sum_u),
            Some(b.pointwise.pair),
            Some(b.pointwise.eps),
            Some(b.ergodic.sum_u),
            Some(b.ergodic.pair),
            Some(b.ergodic.eps),
        ],
        None => [None; 6],
    }
}

fn split(cfg: &ExperimentConfig, t: &mut Trace) -> Result<(), CliError> {
    let ProblemSpec::SumAffine { m, n, seed } = cfg.problem else { unreachable!("validated problem/solver pairing") };
    let (problem, _, _) = fixtures::sum_affine::<f64>(m, n, &mut ChaCha8Rng::seed_from_u64(seed));
    let p = &cfg.params;
    let mut opts =
        SumOptions::new(cfg.sigma(), p.rho, p.delta, p.eps, p.k_max)?.with_policy(policy(cfg)?).parallel(p.parallel);
    opts.run_to_k_max = p.run_to_k_max;
    let x0 = start_point(cfg, n, Start::Zeros)?;
    let run = run_sum(&problem, &SplitState::start(x0, m), &opts)?;

    split_columns(t, "u", "ε");
    t.column("admission_rel_margin", "largest block (lhs − rhs)/max(lhs, rhs), ≤ 0 when admitted");
    t.column("y_drift", "‖Σy_i‖");
    t.column("dist_solution", "‖(x_k + y_{i,k})_i − (x* + u*_i)_i‖");
    split_bound_columns(t, "");
    t.check(Check::AtMost { name: "admission".into(), column: "admission_rel_margin".into(), limit: ADMISSION_SLACK });
    fejer_check(t, run.d0);
    if let Some(b) = run.budget {
        t.meta("exact_budget", b.to_string());
    }
    for r in &run.trace {
        let mut row = vec![int(r.k)];
        row.extend(residual_cells(&r.residuals));
        row.extend([int(r.best_index), int(r.audit_index)]);
        row.extend(residual_cells(&r.audit));
        row.extend(residual_cells(&r.ergodic));
        row.extend([Some(r.admission_rel_margin), Some(r.y_drift), r.dist_solution]);
        row.extend(bound_cells(&r.bounds));
        t.push_row(row);
    }
    let found = run.certificate.as_ref().map(|c| (c.kind.as_str(), c.k, c.index, memberships(&c.membership)));
    certificate_meta(t, found, p.k_max);
    Ok(())
}

/// Composite problem named by `spec`, with the cached reference optimum
/// attached when one exists.
pub fn composite_problem(spec: &ProblemSpec) -> Result<CompositeProblem<f64>, CliError> {
    let problem = match spec {
        ProblemSpec::Composite { m, n, phi, seed } => {
            let kind = match phi {
                PhiSpec::Zero => PhiKind::Zero,
                PhiSpec::L1 => PhiKind::L1,
                PhiSpec::Box => PhiKind::Box,
            };
            fixtures::composite_quadratic::<f64>(*m, *n, kind, &mut ChaCha8Rng::seed_from_u64(*seed))
        }
        ProblemSpec::ConsensusLeastSquares { m, n, seed } => fixtures::consensus_least_squares::<f64>(*m, *n, *seed)?,
        ProblemSpec::ConsensusLasso { m, n, seed } => fixtures::consensus_lasso::<f64>(*m, *n, *seed)?,
        _ => unreachable!("composite problems only"),
    };
    match reference::lookup(spec) {
        Some(r) => Ok(reference::attach(problem, &r)?),
        None => Ok(problem),
    }
}

fn fb(cfg: &ExperimentConfig, t: &mut Trace) -> Result<(), CliError> {
    let problem = composite_problem(&cfg.problem)?;
    let p = &cfg.params;
    let sigma = cfg.sigma();
    let opts = FbOptions::new(p.rho, p.delta, p.eps, p.k_max)?
        .with_sigma(sigma)
        .map_err(|e| config_err("params.sigma", e.to_string()))?
        .parallel(p.parallel);
    let opts = if p.run_to_k_max { opts.audit() } else { opts };
    let x0 = start_point(cfg, problem.n(), Start::Zeros)?;
    let start = FbState::start(&problem, x0, sigma)?;
    let run = run_fb(&problem, &start, &opts)?;

    t.meta_num("l_sigma", problem.l_sigma());
    t.meta_num("lambda", start.lambda);
    match problem.reference() {
        Some(r) => {
            t.meta_num("reference_value", r.value);
            if let Some(src) = reference::lookup(&cfg.problem) {
                t.meta("reference", src.oracle);
            }
        }
        None => t.note("no reference optimum: objective gap and bound columns are empty"),
    }
    split_columns(t, "u′", "ε′");
    t.column("ergodic_eps_f", "Σε″^a_i, the part charged to f_i");
    t.column("ergodic_eps_phi", "Σ(ε′^a_i − ε″^a_i), the part charged to φ_i");
    t.int_column("eps_split_clamped", "1 when a round-off negative φ part was clamped to 0");
    t.column("objective", "Σ(f_i + φ_i)(x_k)");
    t.column("objective_gap", "objective − reference value");
    t.column("y_drift", "‖Σy_i‖");
    t.column("dist_solution", "‖(x_k + y_{i,k})_i − (x* + λg_i)_i‖");
    split_bound_columns(t, "·L_Σ/σ²");
    fejer_check(t, run.d0);
    if let (Some(tol), Some(_)) = (p.gap_tol, problem.reference()) {
        t.check(Check::FinalAbsAtMost { name: "objective_gap".into(), column: "objective_gap".into(), limit: tol });
    }
    for r in &run.trace {
        let mut row = vec![int(r.k)];
        row.extend(residual_cells(&r.residuals));
        row.extend([int(r.best_index), int(r.audit_index)]);
        row.extend(residual_cells(&r.audit));
        row.extend(residual_cells(&r.ergodic));
        row.extend([
            Some(r.ergodic_eps_f),
            Some(r.ergodic_eps_phi),
            int(r.eps_split_clamped as usize),
            Some(r.objective),
            r.objective_gap,
            Some(r.y_drift),
            r.dist_solution,
        ]);
        row.extend(bound_cells(&r.bounds));
        t.push_row(row);
    }
    let found = run.certificate.as_ref().map(|c| (c.kind.as_str(), c.k, c.index, memberships(&c.membership)));
    if let Some(c) = &run.certificate {
        if c.clamped {
            t.note("the certificate's φ epsilon was clamped from a round-off negative value");
        }
    }
    certificate_meta(t, found, p.k_max);
    Ok(())
}
