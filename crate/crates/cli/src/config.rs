//! Experiment configuration: JSON with a `version` field, builtin problem
//! generators addressed by seed, solver choice and parameters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Largest inline matrix side; bigger operators go in a sidecar file.
pub const MAX_INLINE_DIM: usize = 64;

/// Longest divergent run; the iterates grow by at most a factor 2 per step.
pub const MAX_DIVERGENT_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub problem: ProblemSpec,
    pub solver: SolverKind,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Hpe,
    Variant,
    Spin,
    Spin2,
    Split,
    Fb,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Hpe => "hpe",
            Self::Variant => "variant",
            Self::Spin => "spin",
            Self::Spin2 => "spin2",
            Self::Split => "split",
            Self::Fb => "fb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSpec {
    Zero,
    L1,
    Box,
}

/// Inline affine operator `x ↦ Ax + b`, optionally with a known zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineData {
    pub matrix: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub solution: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Random monotone affine operator with a planted zero.
    Affine { n: usize, seed: u64 },
    AffineInline(AffineData),
    /// [`AffineData`] in a JSON sidecar file, resolved against the config's directory.
    AffineFile { path: PathBuf },
    /// Affine `T` with a planted solution of `x ∈ V`, `u ∈ V⊥`, `u ∈ T(x)`.
    PartialInverse { n: usize, p: usize, seed: u64 },
    /// Normal cone of the line `⟨a, x⟩ = b` in ℝ² with `V = span{w}`.
    LineIntersection { a: [f64; 2], b: f64, w: [f64; 2] },
    SumAffine { m: usize, n: usize, seed: u64 },
    Composite { m: usize, n: usize, phi: PhiSpec, seed: u64 },
    ConsensusLeastSquares { m: usize, n: usize, seed: u64 },
    ConsensusLasso { m: usize, n: usize, seed: u64 },
    /// Scalar multiple of the identity on which variant-admitted triples diverge.
    CounterexampleDivergent {
        #[serde(default = "one")]
        n: usize,
    },
    /// Identity operator with HPE triples that no variant tolerance admits.
    CounterexampleNotVariant {
        #[serde(default = "one")]
        n: usize,
    },
}

fn one() -> usize {
    1
}

impl ProblemSpec {
    pub fn describe(&self) -> String {
        match self {
            Self::Affine { n, seed } => format!("affine n={n} seed={seed}"),
            Self::AffineInline(d) => format!("affine_inline n={}", d.b.len()),
            Self::AffineFile { path } => format!("affine_file path={}", path.display()),
            Self::PartialInverse { n, p, seed } => format!("partial_inverse n={n} p={p} seed={seed}"),
            Self::LineIntersection { a, b, w } => {
                format!("line_intersection a=({:e},{:e}) b={b:e} w=({:e},{:e})", a[0], a[1], w[0], w[1])
            }
            Self::SumAffine { m, n, seed } => format!("sum_affine m={m} n={n} seed={seed}"),
            Self::Composite { m, n, phi, seed } => format!("composite m={m} n={n} phi={phi:?} seed={seed}").to_lowercase(),
            Self::ConsensusLeastSquares { m, n, seed } => format!("consensus_least_squares m={m} n={n} seed={seed}"),
            Self::ConsensusLasso { m, n, seed } => format!("consensus_lasso m={m} n={n} seed={seed}"),
            Self::CounterexampleDivergent { n } => format!("counterexample_divergent n={n}"),
            Self::CounterexampleNotVariant { n } => format!("counterexample_not_variant n={n}"),
        }
    }

    fn solvers(&self) -> &'static [SolverKind] {
        use SolverKind::*;
        match self {
            Self::Affine { .. } | Self::AffineInline(_) | Self::AffineFile { .. } => &[Hpe],
            Self::PartialInverse { .. } | Self::LineIntersection { .. } => &[Spin, Spin2],
            Self::SumAffine { .. } => &[Split],
            Self::Composite { .. } | Self::ConsensusLeastSquares { .. } | Self::ConsensusLasso { .. } => &[Fb],
            Self::CounterexampleDivergent { .. } => &[Variant],
            Self::CounterexampleNotVariant { .. } => &[Hpe],
        }
    }
}

/// Stepsize rule of the HPE solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    Constant(f64),
    /// `λ_k` cycles through the list; the lower bound is its minimum.
    Cyclic(Vec<f64>),
}

impl Default for LambdaRule {
    fn default() -> Self {
        Self::Constant(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InexactSpec {
    /// Initial perturbation relative to the exact proximal displacement, in `[0, 1)`.
    pub fraction: f64,
    pub seed: u64,
}

/// Starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Start {
    Zeros,
    Ones,
    Random { seed: u64, scale: f64 },
    Point(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Relative error tolerance; solver default when absent.
    pub sigma: Option<f64>,
    /// Tolerance of the variant inequality.
    pub sigma_hat: Option<f64>,
    pub lambda: LambdaRule,
    pub rho: f64,
    pub delta: f64,
    pub eps: f64,
    pub k_max: usize,
    pub run_to_k_max: bool,
    pub inexact: Option<InexactSpec>,
    pub parallel: bool,
    pub start: Option<Start>,
    /// Largest final objective gap against a reference optimum (fb only).
    pub gap_tol: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            sigma: None,
            sigma_hat: None,
            lambda: LambdaRule::default(),
            rho: 1e-6,
            delta: 1e-6,
            eps: 1e-6,
            k_max: 1000,
            run_to_k_max: false,
            inexact: None,
            parallel: false,
            start: None,
            gap_tol: None,
        }
    }
}

/// File names, resolved against the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub trace: PathBuf,
    pub report: PathBuf,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { trace: "trace.csv".into(), report: "report.txt".into() }
    }
}

fn bad(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config { field: field.to_string(), message: message.into() }
}

impl ExperimentConfig {
    /// Parses and validates a config file. Sidecar paths are made absolute
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad("config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let ProblemSpec::AffineFile { path: p } = &mut cfg.problem {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| bad("config", e.to_string()))
    }

    /// σ, falling back to the solver default (0.9 for `fb`, 0 otherwise).
    pub fn sigma(&self) -> f64 {
        self.params.sigma.unwrap_or(match self.solver {
            SolverKind::Fb => spingarn::forward_backward::DEFAULT_SIGMA,
            _ => 0.0,
        })
    }

    /// Checks field ranges against the chosen solver's preconditions.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(bad("version", format!("unsupported version {}, expected {CONFIG_VERSION}", self.version)));
        }
        if !self.problem.solvers().contains(&self.solver) {
            let names: Vec<&str> = self.problem.solvers().iter().map(SolverKind::as_str).collect();
            return Err(bad(
                "solver",
                format!("{} cannot run problem {}; use one of {}", self.solver.as_str(), self.problem.describe(), names.join(", ")),
            ));
        }
        self.validate_problem()?;
        let p = &self.params;
        let sigma = self.sigma();
        match self.solver {
            SolverKind::Fb => {
                if !(sigma > 0.0 && sigma < 1.0) {
                    return Err(bad("params.sigma", format!("must lie in (0, 1) for fb, got {sigma}")));
                }
            }
            SolverKind::Variant => {
                let s = p.sigma_hat.ok_or_else(|| bad("params.sigma_hat", "required by the variant solver"))?;
                let lo = 1.0 / 5f64.sqrt();
                if !(s > lo && s < 1.0) {
                    return Err(bad("params.sigma_hat", format!("the divergent construction needs (1/sqrt(5), 1), got {s}")));
                }
            }
            _ if matches!(self.problem, ProblemSpec::CounterexampleNotVariant { .. }) => {
                let lo = 0.4f64.sqrt();
                if !(sigma > lo && sigma < 1.0) {
                    return Err(bad("params.sigma", format!("the construction needs (sqrt(2/5), 1), got {sigma}")));
                }
            }
            _ => {
                if !(sigma >= 0.0 && sigma < 1.0) {
                    return Err(bad("params.sigma", format!("must lie in [0, 1), got {sigma}")));
                }
            }
        }
        if p.sigma_hat.is_some() && self.solver != SolverKind::Variant {
            return Err(bad("params.sigma_hat", "only used by the variant solver"));
        }
        for (name, v) in [("params.rho", p.rho), ("params.delta", p.delta), ("params.eps", p.eps)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(bad(name, format!("must be positive and finite, got {v}")));
            }
        }
        if p.k_max == 0 {
            return Err(bad("params.k_max", "must be at least 1"));
        }
        match &p.lambda {
            LambdaRule::Constant(l) if !(*l > 0.0) || !l.is_finite() => {
                return Err(bad("params.lambda", format!("must be positive and finite, got {l}")));
            }
            LambdaRule::Cyclic(ls) if ls.is_empty() || ls.iter().any(|l| !(*l > 0.0) || !l.is_finite()) => {
                return Err(bad("params.lambda", "cyclic stepsizes must be a nonempty list of positive numbers"));
            }
            LambdaRule::Cyclic(_) if self.solver != SolverKind::Hpe => {
                return Err(bad("params.lambda", "stepsize sequences apply to the hpe solver only"));
            }
            _ => {}
        }
        if let Some(inx) = &p.inexact {
            if !(inx.fraction >= 0.0 && inx.fraction < 1.0) {
                return Err(bad("params.inexact.fraction", format!("must lie in [0, 1), got {}", inx.fraction)));
            }
            if inx.fraction > 0.0 && sigma == 0.0 {
                return Err(bad("params.inexact", "sigma = 0 admits only exact subproblem solutions"));
            }
            if matches!(self.solver, SolverKind::Fb | SolverKind::Variant)
                || matches!(self.problem, ProblemSpec::CounterexampleNotVariant { .. })
            {
                return Err(bad("params.inexact", "this solver/problem fixes its own subproblem solutions"));
            }
        }
        if let Some(g) = p.gap_tol {
            if self.solver != SolverKind::Fb {
                return Err(bad("params.gap_tol", "only used by the fb solver"));
            }
            if !(g > 0.0) || !g.is_finite() {
                return Err(bad("params.gap_tol", format!("must be positive and finite, got {g}")));
            }
        }
        let counterexample =
            matches!(self.problem, ProblemSpec::CounterexampleDivergent { .. } | ProblemSpec::CounterexampleNotVariant { .. });
        if counterexample && p.lambda != LambdaRule::default() {
            return Err(bad("params.lambda", "the counterexamples fix their own stepsizes"));
        }
        if matches!(self.problem, ProblemSpec::CounterexampleDivergent { .. }) && p.k_max > MAX_DIVERGENT_STEPS {
            return Err(bad(
                "params.k_max",
                format!("the divergent iterates overflow past {MAX_DIVERGENT_STEPS} steps, got {}", p.k_max),
            ));
        }
        if let Some(Start::Random { scale, .. }) = &p.start {
            if !scale.is_finite() {
                return Err(bad("params.start.random.scale", "must be finite"));
            }
        }
        if let Some(Start::Point(x)) = &p.start {
            if x.len() != self.dim()? {
                return Err(bad("params.start.point", format!("expected {} coordinates, got {}", self.dim()?, x.len())));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(bad("params.start.point", "coordinates must be finite"));
            }
        }
        Ok(())
    }

    fn validate_problem(&self) -> Result<(), CliError> {
        let positive = |field: &str, v: usize| if v == 0 { Err(bad(field, "must be at least 1")) } else { Ok(()) };
        match &self.problem {
            ProblemSpec::Affine { n, .. } => positive("problem.n", *n),
            ProblemSpec::AffineInline(d) => check_affine_data(d, "problem"),
            ProblemSpec::AffineFile { path } => {
                let d = read_sidecar(path)?;
                check_affine_data_shape(&d, "problem.path")
            }
            ProblemSpec::PartialInverse { n, p, .. } => {
                positive("problem.n", *n)?;
                if *p > *n {
                    return Err(bad("problem.p", format!("subspace dimension {p} exceeds n = {n}")));
                }
                Ok(())
            }
            ProblemSpec::LineIntersection { a, b, w } => {
                if a.iter().chain(w).chain([b]).any(|v| !v.is_finite()) {
                    return Err(bad("problem", "line data must be finite"));
                }
                if a[0] == 0.0 && a[1] == 0.0 {
                    return Err(bad("problem.a", "normal vector must be nonzero"));
                }
                if w[0] == 0.0 && w[1] == 0.0 {
                    return Err(bad("problem.w", "direction must be nonzero"));
                }
                if a[0] * w[0] + a[1] * w[1] == 0.0 {
                    return Err(bad("problem.w", "span{w} is parallel to the line"));
                }
                Ok(())
            }
            ProblemSpec::SumAffine { m, n, .. }
            | ProblemSpec::Composite { m, n, .. }
            | ProblemSpec::ConsensusLeastSquares { m, n, .. }
            | ProblemSpec::ConsensusLasso { m, n, .. } => {
                if *m < 2 {
                    return Err(bad("problem.m", format!("need at least 2 blocks, got {m}")));
                }
                positive("problem.n", *n)
            }
            ProblemSpec::CounterexampleDivergent { n } | ProblemSpec::CounterexampleNotVariant { n } => {
                positive("problem.n", *n)
            }
        }
    }

    /// Dimension of the iterate the start point describes.
    pub fn dim(&self) -> Result<usize, CliError> {
        Ok(match &self.problem {
            ProblemSpec::Affine { n, .. }
            | ProblemSpec::PartialInverse { n, .. }
            | ProblemSpec::SumAffine { n, .. }
            | ProblemSpec::Composite { n, .. }
            | ProblemSpec::ConsensusLeastSquares { n, .. }
            | ProblemSpec::ConsensusLasso { n, .. }
            | ProblemSpec::CounterexampleDivergent { n }
            | ProblemSpec::CounterexampleNotVariant { n } => *n,
            ProblemSpec::AffineInline(d) => d.b.len(),
            ProblemSpec::AffineFile { path } => read_sidecar(path)?.b.len(),
            ProblemSpec::LineIntersection { .. } => 2,
        })
    }
}

pub(crate) fn read_sidecar(path: &Path) -> Result<AffineData, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad("problem.path", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| bad("problem.path", format!("{}: {e}", path.display())))
}

fn check_affine_data(d: &AffineData, field: &str) -> Result<(), CliError> {
    if d.b.len() > MAX_INLINE_DIM {
        return Err(bad(
            &format!("{field}.matrix"),
            format!("inline matrices are limited to {MAX_INLINE_DIM}x{MAX_INLINE_DIM}; use affine_file"),
        ));
    }
    check_affine_data_shape(d, field)
}

fn check_affine_data_shape(d: &AffineData, field: &str) -> Result<(), CliError> {
    let n = d.b.len();
    if n == 0 {
        return Err(bad(&format!("{field}.b"), "must be nonempty"));
    }
    if d.matrix.len() != n || d.matrix.iter().any(|r| r.len() != n) {
        return Err(bad(&format!("{field}.matrix"), format!("must be {n}x{n} to match b")));
    }
    if let Some(s) = &d.solution {
        if s.len() != n {
            return Err(bad(&format!("{field}.solution"), format!("expected {n} coordinates, got {}", s.len())));
        }
    }
    let finite = d.matrix.iter().flatten().chain(&d.b).chain(d.solution.iter().flatten()).all(|v| v.is_finite());
    if !finite {
        return Err(bad(field, "entries must be finite"));
    }
    Ok(())
}
