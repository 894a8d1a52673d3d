use thiserror::Error;

/// Errors raised by the operator, solver and certificate layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("weights do not form a convex combination (sum = {sum}, min = {min})")]
    NotConvexCombination { sum: f64, min: f64 },

    #[error("singular or ill-conditioned linear system in {context}")]
    Singular { context: &'static str },

    #[error("operator is not monotone: symmetric part has eigenvalue {min_eigenvalue}")]
    NotMonotone { min_eigenvalue: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("relative error criterion violated{}: lhs {lhs} > rhs {rhs}", block_suffix(*block))]
    Admission { lhs: f64, rhs: f64, block: Option<usize> },

    #[error("inexactness policy unsatisfiable: {0}")]
    PolicyUnsatisfiable(String),

    #[error("ergodic query on an empty state")]
    EmptyErgodic,

    #[error("function value is +infinity at the requested point")]
    InfiniteValue,

    #[error("epsilon certificate is negative ({value}); the supplied vector is not a subgradient")]
    NegativeCertificate { value: f64 },

    #[error("block {block}: eps {eps} exceeds (sigma^2/2)|x~ - x|^2 = {bound}; Lipschitz constant understated")]
    LipschitzUnderstated { block: usize, eps: f64, bound: f64 },

    #[error("state invariant violated: {0}")]
    Invariant(String),
}

fn block_suffix(block: Option<usize>) -> String {
    match block {
        Some(i) => format!(" in block {i}"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
