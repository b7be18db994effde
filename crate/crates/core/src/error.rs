use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An elementary operation was applied outside its domain (pole, branch
    /// cut, nonpositive logarithm argument, ...).
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("syntax error at byte {offset}: expected {}", expected.join(" | "))]
    Syntax { offset: usize, expected: Vec<String> },

    #[error("unknown variable `{name}` at byte {offset} (expected w1..w{n})")]
    UnknownVariable { name: String, offset: usize, n: usize },

    #[error("arity error: {0}")]
    Arity(String),

    #[error("unknown builtin prepotential `{0}`")]
    UnknownBuiltin(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rank-deficient frame (rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },

    #[error("invalid symplectic form: {0}")]
    InvalidSymplectic(String),

    /// The chart Jacobian is singular: the point is not transversal to the
    /// projection being inverted.
    #[error("singular Jacobian (non-transversal point), relative singular value {ratio:.3e}")]
    SingularJacobian { ratio: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}
