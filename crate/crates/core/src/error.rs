use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("probability {value} for block ({row}, {col}) is outside [0, 1]")]
    ProbabilityOutOfRange { row: usize, col: usize, value: f64 },

    #[error("cluster {cluster} has zero nodes at scale n = {n}")]
    EmptyCluster { cluster: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("β² = {beta2:e} violates the convergence condition β²·‖Γ‖ < 1 (‖Γ‖ = {gamma_norm:e})")]
    ConvergenceCondition { beta2: f64, gamma_norm: f64 },

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("oracle size {n} exceeds the cap {cap}")]
    OracleCap { n: usize, cap: usize },

    #[error("linear system is singular (spectral radius reaches 1/β²)")]
    SingularSystem,

    #[error("requested {requested} roles but the graph has {nodes} nodes")]
    TooManyRoles { requested: usize, nodes: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("basis is not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("subspace dimensions differ: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },

    #[error("assignments have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("assignments use different role counts: {left} vs {right}")]
    RoleCountMismatch { left: usize, right: usize },

    #[error("label {label} at node {node} is outside 0..{roles}")]
    LabelOutOfRange { node: usize, label: usize, roles: usize },

    #[error("true cluster {0} is empty")]
    EmptyTruthCluster(usize),

    #[error("no signal: every eigenvalue is below the floor {floor:e}")]
    NoSignal { floor: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
