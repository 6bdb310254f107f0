use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel row {row} is not a probability distribution (sum {sum}, min {min})")]
    RowNotStochastic { row: usize, sum: f64, min: f64 },
    #[error("discount {0} is outside the open interval (0, 1)")]
    BadDiscount(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("non-finite parameter vector")]
    NonFiniteTheta,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("power iteration did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("operation requires a {expected} agent, got {found}")]
    WrongVariant {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid reward bounds [{low}, {high}]")]
    BadBounds { low: f64, high: f64 },
    #[error("reward coefficients must satisfy 0 <= p < q (got p = {p}, q = {q})")]
    BadCoefficients { p: f64, q: f64 },
    #[error("cannot step a terminated episode")]
    SteppedTerminal,
    #[error("bias measurement needs at least {need} runs, got {got}")]
    InsufficientRuns { got: usize, need: usize },
    #[error("optimal policy is not unique in state {state} (action-value gap {gap:e})")]
    NonUniqueOptimalPolicy { state: usize, gap: f64 },
    #[error("behavioral state-action chain is not ergodic")]
    NotErgodic,
    #[error("noise autocovariance series diverges (stationary mean norm {mean_norm:e})")]
    SeriesDiverged { mean_norm: f64 },
    #[error("gain {g} does not exceed the stability threshold g0 = {g0}")]
    GainBelowThreshold { g: f64, g0: f64 },
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("empty series")]
    EmptySeries,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("environment build failed: {0}")]
    EnvironmentBuild(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
