use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("edge endpoint {0} outside 1..={1}")]
    OutOfRange(usize, usize),
    #[error("expected vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coefficient evaluator {vertex} returned a non-finite value at {point:?}")]
    EvaluationFailure { vertex: usize, point: Vec<f64> },
    #[error("frozen coefficients violate the sign conditions: {0}")]
    FrozenDegenerate(String),
    #[error("coordinate {coord} exceeded blow-up cap {cap} at step {step}")]
    BlowUp { coord: usize, cap: f64, step: usize },
    #[error("vertex {0} is not in N_R")]
    NotInNR(usize),
    #[error("inverse-moment probe requires b0 > 0 for every catalyst, found b0_{0} = 0")]
    PreconditionViolated(usize),
    #[error("empty evaluation grid")]
    EmptyGrid,
    #[error("displacement {0:?} violates the seminorm support rule for coordinate {1}")]
    BadDisplacement(Vec<f64>, usize),
    #[error("norm-equivalence family contains a function with zero weak norm")]
    DegenerateFamily,
    #[error("finite-difference stencil leaves the state space at {0:?}")]
    StencilOutOfDomain(Vec<f64>),
    #[error("perturbation series diverging: ratio {0} > 1 for two consecutive terms")]
    Divergence(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
