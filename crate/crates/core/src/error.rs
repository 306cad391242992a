use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Pauli string: {0}")]
    InvalidPauli(String),
    #[error("{0} qubits requested; at most 64 are supported")]
    TooManyQubits(usize),
    #[error("qubit {qubit} out of range for a {n}-qubit circuit")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("unknown circuit family {0:?}")]
    UnknownFamily(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("parameter vector has length {got}, circuit expects {expected}")]
    ThetaLength { expected: usize, got: usize },
    #[error("parameter index {index} out of range (m = {m})")]
    ParamOutOfRange { index: usize, m: usize },
    #[error("encoder block {layer} mixes axes")]
    MixedEncoderAxes { layer: usize },
    #[error("exact propagation needs single-use parameters; shared indices: {0:?}")]
    SharedParameters(Vec<usize>),
    #[error("exact propagation needs rotation multipliers of ±1; parameter {param} has {mult}")]
    UnsupportedMultiplier { param: usize, mult: String },
    #[error("propagation exceeded the node budget of {budget} (use Monte-Carlo estimation instead)")]
    NodeBudget { budget: usize },
    #[error("grid of {n_x} points aliases frequencies up to {omega_max}; need n_x > {}", 2 * omega_max)]
    Aliasing { n_x: usize, omega_max: i64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix has no k = 0 column")]
    MissingZeroColumn,
    #[error("every row is masked (variance below threshold)")]
    AllMasked,
    #[error("reference matrix has zero norm")]
    ZeroNorm,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
