use thiserror::Error;

/// Errors raised by model validation, belief arithmetic and the oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} must be a probability in [0, 1], got {value}")]
    InvalidProbability { what: &'static str, value: f64 },

    #[error("{what} must be finite and positive, got {value}")]
    InvalidPositive { what: &'static str, value: f64 },

    #[error("symbol {symbol} is outside the alphabet of size {alphabet_size}")]
    SymbolOutOfRange { symbol: usize, alphabet_size: usize },

    #[error("symbol {symbol} has zero probability under every hypothesis the belief supports")]
    ImpossibleObservation { symbol: usize },

    #[error("pmf_{which} has length {len}, expected {expected}")]
    PmfLength {
        which: &'static str,
        len: usize,
        expected: usize,
    },

    #[error("pmf_{which} has an invalid entry {value} at index {index}")]
    PmfEntry {
        which: &'static str,
        index: usize,
        value: f64,
    },

    #[error("pmf_{which} sums to {sum}, expected 1 within 1e-9")]
    PmfSum { which: &'static str, sum: f64 },

    #[error("observation model is uninformative: every symbol has the same probability under both hypotheses")]
    UninformativeModel,

    #[error("distributions have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid step {0} does not divide [0, 1] evenly")]
    GridStep(f64),

    #[error("selected trial {index} does not exist ({available} records)")]
    MissingTrial { index: usize, available: usize },

    #[error(
        "martingale check failed at belief p_theta1 = {p_theta1}: expectation {expected}, deviation {deviation:e}"
    )]
    MartingaleMismatch {
        p_theta1: f64,
        expected: f64,
        deviation: f64,
    },

    #[error("{bound} bound violated by trial seed {seed}: conditional error {error} > {limit}")]
    BoundViolation {
        bound: &'static str,
        seed: u64,
        error: f64,
        limit: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
