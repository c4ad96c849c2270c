use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("p + (N-1) r = {sum} differs from 1 by more than {tol:e}")]
    ConstraintViolated { sum: f64, tol: f64 },

    #[error("p = {p} is below r = {r}; only p >= r is supported")]
    RegimeViolated { p: f64, r: f64 },

    #[error("{name} = {value} is out of range ({expected})")]
    Range {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),

    #[error("series did not reach tolerance {tol:e} within {cap} terms")]
    NonConvergent { tol: f64, cap: usize },

    #[error("Whittle index decreases at n = {n}: W(n) = {prev}, W(n+1) = {next}")]
    MonotonicityViolation { n: u32, prev: f64, next: f64 },

    #[error("relative value iteration stopped after {iterations} sweeps with span {span:e}")]
    NotConverged { iterations: usize, span: f64 },

    #[error("optimal actions are not a single threshold cut (first break at state {0})")]
    NotThreshold(u32),

    #[error("extracted threshold {threshold} exceeds half the truncation length {j_max}")]
    TruncationTooShort { threshold: u32, j_max: u32 },

    #[error("no charge up to {upper} makes state {n} passive")]
    BracketFailure { n: u32, upper: f64 },

    #[error("ladder index {j} exceeds index table length {n_max}")]
    LadderOverflow { j: u32, n_max: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{context}: {source}")]
    Run { context: String, source: Box<Error> },
}

impl Error {
    /// Bad input as opposed to a failure while running.
    pub fn is_config(&self) -> bool {
        match self {
            Error::ConstraintViolated { .. }
            | Error::RegimeViolated { .. }
            | Error::Range { .. }
            | Error::Config(_)
            | Error::Parse(_)
            | Error::Validation(_) => true,
            Error::Run { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

/// `line:column: message` from a JSON error.
pub(crate) fn json_parse_error(err: serde_json::Error) -> Error {
    let full = err.to_string();
    let suffix = format!(" at line {} column {}", err.line(), err.column());
    let message = full.strip_suffix(&suffix).unwrap_or(&full);
    Error::Parse(format!("{}:{}: {message}", err.line(), err.column()))
}
