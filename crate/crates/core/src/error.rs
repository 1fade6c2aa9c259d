use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("probability {p} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange { p: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value {value} outside validity range: {bound}")]
    OutOfRange { value: f64, bound: &'static str },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("did not converge after {iterations} iterations (max change {max_change})")]
    NonConvergence {
        iterations: usize,
        max_change: f64,
        last_iterate: Vec<f64>,
    },

    #[error("duplicate game id `{0}`")]
    DuplicateGameId(String),

    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("graph is disconnected into {} components: {}", .0.len(), format_components(.0))]
    Disconnected(Vec<Vec<String>>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn format_components(components: &[Vec<String>]) -> String {
    components
        .iter()
        .map(|c| format!("{{{}}}", c.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn check_finite(x: f64, what: &'static str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what))
    }
}
