use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("argument {value} outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("malformed segment: {0}")]
    MalformedSegment(String),

    #[error("incompatible segments: {0}")]
    Incompatible(String),

    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("function `{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("variable `{0}` is not allowed in this context")]
    ForbiddenVariable(String),

    #[error("unbound variable `{0}`")]
    Unbound(String),

    #[error("guarded division: |denominator| = {0:e} below guard")]
    GuardedDivision(f64),

    #[error("delay {value} outside [0, {r}]")]
    DelayOutOfRange { value: f64, r: f64 },

    #[error("fixed-point iteration did not converge at t = {t} after step halving")]
    NonConvergence { t: f64 },

    #[error("solution blew up at t = {t} (|y| = {norm:e})")]
    BlowUp { t: f64, norm: f64 },

    #[error("time {t} outside the computed range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("initial data not in the compatibility set: residual {residual:e} > tol {tol:e}")]
    NotCompatible { residual: f64, tol: f64 },

    #[error("unbounded trajectory: |y| reached {0:e}")]
    Unbounded(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no samples within {0} of the probe phase")]
    NoSamples(f64),

    #[error("insufficient sample length: {0}")]
    InsufficientSample(String),

    #[error("reports have mismatched provenance: {0}")]
    Provenance(String),

    #[error("no root found from any seed")]
    RootNotFound,
}

pub type Result<T> = std::result::Result<T, Error>;
