//! Error types shared by the whole engine.

use thiserror::Error;

use crate::dsl::ParseError;
use crate::inversion::Verdict;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure mode of the numerical engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series centers differ: {left} vs {right}")]
    CenterMismatch { left: f64, right: f64 },

    #[error("series order {order} exceeds the configured limit {limit}")]
    OrderTooLarge { order: usize, limit: usize },

    #[error("order limit {requested} exceeds the hard ceiling {ceiling}")]
    LimitTooLarge { requested: usize, ceiling: usize },

    #[error("nonfinite value at coefficient index {index}")]
    NonFiniteCoefficient { index: usize },

    #[error("nonfinite parameter: {name}")]
    NonFiniteParameter { name: &'static str },

    #[error("division by a series with zero constant term")]
    DivisionByZeroConstant,

    #[error("{op} requires a positive constant term, got {value}")]
    NonPositiveConstantTerm { op: &'static str, value: f64 },

    #[error("derivative order {k} exceeds series order {order}")]
    DerivativeOrder { k: usize, order: usize },

    #[error("composition mismatch: inner constant term {inner} differs from outer center {center}")]
    CompositionMismatch { inner: f64, center: f64 },

    #[error("expression is singular at {point}")]
    SingularPoint { point: String },

    #[error("variable exponent is not supported in jet evaluation")]
    VariableExponent,

    #[error("expression value at {at} is not real (imaginary part {imag:e})")]
    NonRealValue { at: f64, imag: f64 },

    #[error("{name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("degree {degree} exceeds the cap {cap}")]
    DegreeTooLarge { degree: usize, cap: usize },

    #[error("index {n} exceeds the basis max degree {max}")]
    BasisIndexOutOfRange { n: usize, max: usize },

    #[error("polynomial index {n} exceeds the tabulated degree {table}")]
    NotTabulated { n: usize, table: usize },

    #[error("argument x must be nonnegative, got {x}")]
    NegativeArgument { x: f64 },

    #[error("value overflows the representable range")]
    Overflow,

    #[error("evaluation grid must be finite, strictly increasing and positive")]
    InvalidGrid,

    #[error("coefficient diagnostics verdict is '{verdict}'; pass force to override")]
    DiagnosticsRejected { verdict: Verdict },

    #[error("coefficient series diverges; partial sum {partial}")]
    DivergentSeries { partial: f64 },

    #[error("Bromwich integral did not converge by T={t_max}: last estimates {previous} and {last}")]
    BromwichNotConverged { t_max: f64, previous: f64, last: f64 },

    #[error("rejection sampler exceeded its iteration cap")]
    SamplerStuck,

    #[error("reps must be at least 100, got {0}")]
    TooFewReps(u64),

    #[error(transparent)]
    Parse(#[from] ParseError),
}
