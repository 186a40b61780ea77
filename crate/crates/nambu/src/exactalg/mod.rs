//! Exact rationals and the differential polynomial ring of jets.

mod poly;
mod rational;
mod ring;

pub use poly::{accumulate, DiffPolynomial, Monomial, TermMap};
pub use rational::{ParseRationalError, Rational};
pub use ring::{JetVariable, RingSignature, VarId, BASE_NAMES, MAX_DIM};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlgError {
    #[error("derivative exceeds truncation order: {var}")]
    MaxOrderExceeded { var: String },
    #[error("ring signature mismatch")]
    SignatureMismatch,
    #[error("exact division failed")]
    NotDivisible,
    #[error("division by zero polynomial")]
    DivisionByZero,
    #[error("variable {0} has no counterpart in the target ring")]
    NotRepresentable(String),
    #[error("cannot parse {0:?}")]
    Parse(String),
}
