//! Differentiation engine.
//!
//! [`Jet`] carries value, first and pure second input partials forward;
//! [`Tape`]/[`Var`] record jet operations and run reverse accumulation to
//! obtain parameter gradients of any scalar built from them.

pub mod elementary;
mod jet;
mod scalar;
mod tape;

pub use jet::{Jet, MAX_INPUT_DIM};
pub use scalar::{JetScalar, Scalar};
pub use tape::{param_gradient, GradientVector, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("input coordinate {index} out of range for dimension {dim} (max {max})", max = MAX_INPUT_DIM)]
    InputIndex { index: usize, dim: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("power domain error: {base}^{exponent}")]
    PowDomain { base: f64, exponent: f64 },
    #[error("parameter {index} referenced but the store holds {len}")]
    MissingParameter { index: usize, len: usize },
}
