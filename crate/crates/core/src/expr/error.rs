//! Errors raised by expression parsing, evaluation, and substitution.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown identifier `{name}` at {line}:{col}")]
    UnknownIdentifier {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("non-integer exponent at {line}:{col}")]
    NonIntegerExponent { line: usize, col: usize },
    #[error("division by zero at {line}:{col}")]
    DivisionByZero { line: usize, col: usize },
    #[error("substitution produced a zero denominator")]
    SubstitutionZeroDenominator,
    #[error("evaluation hit a zero denominator")]
    EvalZeroDenominator,
    #[error("variable `{name}` has no value here")]
    UnboundVariable { name: String },
}
