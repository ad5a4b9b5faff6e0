//! Text grammar for expressions and problem files.

mod expr;
mod problem;

pub use expr::{parse_expression, parse_expression_in, parse_permissive, placeholder, to_exp, Scope};
pub use problem::*;

/// A syntax or resolution error with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}
