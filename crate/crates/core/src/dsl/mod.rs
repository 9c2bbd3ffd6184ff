//! The form language: lexer, parser, printer and type checker.
//!
//! A form file is a sequence of one-per-line statements:
//!
//! ```text
//! element = FiniteElement("Lagrange", "triangle", 1)
//! v = TestFunction(element)
//! u = TrialFunction(element)
//! w = Function(element)
//! a = w*dot(grad(v), grad(u))*dx
//! ```

pub mod ast;
pub mod lexer;
mod parser;
mod typecheck;

use thiserror::Error;

pub use ast::{BinOp, Builtin, Expr, FormProgram, FunctionKind, Statement};
pub use lexer::{tokenize, Keyword, Punct, Span, Token, TokenKind};
pub use parser::parse;
pub use typecheck::{typecheck, ArgumentRole, CoefficientInfo, FormExpr, TypedForm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error("{line}:{column}: illegal character `{ch}`")]
    IllegalCharacter { ch: char, line: usize, column: usize },
    #[error("{line}:{column}: unterminated string literal")]
    UnterminatedString { line: usize, column: usize },
    #[error("{line}:{column}: syntax error: expected {expected}, found {found}")]
    SyntaxError {
        line: usize,
        column: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{column}: unsupported construct `{name}`")]
    UnsupportedConstruct { name: String, line: usize, column: usize },
    #[error("{line}:{column}: `{name}` is already defined")]
    DuplicateName { name: String, line: usize, column: usize },
    #[error("{line}:{column}: unknown name `{name}`")]
    UnknownName { name: String, line: usize, column: usize },
    #[error("{line}:{column}: invalid element: {reason}")]
    InvalidElement { line: usize, column: usize, reason: String },
    #[error("rank mismatch in `{op}`: {detail}")]
    RankMismatch { op: &'static str, detail: String },
    #[error("more than one test function declared (`{first}` and `{second}`)")]
    TwoTestFunctions { first: String, second: String },
    #[error("more than one trial function declared (`{first}` and `{second}`)")]
    TwoTrialFunctions { first: String, second: String },
    #[error("the integrand does not contain a test function")]
    MissingTestFunction,
    #[error("the integrand has shape {shape:?}; it must be scalar")]
    NonScalarIntegrand { shape: Vec<usize> },
    #[error("division by an expression of shape {shape:?}")]
    DivisionByNonScalar { shape: Vec<usize> },
    #[error("elements live on different cells ({first} and {second})")]
    CellMismatch { first: String, second: String },
    #[error("unsupported derivative: {0}")]
    UnsupportedDerivative(String),
}

/// Tokenizes and parses a form source.
pub fn parse_source(source: &str) -> Result<FormProgram, DslError> {
    parse(&tokenize(source)?)
}

/// Tokenizes, parses and type checks a form source.
pub fn compile_source(source: &str) -> Result<TypedForm, DslError> {
    typecheck(&parse_source(source)?)
}

/// Pretty-prints a program in a form accepted by [`parse_source`].
pub fn print_program(program: &FormProgram) -> String {
    program.to_string()
}

#[cfg(test)]
mod tests;
