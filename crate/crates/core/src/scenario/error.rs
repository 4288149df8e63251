use std::fmt;

use thiserror::Error;

use crate::error::Error as EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    UnknownKeyword,
    UnexpectedToken,
    ForwardReference,
    DimensionMismatch,
    Duplicate,
    InvalidValue,
    ZeroNorm,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::UnknownKeyword => "unknown keyword",
            ParseErrorKind::UnexpectedToken => "syntax error",
            ParseErrorKind::ForwardReference => "forward reference",
            ParseErrorKind::DimensionMismatch => "dimension mismatch",
            ParseErrorKind::Duplicate => "duplicate declaration",
            ParseErrorKind::InvalidValue => "invalid value",
            ParseErrorKind::ZeroNorm => "zero norm",
        };
        f.write_str(s)
    }
}

/// First problem found in a scenario source, with a 1-based position.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, line: usize, column: usize, message: String) -> Self {
        Self { kind, line, column, message, expected: Vec::new() }
    }

    pub fn expecting(mut self, expected: &[&str]) -> Self {
        self.expected = expected.iter().map(|s| s.to_string()).collect();
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.column, self.kind, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

/// A contract violation raised while executing a scenario step.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {source}")]
pub struct RuntimeError {
    pub line: usize,
    #[source]
    pub source: EngineError,
}

impl RuntimeError {
    pub fn at(line: usize) -> impl Fn(EngineError) -> RuntimeError {
        move |source| RuntimeError { line, source }
    }
}
