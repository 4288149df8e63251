//! The scenario language: a line-oriented description of systems,
//! observers and the interactions between them.
//!
//! ```text
//! system s dim 2
//! state s = (0.6, 0.8)
//! observer O
//! measure O spin-z on s
//! ```

pub mod ast;
pub mod error;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::ScenarioAst;
pub use error::{ParseError, ParseErrorKind, RuntimeError};
pub use interp::{interpret, RunOptions, ScenarioResult, StepOutcome};
pub use parser::parse;
pub use printer::print;
