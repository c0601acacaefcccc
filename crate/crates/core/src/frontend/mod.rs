//! Lexing, parsing and pretty-printing of `.landau` sources.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use ast::SyntaxTree;
pub use lexer::{tokenize, Token, TokenClass, TokenKind};
pub use parser::parse;
pub use pretty::pretty_print;

use crate::diag::Diagnostic;

/// Tokenizes and parses a complete source file.
pub fn parse_source(source: &str) -> Result<SyntaxTree, Diagnostic> {
    let tokens = tokenize(source)?;
    parse(&tokens)
}
