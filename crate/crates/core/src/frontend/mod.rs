//! Lexing and fault-tolerant parsing of Solidity source.

mod ast;
mod lexer;
mod parser;

pub use ast::{AstNode, Diagnostic, NodeKind, Pos, Severity, Span};
pub use lexer::{
    is_elementary_type, is_keyword, tokenize, tokenize_with_diagnostics, LexToken, TokenKind,
    ADDRESS_HEX_DIGITS,
};
pub use parser::parse_text;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::digest::Digest;

/// Corpus-unique identifier of a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceId(pub u64);

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub id: SourceId,
    pub path: String,
    pub text: String,
    pub content_hash: Digest,
}

impl SourceUnit {
    pub fn new(id: SourceId, path: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let content_hash = Digest::of_text(&text);
        Self {
            id,
            path: path.into(),
            text,
            content_hash,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutput {
    pub root: AstNode,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseOutput {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }
}

/// Parses a source unit. Always yields a `SourceUnitNode` root; problems are
/// reported as diagnostics next to a partial tree.
pub fn parse(unit: &SourceUnit) -> ParseOutput {
    let (root, diagnostics) = parse_text(&unit.text);
    ParseOutput { root, diagnostics }
}
