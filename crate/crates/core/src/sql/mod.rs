//! The SQL select-statement subset: syntax trees, text parser and
//! unparser, and the XML syntax-tree encoding with its structural validator.

pub mod ast;
mod dtd;
mod encode;
mod lexer;
mod parser;
mod unparse;

use thiserror::Error;

pub use ast::*;
pub use dtd::{validate_tree, Diagnostic, Validation, SYNTAX_TREE_DTD};
pub use encode::{from_xml, to_xml};
pub use parser::{is_reserved, parse_meta_query, parse_sql};
pub(crate) use parser::parse_query_from;
pub use unparse::{quote_ident, unparse_sql};
pub(crate) use unparse::unparse_scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SqlError {
    #[error("syntax error at {line}:{column}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        /// Byte offset into the source text.
        position: usize,
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("invalid syntax tree at {path}: {reason}")]
    InvalidSyntaxTree { path: String, reason: String },
}
