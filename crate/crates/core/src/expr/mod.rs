//! A small arithmetic expression language for right-hand sides `f(t, x)`,
//! forcing terms and coefficient sequences.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          // right-associative
//! primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `t` and `x` are the variables (`n` is accepted as an alias of `t` for
//! sequences), `pi` and `e` are constants, and every other bare identifier is
//! a named parameter that must be bound before evaluation.

mod ast;
mod eval;
mod parse;

pub use ast::{BinaryOp, Expression, Node, NodeKind, Span, UnaryOp, Var};
pub use eval::{EvalContext, EvalError, EvalErrorKind};
pub use parse::{parse, parse_bytes, ParseError, ParseErrorKind};
