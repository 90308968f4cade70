//! Datalog with a speaker on every atom.
//!
//! `alice: member(bob, staff).` is a fact alice asserts. Rules may quantify
//! over speakers (`?S: member(?X, ?G)`), which is how policies decide whose
//! statements to believe.

pub mod builtins;
pub mod context;
pub mod ipv4;
pub mod parse;
pub mod solve;
pub mod term;

pub use builtins::{Builtin, BUILTIN_NAMES};
pub use context::{ContextError, IndexMode, IndexedContext};
pub use ipv4::{ipv4_contains, Ipv4Prefix, PrefixError};
pub use parse::{check_statement, parse_program, parse_query, parse_statement, ParseError, ParseErrorKind};
pub use solve::{prove, prove_atom, solve, Answer, Limit, Limits, Proof, SolveError, SolveOptions, SolveOutcome, SolveStats, Trace};
pub use term::{quoted, write_quoted, Atom, BuiltinCall, Const, Literal, Origin, Statement, Term, TermKind, Var};

/// Builds a context from statements, checking origins against `now`.
pub fn build_context(statements: Vec<Statement>, now: crate::time::Timestamp) -> Result<IndexedContext, ContextError> {
    IndexedContext::build(statements, now)
}
