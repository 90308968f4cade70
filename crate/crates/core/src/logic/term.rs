//! Terms, atoms and statements of Datalog-with-says.
//!
//! Every atom carries a speaker. Internally the prover treats the speaker as
//! argument zero, so `alice: p(x)` and `bob: p(x)` are different facts and a
//! body atom `?S: p(x)` quantifies over who said it.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::cert::{Scid, Token};
use crate::logic::ipv4::Ipv4Prefix;
use crate::time::Timestamp;

/// A logic variable, written `?Name`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

/// A ground value.
///
/// Bare identifiers and quoted strings are the same constant: `read` and
/// `"read"` unify. Integers and IPv4 prefixes are distinct kinds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Const {
    Str(Arc<str>),
    Int(i64),
    Ipv4(Ipv4Prefix),
}

impl Const {
    pub fn str(s: &str) -> Self {
        Const::Str(Arc::from(s))
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Const::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn kind(&self) -> TermKind {
        match self {
            Const::Int(_) => TermKind::Number,
            Const::Ipv4(_) => TermKind::Ipv4Prefix,
            Const::Str(s) => classify_str(s),
        }
    }
}

impl From<&str> for Const {
    fn from(s: &str) -> Self {
        Const::str(s)
    }
}

impl From<String> for Const {
    fn from(s: String) -> Self {
        Const::Str(Arc::from(s))
    }
}

impl From<i64> for Const {
    fn from(v: i64) -> Self {
        Const::Int(v)
    }
}

impl From<Ipv4Prefix> for Const {
    fn from(p: Ipv4Prefix) -> Self {
        Const::Ipv4(p)
    }
}

/// The conventional kind of a term, inferred from its text form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Variable,
    String,
    Number,
    PrincipalId,
    Scid,
    Pathname,
    Ipv4Prefix,
}

fn classify_str(s: &str) -> TermKind {
    if s.parse::<Token>().is_ok() {
        TermKind::PrincipalId
    } else if s.parse::<Scid>().is_ok() {
        TermKind::Scid
    } else if s.contains('/') {
        TermKind::Pathname
    } else {
        TermKind::String
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Const(Const),
    /// `$Self`: the issuing principal, filled in when a set is built.
    SelfRef,
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Var::new(name))
    }

    pub fn str(s: &str) -> Self {
        Term::Const(Const::str(s))
    }

    pub fn int(v: i64) -> Self {
        Term::Const(Const::Int(v))
    }

    pub fn is_ground(&self) -> bool {
        !matches!(self, Term::Var(_))
    }

    pub fn as_const(&self) -> Option<&Const> {
        match self {
            Term::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn kind(&self) -> TermKind {
        match self {
            Term::Var(_) => TermKind::Variable,
            Term::Const(c) => c.kind(),
            Term::SelfRef => TermKind::PrincipalId,
        }
    }

    fn resolve_self(&mut self, me: &Const) {
        if matches!(self, Term::SelfRef) {
            *self = Term::Const(me.clone());
        }
    }
}

impl From<Const> for Term {
    fn from(c: Const) -> Self {
        Term::Const(c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub speaker: Term,
    pub predicate: Arc<str>,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(speaker: Term, predicate: &str, args: Vec<Term>) -> Self {
        Atom { speaker, predicate: Arc::from(predicate), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// Speaker followed by the explicit arguments.
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        std::iter::once(&self.speaker).chain(self.args.iter())
    }

    pub fn is_ground(&self) -> bool {
        self.terms().all(Term::is_ground)
    }

    fn terms_mut(&mut self) -> impl Iterator<Item = &mut Term> {
        std::iter::once(&mut self.speaker).chain(self.args.iter_mut())
    }
}

/// A call to one of the registered builtin predicates, written `@name(args)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BuiltinCall {
    pub name: Arc<str>,
    pub args: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Atom(Atom),
    Builtin(BuiltinCall),
}

impl Literal {
    pub fn terms(&self) -> Box<dyn Iterator<Item = &Term> + '_> {
        match self {
            Literal::Atom(a) => Box::new(a.terms()),
            Literal::Builtin(b) => Box::new(b.args.iter()),
        }
    }

    fn terms_mut(&mut self) -> Box<dyn Iterator<Item = &mut Term> + '_> {
        match self {
            Literal::Atom(a) => Box::new(a.terms_mut()),
            Literal::Builtin(b) => Box::new(b.args.iter_mut()),
        }
    }

    /// Replaces every `$Self` placeholder with `me`.
    pub fn resolve_self(&mut self, me: &Const) {
        for t in self.terms_mut() {
            t.resolve_self(me);
        }
    }
}

/// Where a statement came from: the token of its set and that set's expiry.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Origin {
    pub token: Token,
    pub expiry: Timestamp,
}

/// A fact (empty body) or a rule.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Statement {
    pub head: Atom,
    pub body: Vec<Literal>,
    pub origin: Option<Arc<Origin>>,
}

impl Statement {
    pub fn fact(head: Atom) -> Self {
        Statement { head, body: Vec::new(), origin: None }
    }

    pub fn rule(head: Atom, body: Vec<Literal>) -> Self {
        Statement { head, body, origin: None }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Replaces every `$Self` placeholder with `me`.
    pub fn resolve_self(&mut self, me: &Const) {
        for t in self.head.terms_mut() {
            t.resolve_self(me);
        }
        for lit in &mut self.body {
            for t in lit.terms_mut() {
                t.resolve_self(me);
            }
        }
    }

    pub fn has_self_ref(&self) -> bool {
        self.head.terms().chain(self.body.iter().flat_map(|l| l.terms())).any(|t| matches!(t, Term::SelfRef))
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        self.head
            .terms()
            .chain(self.body.iter().flat_map(|l| l.terms()))
            .filter_map(|t| match t {
                Term::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn with_origin(mut self, origin: Arc<Origin>) -> Self {
        self.origin = Some(origin);
        self
    }
}

/// Writes `s` as a double-quoted literal using the escapes the parser reads.
pub fn write_quoted(out: &mut impl fmt::Write, s: &str) -> fmt::Result {
    out.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => out.write_str("\\\"")?,
            '\\' => out.write_str("\\\\")?,
            '\n' => out.write_str("\\n")?,
            '\r' => out.write_str("\\r")?,
            '\t' => out.write_str("\\t")?,
            '$' => out.write_str("\\$")?,
            c if c.is_control() => write!(out, "\\u{{{:x}}}", c as u32)?,
            c => out.write_char(c)?,
        }
    }
    out.write_char('"')
}

pub fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    write_quoted(&mut out, s).expect("writing to a String cannot fail");
    out
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Str(s) => write_quoted(f, s),
            Const::Int(v) => write!(f, "{v}"),
            Const::Ipv4(p) => write!(f, "ipv4\"{p}\""),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => v.fmt(f),
            Term::Const(c) => c.fmt(f),
            Term::SelfRef => f.write_str("$Self"),
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    f.write_char('(')?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        fmt::Display::fmt(a, f)?;
    }
    f.write_char(')')
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !matches!(self.speaker, Term::SelfRef) {
            write!(f, "{}: ", self.speaker)?;
        }
        f.write_str(&self.predicate)?;
        write_args(f, &self.args)
    }
}

impl fmt::Display for BuiltinCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}", self.name)?;
        write_args(f, &self.args)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom(a) => a.fmt(f),
            Literal::Builtin(b) => b.fmt(f),
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.head.fmt(f)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                l.fmt(f)?;
            }
        }
        f.write_char('.')
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_escapes_specials() {
        assert_eq!(quoted("a\"b\\c\n$"), r#""a\"b\\c\n\$""#);
        assert_eq!(quoted("héllo"), "\"héllo\"");
    }

    #[test]
    fn kinds_follow_text_conventions() {
        assert_eq!(Const::str("read").kind(), TermKind::String);
        assert_eq!(Const::str("bob:a/b/c").kind(), TermKind::Pathname);
        assert_eq!(Const::Int(3).kind(), TermKind::Number);
        let pid = Token::from_bytes([3; 32]).to_string();
        assert_eq!(Const::str(&pid).kind(), TermKind::PrincipalId);
    }

    #[test]
    fn self_placeholder_is_resolved_everywhere() {
        let mut s = Statement::rule(
            Atom::new(Term::SelfRef, "p", vec![Term::var("X")]),
            vec![Literal::Atom(Atom::new(Term::SelfRef, "q", vec![Term::var("X")]))],
        );
        assert!(s.has_self_ref());
        s.resolve_self(&Const::str("me"));
        assert!(!s.has_self_ref());
        assert_eq!(s.to_string(), r#""me": p(?X) :- "me": q(?X)."#);
    }
}
