//! Immutable, indexed statement collections that queries run against.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::cert::Token;
use crate::logic::builtins::Builtin;
use crate::logic::parse::{check_statement, ParseErrorKind};
use crate::logic::term::{Const, Literal, Statement, Term, Var};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("predicate `{name}` is used with arity {first} and {second}")]
    ArityConflict { name: String, first: usize, second: usize },
    #[error("statement from set {token} expired at {expiry}")]
    Expired { token: Token, expiry: Timestamp },
    #[error("statement {index} still contains $Self")]
    UnresolvedSelf { index: usize },
    #[error("statement {index}: {kind}")]
    Invalid { index: usize, kind: ParseErrorKind },
}

/// Which index answers goal lookups.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum IndexMode {
    /// Candidates by predicate and arity only.
    Primary,
    /// Candidates by predicate, arity and the first explicit argument when
    /// the goal has it bound.
    #[default]
    Secondary,
}

pub(crate) type PredId = u32;
pub(crate) type ConstId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CTerm {
    Var(u32),
    Const(ConstId),
}

#[derive(Clone, Debug)]
pub(crate) enum CLit {
    Atom { pred: PredId, args: Vec<CTerm> },
    /// A goal on a predicate the context never mentions; it has no answers.
    Missing,
    Builtin { b: Builtin, args: Vec<CTerm> },
}

#[derive(Clone, Debug)]
pub(crate) struct Clause {
    /// Speaker first, then the explicit arguments.
    pub head: Vec<CTerm>,
    pub body: Vec<CLit>,
    pub nvars: u32,
}

#[derive(Default, Clone, Debug)]
pub(crate) struct PredEntry {
    pub all: Vec<u32>,
    /// Clauses whose first explicit argument is a variable.
    pub unkeyed: Vec<u32>,
    pub has_rules: bool,
}

/// Statements plus the lookup structures the prover uses.
///
/// The primary index maps `(predicate, arity)` to clauses; the secondary index
/// refines that by the first explicit argument. Both are built in one pass.
#[derive(Clone, Debug, Default)]
pub struct IndexedContext {
    statements: Vec<Statement>,
    pub(crate) clauses: Vec<Clause>,
    pub(crate) pred_ids: HashMap<(Arc<str>, usize), PredId>,
    arities: HashMap<Arc<str>, usize>,
    pub(crate) preds: Vec<PredEntry>,
    secondary: HashMap<(PredId, ConstId), Vec<u32>>,
    pub(crate) consts: Vec<Const>,
    pub(crate) const_ids: HashMap<Const, ConstId>,
    earliest_expiry: Option<Timestamp>,
}

struct VarMap(Vec<Var>);

impl VarMap {
    fn slot(&mut self, v: &Var) -> u32 {
        match self.0.iter().position(|x| x == v) {
            Some(i) => i as u32,
            None => {
                self.0.push(v.clone());
                (self.0.len() - 1) as u32
            }
        }
    }
}

impl IndexedContext {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds both indices. Statements from sets that have expired at `now`
    /// are refused rather than dropped, so callers notice stale input.
    pub fn build(statements: Vec<Statement>, now: Timestamp) -> Result<Self, ContextError> {
        let mut ctx = IndexedContext { statements: Vec::with_capacity(statements.len()), ..Default::default() };
        for (index, st) in statements.into_iter().enumerate() {
            if st.has_self_ref() {
                return Err(ContextError::UnresolvedSelf { index });
            }
            check_statement(&st).map_err(|kind| ContextError::Invalid { index, kind })?;
            if let Some(o) = &st.origin {
                if o.expiry <= now {
                    return Err(ContextError::Expired { token: o.token, expiry: o.expiry });
                }
                ctx.earliest_expiry = Some(ctx.earliest_expiry.map_or(o.expiry, |e| e.min(o.expiry)));
            }
            ctx.add(st)?;
        }
        Ok(ctx)
    }

    fn intern(&mut self, c: &Const) -> ConstId {
        if let Some(&id) = self.const_ids.get(c) {
            return id;
        }
        let id = self.consts.len() as ConstId;
        self.consts.push(c.clone());
        self.const_ids.insert(c.clone(), id);
        id
    }

    fn pred(&mut self, name: &Arc<str>, arity: usize) -> Result<PredId, ContextError> {
        match self.arities.get(name) {
            Some(&a) if a != arity => {
                return Err(ContextError::ArityConflict { name: name.to_string(), first: a, second: arity })
            }
            Some(_) => {}
            None => {
                self.arities.insert(name.clone(), arity);
            }
        }
        let next = self.preds.len() as PredId;
        let id = *self.pred_ids.entry((name.clone(), arity)).or_insert(next);
        if id == next {
            self.preds.push(PredEntry::default());
        }
        Ok(id)
    }

    fn term(&mut self, t: &Term, vars: &mut VarMap) -> CTerm {
        match t {
            Term::Var(v) => CTerm::Var(vars.slot(v)),
            Term::Const(c) => CTerm::Const(self.intern(c)),
            Term::SelfRef => unreachable!("checked before compiling"),
        }
    }

    fn add(&mut self, st: Statement) -> Result<(), ContextError> {
        let mut vars = VarMap(Vec::new());
        let pred = self.pred(&st.head.predicate, st.head.arity())?;
        let head: Vec<CTerm> = st.head.terms().map(|t| self.term(t, &mut vars)).collect();
        let mut body = Vec::with_capacity(st.body.len());
        for lit in &st.body {
            body.push(match lit {
                Literal::Atom(a) => {
                    let pred = self.pred(&a.predicate, a.arity())?;
                    CLit::Atom { pred, args: a.terms().map(|t| self.term(t, &mut vars)).collect() }
                }
                Literal::Builtin(b) => {
                    let kind = Builtin::from_name(&b.name).expect("builtin names are checked with the statement");
                    CLit::Builtin { b: kind, args: b.args.iter().map(|t| self.term(t, &mut vars)).collect() }
                }
            });
        }
        let idx = self.clauses.len() as u32;
        let entry = &mut self.preds[pred as usize];
        entry.all.push(idx);
        entry.has_rules |= !body.is_empty();
        match head.get(1) {
            Some(CTerm::Const(c)) => self.secondary.entry((pred, *c)).or_default().push(idx),
            Some(CTerm::Var(_)) => entry.unkeyed.push(idx),
            None => {}
        }
        self.clauses.push(Clause { head, body, nvars: vars.0.len() as u32 });
        self.statements.push(st);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    /// The earliest expiry among the statements' origin sets, if any.
    pub fn earliest_expiry(&self) -> Option<Timestamp> {
        self.earliest_expiry
    }

    pub(crate) fn const_id(&self, c: &Const) -> Option<ConstId> {
        self.const_ids.get(c).copied()
    }

    pub(crate) fn pred_id(&self, name: &str, arity: usize) -> Option<PredId> {
        self.pred_ids.get(&(Arc::from(name), arity)).copied()
    }

    /// Candidate clause indices for a goal, in one or two slices.
    pub(crate) fn candidates(&self, pred: PredId, first: Option<ConstId>, mode: IndexMode) -> (&[u32], &[u32]) {
        let entry = &self.preds[pred as usize];
        match (mode, first) {
            (IndexMode::Secondary, Some(c)) => {
                let keyed = self.secondary.get(&(pred, c)).map(Vec::as_slice).unwrap_or(&[]);
                (keyed, &entry.unkeyed)
            }
            _ => (&entry.all, &[]),
        }
    }

    /// Statements the chosen index offers for `pred/arity` with an optional
    /// bound first argument. Used to check that both indices agree.
    pub fn lookup(&self, pred: &str, arity: usize, first: Option<&Const>, mode: IndexMode) -> Vec<&Statement> {
        let Some(p) = self.pred_id(pred, arity) else { return Vec::new() };
        let first = match first {
            Some(c) => match self.const_id(c) {
                Some(id) => Some(id),
                // A constant the context never mentions can only match clauses
                // with a variable in that position.
                None if mode == IndexMode::Secondary => {
                    return self.preds[p as usize].unkeyed.iter().map(|&i| &self.statements[i as usize]).collect()
                }
                None => None,
            },
            None => None,
        };
        let (a, b) = self.candidates(p, first, mode);
        a.iter().chain(b).map(|&i| &self.statements[i as usize]).collect()
    }

    /// Number of buckets in the secondary index for `pred/arity`.
    pub fn secondary_buckets(&self, pred: &str, arity: usize) -> Vec<usize> {
        let Some(p) = self.pred_id(pred, arity) else { return Vec::new() };
        let mut sizes: Vec<usize> = self.secondary.iter().filter(|((q, _), _)| *q == p).map(|(_, v)| v.len()).collect();
        sizes.sort_unstable();
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_program;
    use crate::logic::term::Origin;

    const CHAIN: &str = r#"
        p1: delegateCap(p2, obj, read, true).
        p2: delegateCap(p3, obj, read, true).
        p3: delegateCap(p4, obj, read, true).
        p4: delegateCap(p5, obj, read, true).
        p5: delegateCap(p6, obj, read, true).
        p6: delegateCap(p7, obj, read, false).
        me: cap(?S,?O,?P,?D) :- ?Dg: delegateCap(?S,?O,?P,?D), me: cap(?Dg,?O,?P,true).
    "#;

    #[test]
    fn secondary_index_has_one_bucket_per_first_argument() {
        let ctx = IndexedContext::build(parse_program(CHAIN).unwrap(), Timestamp(0)).unwrap();
        assert_eq!(ctx.len(), 7);
        assert_eq!(ctx.secondary_buckets("delegateCap", 4), vec![1; 6]);
        let hit = ctx.lookup("delegateCap", 4, Some(&Const::str("p4")), IndexMode::Secondary);
        assert_eq!(hit.len(), 1);
        assert_eq!(ctx.lookup("delegateCap", 4, Some(&Const::str("p4")), IndexMode::Primary).len(), 6);
    }

    #[test]
    fn empty_context_has_nothing() {
        let ctx = IndexedContext::build(vec![], Timestamp(0)).unwrap();
        assert!(ctx.is_empty());
        assert!(ctx.lookup("p", 1, None, IndexMode::Primary).is_empty());
        assert_eq!(ctx.earliest_expiry(), None);
    }

    #[test]
    fn arity_conflicts_are_rejected() {
        let e = IndexedContext::build(parse_program("a: p(x). a: p(x, y).").unwrap(), Timestamp(0)).unwrap_err();
        assert!(matches!(e, ContextError::ArityConflict { first: 1, second: 2, .. }));
    }

    #[test]
    fn expiry_is_tracked_and_enforced() {
        let mk = |t: u8, e: i64| Arc::new(Origin { token: Token::from_bytes([t; 32]), expiry: Timestamp(e) });
        let prog = parse_program("a: p(x). a: p(y).").unwrap();
        let sts: Vec<_> = prog.iter().cloned().zip([mk(1, 50), mk(2, 30)]).map(|(s, o)| s.with_origin(o)).collect();
        let ctx = IndexedContext::build(sts.clone(), Timestamp(10)).unwrap();
        assert_eq!(ctx.earliest_expiry(), Some(Timestamp(30)));
        assert!(matches!(IndexedContext::build(sts, Timestamp(30)), Err(ContextError::Expired { .. })));
    }

    #[test]
    fn unresolved_self_is_rejected() {
        let e = IndexedContext::build(parse_program("p(x).").unwrap(), Timestamp(0)).unwrap_err();
        assert_eq!(e, ContextError::UnresolvedSelf { index: 0 });
    }
}
