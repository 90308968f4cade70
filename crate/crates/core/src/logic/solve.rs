//! Goal-directed evaluation with tabling.
//!
//! Every call to a predicate that has rules gets a table keyed by its call
//! pattern (bound constants, with free positions abstracted). Tables that call
//! each other recursively form a strongly connected component; its leader
//! re-evaluates the component until no table gains an answer, then marks all
//! of them complete. Predicates that only have facts are answered straight
//! from the index without a table.
//!
//! Cost is reported in steps: one per candidate clause or fact tried, one per
//! table answer consumed, one per builtin call.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::ops::ControlFlow;
use std::time::Instant;

use thiserror::Error;

use crate::cert::Token;
use crate::logic::builtins::Builtin;
use crate::logic::context::{CLit, CTerm, ConstId, IndexMode, IndexedContext, PredId};
use crate::logic::parse::{check_statement, ParseErrorKind};
use crate::logic::term::{Atom, Const, Literal, Statement, Term, Var};

/// One solution: the query's named variables and their values.
pub type Answer = BTreeMap<Var, Const>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    Steps,
    Deadline,
    Answers,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("{limit:?} limit exceeded after {steps} steps")]
    LimitExceeded { limit: Limit, steps: u64 },
    #[error("unknown builtin @{0}")]
    UnknownBuiltin(String),
    #[error("query still contains $Self")]
    UnresolvedSelf,
    #[error("malformed query: {0}")]
    BadQuery(ParseErrorKind),
}

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub max_answers: usize,
    pub max_steps: u64,
    pub deadline: Option<Instant>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_answers: 100_000, max_steps: 50_000_000, deadline: None }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions {
    pub limits: Limits,
    pub index: IndexMode,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub steps: u64,
    pub tables: usize,
    pub table_answers: usize,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub answers: Vec<Answer>,
    pub stats: SolveStats,
}

/// The statements a proof used, and the sets they came from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    /// Indices into [`IndexedContext::statements`], ascending.
    pub statements: Vec<usize>,
    /// Origin tokens of those statements, deduplicated, in first-use order.
    pub origins: Vec<Token>,
}

#[derive(Clone, Debug)]
pub struct Proof {
    pub holds: bool,
    pub bindings: Option<Answer>,
    pub trace: Trace,
    pub stats: SolveStats,
}

/// All answers to a conjunctive query. Fails with [`Limit::Answers`] if there
/// are more distinct answers than `max_answers`.
pub fn solve(ctx: &IndexedContext, query: &[Literal], opts: &SolveOptions) -> Result<SolveOutcome, SolveError> {
    let mut s = Solver::new(ctx, opts);
    let q = s.compile_query(query)?;
    let mut found: BTreeSet<Answer> = BTreeSet::new();
    let max = opts.limits.max_answers;
    let mut over = false;
    let mut env = vec![None; q.vars.len()];
    let mut uses = Vec::new();
    let _ = s.eval_body(&q.body, 0, &mut env, &mut uses, &mut |s, env, _| {
        found.insert(s.project(&q, env));
        if found.len() > max {
            over = true;
            return Ok(ControlFlow::Break(()));
        }
        Ok(ControlFlow::Continue(()))
    })?;
    if over {
        return Err(SolveError::LimitExceeded { limit: Limit::Answers, steps: s.steps });
    }
    let stats = s.stats();
    Ok(SolveOutcome { answers: found.into_iter().collect(), stats })
}

/// Stops at the first answer and reports which statements supported it.
pub fn prove(ctx: &IndexedContext, query: &[Literal], opts: &SolveOptions) -> Result<Proof, SolveError> {
    let mut s = Solver::new(ctx, opts);
    let q = s.compile_query(query)?;
    let mut first: Option<(Answer, Vec<Use>)> = None;
    let mut env = vec![None; q.vars.len()];
    let mut uses = Vec::new();
    let _ = s.eval_body(&q.body, 0, &mut env, &mut uses, &mut |s, env, uses| {
        first = Some((s.project(&q, env), uses.to_vec()));
        Ok(ControlFlow::Break(()))
    })?;
    let stats = s.stats();
    Ok(match first {
        Some((answer, uses)) => Proof { holds: true, bindings: Some(answer), trace: s.trace(&uses), stats },
        None => Proof { holds: false, bindings: None, trace: Trace::default(), stats },
    })
}

/// Convenience for a single atom.
pub fn prove_atom(ctx: &IndexedContext, goal: &Atom, opts: &SolveOptions) -> Result<Proof, SolveError> {
    prove(ctx, &[Literal::Atom(goal.clone())], opts)
}

#[derive(Clone, Copy, Debug)]
enum Use {
    Fact(u32),
    Answer(u32, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    C(ConstId),
    /// Free; the index of the first position holding the same variable.
    V(u8),
}

struct Table {
    answers: Vec<Box<[ConstId]>>,
    seen: HashSet<Box<[ConstId]>>,
    derivations: Vec<(u32, Box<[Use]>)>,
    key: Box<[Key]>,
    pred: PredId,
    complete: bool,
    dfn: usize,
    low: usize,
}

struct Query {
    body: Vec<CLit>,
    vars: Vec<Var>,
}

type Flow = Result<ControlFlow<()>, SolveError>;
type Cont<'k> = dyn FnMut(&mut Solver<'_>, &[Option<ConstId>], &[Use]) -> Flow + 'k;

struct Solver<'c> {
    ctx: &'c IndexedContext,
    mode: IndexMode,
    limits: Limits,
    steps: u64,
    extra: Vec<Const>,
    extra_ids: HashMap<Const, ConstId>,
    tables: Vec<Table>,
    table_ids: HashMap<(PredId, Box<[Key]>), u32>,
    scc: Vec<u32>,
    active: Vec<u32>,
    counter: usize,
    added: u64,
    incomplete_reads: u64,
}

impl<'c> Solver<'c> {
    fn new(ctx: &'c IndexedContext, opts: &SolveOptions) -> Self {
        Solver {
            ctx,
            mode: opts.index,
            limits: opts.limits,
            steps: 0,
            extra: Vec::new(),
            extra_ids: HashMap::new(),
            tables: Vec::new(),
            table_ids: HashMap::new(),
            scc: Vec::new(),
            active: Vec::new(),
            counter: 0,
            added: 0,
            incomplete_reads: 0,
        }
    }

    fn stats(&self) -> SolveStats {
        SolveStats {
            steps: self.steps,
            tables: self.tables.len(),
            table_answers: self.tables.iter().map(|t| t.answers.len()).sum(),
        }
    }

    fn step(&mut self) -> Result<(), SolveError> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            return Err(SolveError::LimitExceeded { limit: Limit::Steps, steps: self.steps });
        }
        if self.steps & 1023 == 0 {
            if let Some(d) = self.limits.deadline {
                if Instant::now() >= d {
                    return Err(SolveError::LimitExceeded { limit: Limit::Deadline, steps: self.steps });
                }
            }
        }
        Ok(())
    }

    fn intern(&mut self, c: &Const) -> ConstId {
        if let Some(id) = self.ctx.const_id(c) {
            return id;
        }
        if let Some(&id) = self.extra_ids.get(c) {
            return id;
        }
        let id = (self.ctx.consts.len() + self.extra.len()) as ConstId;
        self.extra.push(c.clone());
        self.extra_ids.insert(c.clone(), id);
        id
    }

    fn constant(&self, id: ConstId) -> &Const {
        let n = self.ctx.consts.len();
        if (id as usize) < n {
            &self.ctx.consts[id as usize]
        } else {
            &self.extra[id as usize - n]
        }
    }

    fn compile_query(&mut self, query: &[Literal]) -> Result<Query, SolveError> {
        let probe = Statement::rule(Atom::new(Term::str("q"), "query", vec![]), query.to_vec());
        if probe.has_self_ref() {
            return Err(SolveError::UnresolvedSelf);
        }
        if let Err(kind) = check_statement(&probe) {
            return Err(match kind {
                ParseErrorKind::UnknownBuiltin(n) => SolveError::UnknownBuiltin(n),
                k => SolveError::BadQuery(k),
            });
        }
        let mut vars: Vec<Var> = Vec::new();
        let mut term = |s: &mut Self, t: &Term| match t {
            Term::Var(v) => CTerm::Var(match vars.iter().position(|x| x == v) {
                Some(i) => i as u32,
                None => {
                    vars.push(v.clone());
                    (vars.len() - 1) as u32
                }
            }),
            Term::Const(c) => CTerm::Const(s.intern(c)),
            Term::SelfRef => unreachable!(),
        };
        let mut body = Vec::new();
        for lit in query {
            body.push(match lit {
                Literal::Atom(a) => {
                    let args: Vec<CTerm> = a.terms().map(|t| term(self, t)).collect();
                    match self.ctx.pred_id(&a.predicate, a.arity()) {
                        Some(pred) => CLit::Atom { pred, args },
                        None => CLit::Missing,
                    }
                }
                Literal::Builtin(b) => {
                    let kind = Builtin::from_name(&b.name).ok_or_else(|| SolveError::UnknownBuiltin(b.name.to_string()))?;
                    CLit::Builtin { b: kind, args: b.args.iter().map(|t| term(self, t)).collect() }
                }
            });
        }
        Ok(Query { body, vars })
    }

    fn project(&self, q: &Query, env: &[Option<ConstId>]) -> Answer {
        q.vars
            .iter()
            .zip(env)
            .filter(|(v, _)| !v.name().starts_with('_'))
            .filter_map(|(v, c)| c.map(|c| (v.clone(), self.constant(c).clone())))
            .collect()
    }

    /// Binds `t` to `val` under `env`, recording new bindings on `trail`.
    #[inline]
    fn unify(t: CTerm, val: ConstId, env: &mut [Option<ConstId>], trail: &mut Vec<u32>) -> bool {
        match t {
            CTerm::Const(c) => c == val,
            CTerm::Var(v) => match env[v as usize] {
                Some(b) => b == val,
                None => {
                    env[v as usize] = Some(val);
                    trail.push(v);
                    true
                }
            },
        }
    }

    fn undo(env: &mut [Option<ConstId>], trail: &mut Vec<u32>, mark: usize) {
        for v in trail.drain(mark..) {
            env[v as usize] = None;
        }
    }

    fn eval_body(
        &mut self,
        body: &[CLit],
        i: usize,
        env: &mut Vec<Option<ConstId>>,
        uses: &mut Vec<Use>,
        k: &mut Cont<'_>,
    ) -> Flow {
        let Some(lit) = body.get(i) else { return k(self, env, uses) };
        let mut trail = Vec::new();
        match lit {
            CLit::Missing => Ok(ControlFlow::Continue(())),
            CLit::Builtin { b, args } => {
                self.step()?;
                let vals: Vec<Option<ConstId>> = args
                    .iter()
                    .map(|t| match t {
                        CTerm::Const(c) => Some(*c),
                        CTerm::Var(v) => env[*v as usize],
                    })
                    .collect();
                let consts: Vec<Option<&Const>> = vals.iter().map(|v| v.map(|c| self.constant(c))).collect();
                let Some(outs) = b.eval(&consts) else { return Ok(ControlFlow::Continue(())) };
                let outs: Vec<(usize, ConstId)> = outs.iter().map(|(p, c)| (*p, self.intern(c))).collect();
                for (p, c) in outs {
                    if !Self::unify(args[p], c, env, &mut trail) {
                        Self::undo(env, &mut trail, 0);
                        return Ok(ControlFlow::Continue(()));
                    }
                }
                let r = self.eval_body(body, i + 1, env, uses, k);
                Self::undo(env, &mut trail, 0);
                r
            }
            CLit::Atom { pred, args } => {
                let ctx = self.ctx;
                if !ctx.preds[*pred as usize].has_rules {
                    let first = args.get(1).and_then(|t| match t {
                        CTerm::Const(c) => Some(*c),
                        CTerm::Var(v) => env[*v as usize],
                    });
                    let (a, b) = ctx.candidates(*pred, first, self.mode);
                    for &ci in a.iter().chain(b) {
                        self.step()?;
                        let head = &ctx.clauses[ci as usize].head;
                        let ok = head.iter().zip(args).all(|(h, t)| match h {
                            CTerm::Const(c) => Self::unify(*t, *c, env, &mut trail),
                            CTerm::Var(_) => unreachable!("facts are ground"),
                        });
                        if ok {
                            uses.push(Use::Fact(ci));
                            let r = self.eval_body(body, i + 1, env, uses, k);
                            uses.pop();
                            Self::undo(env, &mut trail, 0);
                            if r?.is_break() {
                                return Ok(ControlFlow::Break(()));
                            }
                        } else {
                            Self::undo(env, &mut trail, 0);
                        }
                    }
                    return Ok(ControlFlow::Continue(()));
                }
                let key = Self::call_key(args, env);
                let t = self.call(*pred, key)?;
                let mut j = 0;
                while j < self.tables[t as usize].answers.len() {
                    self.step()?;
                    let ans = self.tables[t as usize].answers[j].clone();
                    if ans.iter().zip(args).all(|(c, a)| Self::unify(*a, *c, env, &mut trail)) {
                        uses.push(Use::Answer(t, j as u32));
                        let r = self.eval_body(body, i + 1, env, uses, k);
                        uses.pop();
                        Self::undo(env, &mut trail, 0);
                        if r?.is_break() {
                            return Ok(ControlFlow::Break(()));
                        }
                    } else {
                        Self::undo(env, &mut trail, 0);
                    }
                    j += 1;
                }
                if !self.tables[t as usize].complete {
                    self.incomplete_reads += 1;
                }
                Ok(ControlFlow::Continue(()))
            }
        }
    }

    fn call_key(args: &[CTerm], env: &[Option<ConstId>]) -> Box<[Key]> {
        let mut key = Vec::with_capacity(args.len());
        for (i, t) in args.iter().enumerate() {
            key.push(match t {
                CTerm::Const(c) => Key::C(*c),
                CTerm::Var(v) => match env[*v as usize] {
                    Some(c) => Key::C(c),
                    None => {
                        let first = args[..i].iter().position(|u| u == t).unwrap_or(i);
                        Key::V(first as u8)
                    }
                },
            });
        }
        key.into_boxed_slice()
    }

    /// Returns the table for a call, evaluating it if it is new.
    fn call(&mut self, pred: PredId, key: Box<[Key]>) -> Result<u32, SolveError> {
        if let Some(&t) = self.table_ids.get(&(pred, key.clone())) {
            let tab = &self.tables[t as usize];
            if !tab.complete {
                let dfn = tab.dfn;
                if let Some(&cur) = self.active.last() {
                    let c = &mut self.tables[cur as usize];
                    c.low = c.low.min(dfn);
                }
            }
            return Ok(t);
        }
        let t = self.tables.len() as u32;
        self.tables.push(Table {
            answers: Vec::new(),
            seen: HashSet::new(),
            derivations: Vec::new(),
            key: key.clone(),
            pred,
            complete: false,
            dfn: self.counter,
            low: self.counter,
        });
        self.counter += 1;
        self.table_ids.insert((pred, key), t);
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.complete_table(t))?;
        Ok(t)
    }

    fn complete_table(&mut self, t: u32) -> Result<(), SolveError> {
        let pos = self.scc.len();
        self.scc.push(t);
        self.active.push(t);
        let (mut reads, mut added) = (self.incomplete_reads, self.added);
        self.eval_table(t)?;
        loop {
            let tab = &self.tables[t as usize];
            if tab.low < tab.dfn {
                break;
            }
            if self.incomplete_reads == reads || self.added == added {
                for &m in &self.scc[pos..] {
                    self.tables[m as usize].complete = true;
                }
                self.scc.truncate(pos);
                break;
            }
            reads = self.incomplete_reads;
            added = self.added;
            let members: Vec<u32> = self.scc[pos..].to_vec();
            for m in members {
                self.active.push(m);
                let r = self.eval_table(m);
                self.active.pop();
                r?;
            }
        }
        self.active.pop();
        let tab = &self.tables[t as usize];
        if !tab.complete {
            let low = tab.low;
            if let Some(&p) = self.active.last() {
                let parent = &mut self.tables[p as usize];
                parent.low = parent.low.min(low);
            }
        }
        Ok(())
    }

    fn eval_table(&mut self, t: u32) -> Result<(), SolveError> {
        let ctx = self.ctx;
        let (pred, key) = {
            let tab = &self.tables[t as usize];
            (tab.pred, tab.key.clone())
        };
        let first = match key.get(1) {
            Some(Key::C(c)) => Some(*c),
            _ => None,
        };
        let (a, b) = ctx.candidates(pred, first, self.mode);
        for &ci in a.iter().chain(b) {
            self.step()?;
            let clause = &ctx.clauses[ci as usize];
            let mut env = vec![None; clause.nvars as usize];
            let mut trail = Vec::new();
            let ok = clause.head.iter().zip(key.iter()).all(|(h, k)| match k {
                Key::C(c) => Self::unify(*h, *c, &mut env, &mut trail),
                Key::V(_) => true,
            });
            if !ok {
                continue;
            }
            let mut uses = Vec::new();
            let _ = self.eval_body(&clause.body, 0, &mut env, &mut uses, &mut |s, env, uses| {
                let mut tuple = Vec::with_capacity(clause.head.len());
                for h in &clause.head {
                    match h {
                        CTerm::Const(c) => tuple.push(*c),
                        CTerm::Var(v) => match env[*v as usize] {
                            Some(c) => tuple.push(c),
                            None => return Ok(ControlFlow::Continue(())),
                        },
                    }
                }
                let matches = key.iter().enumerate().all(|(i, k)| match k {
                    Key::C(c) => tuple[i] == *c,
                    Key::V(j) => tuple[i] == tuple[*j as usize],
                });
                if matches {
                    let tab = &mut s.tables[t as usize];
                    let tuple = tuple.into_boxed_slice();
                    if tab.seen.insert(tuple.clone()) {
                        tab.answers.push(tuple);
                        tab.derivations.push((ci, uses.to_vec().into_boxed_slice()));
                        s.added += 1;
                    }
                }
                Ok(ControlFlow::Continue(()))
            })?;
        }
        Ok(())
    }

    fn trace(&self, top: &[Use]) -> Trace {
        let mut stmts = BTreeSet::new();
        let mut seen = HashSet::new();
        let mut order = Vec::new();
        let mut stack: Vec<Use> = top.iter().rev().copied().collect();
        while let Some(u) = stack.pop() {
            match u {
                Use::Fact(ci) => {
                    if stmts.insert(ci as usize) {
                        order.push(ci as usize);
                    }
                }
                Use::Answer(t, j) => {
                    if !seen.insert((t, j)) {
                        continue;
                    }
                    let (ci, uses) = &self.tables[t as usize].derivations[j as usize];
                    if stmts.insert(*ci as usize) {
                        order.push(*ci as usize);
                    }
                    stack.extend(uses.iter().rev().copied());
                }
            }
        }
        let mut origins = Vec::new();
        let mut seen_tok = HashSet::new();
        for i in order {
            if let Some(o) = &self.ctx.statements()[i].origin {
                if seen_tok.insert(o.token) {
                    origins.push(o.token);
                }
            }
        }
        Trace { statements: stmts.into_iter().collect(), origins }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::{parse_program, parse_query};
    use crate::time::Timestamp;

    fn ctx(src: &str) -> IndexedContext {
        IndexedContext::build(parse_program(src).unwrap(), Timestamp(0)).unwrap()
    }

    fn answers(c: &IndexedContext, q: &str) -> Vec<String> {
        let out = solve(c, &parse_query(q).unwrap(), &SolveOptions::default()).unwrap();
        out.answers
            .iter()
            .map(|a| a.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(","))
            .collect()
    }

    const CAP_RULES: &str = r#"
        me: cap(?S,?O,?P,?D) :- ?Dg: delegateCap(?S,?O,?P,?D), me: cap(?Dg,?O,?P,true).
        me: cap(?S,?O,?P,true) :- ?S: owns(?S,?O), me: priv(?P).
        me: priv(read).
        owner: owns(owner, obj).
    "#;

    #[test]
    fn delegation_chain_answers_leaf_flag() {
        let src = format!(
            "{CAP_RULES}
            owner: delegateCap(p1, obj, read, true).
            p1: delegateCap(p2, obj, read, true).
            p2: delegateCap(p3, obj, read, true).
            p3: delegateCap(p4, obj, read, true).
            p4: delegateCap(p5, obj, read, false)."
        );
        let c = ctx(&src);
        assert_eq!(answers(&c, "me: cap(p5, obj, read, ?D)?"), vec![r#"?D="false""#]);
        assert_eq!(answers(&c, "me: cap(p4, obj, read, ?D)?"), vec![r#"?D="true""#]);
    }

    #[test]
    fn non_delegatable_hop_blocks_the_chain() {
        let src = format!(
            "{CAP_RULES}
            owner: delegateCap(p1, obj, read, true).
            p1: delegateCap(p2, obj, read, false).
            p2: delegateCap(p3, obj, read, true)."
        );
        let c = ctx(&src);
        let q = parse_query("me: cap(p3, obj, read, ?D)?").unwrap();
        assert!(!prove(&c, &q, &SolveOptions::default()).unwrap().holds);
        let q = parse_query("me: cap(p2, obj, read, false)?").unwrap();
        assert!(prove(&c, &q, &SolveOptions::default()).unwrap().holds);
    }

    #[test]
    fn direct_fact_and_empty_context() {
        let c = ctx("p: f(a).");
        assert!(prove(&c, &parse_query("p: f(a)?").unwrap(), &SolveOptions::default()).unwrap().holds);
        assert!(!prove(&c, &parse_query("q: f(a)?").unwrap(), &SolveOptions::default()).unwrap().holds);
        let e = IndexedContext::empty();
        assert!(answers(&e, "p: f(?X)?").is_empty());
    }

    #[test]
    fn left_recursion_terminates() {
        let c = ctx(r#"
            g: path(?X, ?Y) :- g: path(?X, ?Z), g: edge(?Z, ?Y).
            g: path(?X, ?Y) :- g: edge(?X, ?Y).
            g: edge(a, b). g: edge(b, c). g: edge(c, a). g: edge(c, d).
        "#);
        assert_eq!(answers(&c, "g: path(a, ?Y)?").len(), 4);
        assert_eq!(answers(&c, "g: path(?X, ?Y)?").len(), 12);
        assert_eq!(answers(&c, "g: path(?X, ?X)?").len(), 3);
    }

    #[test]
    fn mutual_recursion_reaches_fixpoint() {
        let c = ctx(r#"
            g: even(z).
            g: even(?X) :- g: succ(?Y, ?X), g: odd(?Y).
            g: odd(?X) :- g: succ(?Y, ?X), g: even(?Y).
            g: succ(z, s1). g: succ(s1, s2). g: succ(s2, s3). g: succ(s3, s4).
        "#);
        assert_eq!(answers(&c, "g: even(?X)?"), vec![r#"?X="s2""#, r#"?X="s4""#, r#"?X="z""#]);
    }

    #[test]
    fn builtins_filter_and_bind() {
        let c = ctx(r#"
            r: alloc(as1, ipv4"10.0.0.0/8").
            r: ok(?A, ?P) :- r: claim(?A, ?P), r: alloc(?A, ?Q), @ipv4_contains(?Q, ?P).
            r: claim(as1, ipv4"10.1.0.0/16"). r: claim(as1, ipv4"11.0.0.0/16").
            r: big(?X) :- r: num(?X), @gt(?X, 5).
            r: num(3). r: num(7).
        "#);
        assert_eq!(answers(&c, "r: ok(as1, ?P)?"), vec![r#"?P=ipv4"10.1.0.0/16""#]);
        assert_eq!(answers(&c, "r: big(?X)?"), vec!["?X=7"]);
        assert!(matches!(
            solve(&c, &parse_query("r: num(?X)?").unwrap(), &SolveOptions { limits: Limits { max_answers: 1, ..Default::default() }, ..Default::default() }),
            Err(SolveError::LimitExceeded { limit: Limit::Answers, .. })
        ));
    }

    #[test]
    fn step_limit_is_reported() {
        let c = ctx("g: p(?X) :- g: q(?X). g: q(a). g: q(b). g: q(c).");
        let opts = SolveOptions { limits: Limits { max_steps: 2, ..Default::default() }, ..Default::default() };
        let e = solve(&c, &parse_query("g: p(?X)?").unwrap(), &opts).unwrap_err();
        assert!(matches!(e, SolveError::LimitExceeded { limit: Limit::Steps, .. }));
    }

    #[test]
    fn deadline_is_reported() {
        let mut src = String::from("g: path(?X, ?Y) :- g: edge(?X, ?Y).\ng: path(?X, ?Y) :- g: path(?X, ?Z), g: path(?Z, ?Y).\n");
        for i in 0..200 {
            src.push_str(&format!("g: edge(n{i}, n{}).\n", i + 1));
        }
        let c = ctx(&src);
        let opts = SolveOptions { limits: Limits { deadline: Some(Instant::now()), ..Default::default() }, ..Default::default() };
        let e = solve(&c, &parse_query("g: path(?X, ?Y)?").unwrap(), &opts).unwrap_err();
        assert!(matches!(e, SolveError::LimitExceeded { limit: Limit::Deadline, .. }));
    }

    #[test]
    fn trace_names_supporting_statements() {
        let c = ctx("g: p(?X) :- g: q(?X), g: r(?X). g: q(a). g: r(a). g: r(b).");
        let proof = prove(&c, &parse_query("g: p(?X)?").unwrap(), &SolveOptions::default()).unwrap();
        assert!(proof.holds);
        assert_eq!(proof.trace.statements, vec![0, 1, 2]);
    }

    #[test]
    fn anonymous_variables_are_not_reported() {
        let c = ctx("g: e(a, b). g: e(a, c).");
        assert_eq!(answers(&c, "g: e(?X, ?_)?"), vec![r#"?X="a""#]);
    }

    #[test]
    fn unknown_predicate_in_query_has_no_answers() {
        let c = ctx("g: e(a, b).");
        assert!(answers(&c, "g: nothing(?X), g: e(?X, ?Y)?").is_empty());
        assert!(answers(&c, "g: e(?X, ?Y, ?Z)?").is_empty());
    }
}
