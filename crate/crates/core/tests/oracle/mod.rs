//! Reference evaluator for prover tests: naive bottom-up, semi-naive
//! iteration over plain `Const` tuples. Shares only the term types with the
//! crate; builtins are reimplemented here.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use safe_core::logic::{Atom, BuiltinCall, Const, Literal, Statement, Term, Var};

pub type Fact = (String, Vec<Const>);
pub type Model = HashSet<Fact>;
pub type Binding = BTreeMap<Var, Const>;

fn key(a: &Atom) -> String {
    format!("{}/{}", a.predicate, a.args.len())
}

fn value(t: &Term, b: &Binding) -> Option<Const> {
    match t {
        Term::Const(c) => Some(c.clone()),
        Term::Var(v) => b.get(v).cloned(),
        Term::SelfRef => panic!("oracle input must not contain $Self"),
    }
}

fn match_atom(a: &Atom, tuple: &[Const], b: &Binding) -> Option<Binding> {
    let mut out = b.clone();
    for (t, c) in a.terms().zip(tuple) {
        match t {
            Term::Const(k) if k != c => return None,
            Term::Const(_) => {}
            Term::Var(v) => match out.get(v) {
                Some(x) if x != c => return None,
                Some(_) => {}
                None => {
                    out.insert(v.clone(), c.clone());
                }
            },
            Term::SelfRef => unreachable!(),
        }
    }
    Some(out)
}

fn prefix_bits(c: &Const) -> Option<(u64, u64)> {
    let text = match c {
        Const::Ipv4(p) => p.to_string(),
        Const::Str(s) => s.to_string(),
        Const::Int(_) => return None,
    };
    let (a, l) = text.split_once('/')?;
    let len: u32 = l.parse().ok()?;
    let octets: Vec<u64> = a.split('.').map(|o| o.parse::<u64>().ok().filter(|v| *v < 256)).collect::<Option<_>>()?;
    if octets.len() != 4 || len > 32 {
        return None;
    }
    let addr = octets.iter().fold(0u64, |acc, o| acc * 256 + o);
    let size = 1u64 << (32 - len);
    if addr % size != 0 {
        return None;
    }
    Some((addr, addr + size - 1))
}

fn builtin(b: &BuiltinCall, env: &Binding) -> Vec<Binding> {
    let x = value(&b.args[0], env);
    let y = value(&b.args[1], env);
    let cmp = |x: &Const, y: &Const| match (x, y) {
        (Const::Int(a), Const::Int(b)) => Some(a.cmp(b)),
        (Const::Str(a), Const::Str(b)) => Some(a.cmp(b)),
        _ => None,
    };
    let ok = match (&*b.name, x, y) {
        ("eq", Some(x), Some(y)) => x == y,
        ("neq", Some(x), Some(y)) => x != y,
        ("lt", Some(x), Some(y)) => cmp(&x, &y).is_some_and(|o| o.is_lt()),
        ("le", Some(x), Some(y)) => cmp(&x, &y).is_some_and(|o| o.is_le()),
        ("gt", Some(x), Some(y)) => cmp(&x, &y).is_some_and(|o| o.is_gt()),
        ("ge", Some(x), Some(y)) => cmp(&x, &y).is_some_and(|o| o.is_ge()),
        ("ipv4_contains", Some(x), Some(y)) => match (prefix_bits(&x), prefix_bits(&y)) {
            (Some((olo, ohi)), Some((ilo, ihi))) => olo <= ilo && ihi <= ohi,
            _ => false,
        },
        ("root_id", Some(Const::Str(s)), y) => {
            let Some((root, _)) = s.split_once(':') else { return vec![] };
            let root = Const::str(root);
            return match y {
                Some(y) if y == root => vec![env.clone()],
                Some(_) => vec![],
                None => {
                    let Term::Var(v) = &b.args[1] else { return vec![] };
                    let mut e = env.clone();
                    e.insert(v.clone(), root);
                    vec![e]
                }
            };
        }
        _ => false,
    };
    if ok {
        vec![env.clone()]
    } else {
        vec![]
    }
}

/// All bindings satisfying `body` left to right, where atom `delta_at` (if
/// any) ranges over `delta` and the others over `model`.
fn join(body: &[Literal], model: &Model, delta: Option<(usize, &Model)>) -> Vec<Binding> {
    let mut envs = vec![Binding::new()];
    for (i, lit) in body.iter().enumerate() {
        let mut next = Vec::new();
        for env in &envs {
            match lit {
                Literal::Atom(a) => {
                    let src = match delta {
                        Some((d, m)) if d == i => m,
                        _ => model,
                    };
                    let k = key(a);
                    for (p, tuple) in src.iter() {
                        if *p == k {
                            if let Some(e) = match_atom(a, tuple, env) {
                                next.push(e);
                            }
                        }
                    }
                }
                Literal::Builtin(b) => next.extend(builtin(b, env)),
            }
        }
        envs = next;
    }
    envs
}

fn instantiate(a: &Atom, env: &Binding) -> Fact {
    (key(a), a.terms().map(|t| value(t, env).expect("range-restricted head")).collect())
}

/// The least model of `program`.
pub fn fixpoint(program: &[Statement]) -> Model {
    let mut model: Model = HashSet::new();
    for st in program.iter().filter(|s| s.body.is_empty()) {
        model.insert(instantiate(&st.head, &Binding::new()));
    }
    let rules: Vec<&Statement> = program.iter().filter(|s| !s.body.is_empty()).collect();
    // Rules whose bodies have no atoms fire once.
    for r in &rules {
        if r.body.iter().all(|l| matches!(l, Literal::Builtin(_))) {
            for env in join(&r.body, &model, None) {
                model.insert(instantiate(&r.head, &env));
            }
        }
    }
    let mut delta = model.clone();
    while !delta.is_empty() {
        let mut fresh = Model::new();
        for r in &rules {
            for (i, lit) in r.body.iter().enumerate() {
                if !matches!(lit, Literal::Atom(_)) {
                    continue;
                }
                for env in join(&r.body, &model, Some((i, &delta))) {
                    let f = instantiate(&r.head, &env);
                    if !model.contains(&f) {
                        fresh.insert(f);
                    }
                }
            }
        }
        model.extend(fresh.iter().cloned());
        delta = fresh;
    }
    model
}

/// Answers to a conjunctive query over a model, projected onto the named
/// (non-anonymous) variables.
pub fn query(model: &Model, q: &[Literal]) -> BTreeSet<Binding> {
    join(q, model, None)
        .into_iter()
        .map(|b| b.into_iter().filter(|(v, _)| !v.name().starts_with('_')).collect())
        .collect()
}

pub struct GenConfig {
    pub max_preds: usize,
    pub max_statements: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_preds: 8, max_statements: 60 }
    }
}

const SPEAKERS: &[&str] = &["alice", "bob", "carol"];
const VALUES: &[&str] = &["a", "b", "c", "d", "e"];

fn rand_const<R: Rng>(rng: &mut R) -> Const {
    if rng.random_bool(0.15) {
        Const::Int(rng.random_range(0..4))
    } else {
        Const::str(VALUES.choose(rng).unwrap())
    }
}

/// A random range-restricted program and a query over it.
pub fn random_program<R: Rng>(rng: &mut R, cfg: &GenConfig) -> (Vec<Statement>, Vec<Literal>) {
    let npreds = rng.random_range(1..=cfg.max_preds);
    let arities: Vec<usize> = (0..npreds).map(|_| rng.random_range(0..=3)).collect();
    let nstmts = rng.random_range(1..=cfg.max_statements);
    let mut prog = Vec::with_capacity(nstmts);
    for _ in 0..nstmts {
        let p = rng.random_range(0..npreds);
        let speaker = Term::str(SPEAKERS.choose(rng).unwrap());
        if rng.random_bool(0.55) {
            let args = (0..arities[p]).map(|_| Term::Const(rand_const(rng))).collect();
            prog.push(Statement::fact(Atom::new(speaker, &format!("p{p}"), args)));
            continue;
        }
        let nbody = rng.random_range(1..=3);
        let vars = ["X", "Y", "Z", "W"];
        let mut body = Vec::new();
        let mut bound: Vec<&str> = Vec::new();
        for _ in 0..nbody {
            let q = rng.random_range(0..npreds);
            let sp = if rng.random_bool(0.4) {
                let v = *vars.choose(rng).unwrap();
                bound.push(v);
                Term::var(v)
            } else {
                Term::str(SPEAKERS.choose(rng).unwrap())
            };
            let args = (0..arities[q])
                .map(|_| {
                    if rng.random_bool(0.75) {
                        let v = *vars.choose(rng).unwrap();
                        bound.push(v);
                        Term::var(v)
                    } else {
                        Term::Const(rand_const(rng))
                    }
                })
                .collect();
            body.push(Literal::Atom(Atom::new(sp, &format!("p{q}"), args)));
        }
        if bound.len() >= 2 && rng.random_bool(0.25) {
            let a = *bound.choose(rng).unwrap();
            let b = *bound.choose(rng).unwrap();
            let name = ["neq", "eq", "lt", "ge"].choose(rng).unwrap();
            body.push(Literal::Builtin(BuiltinCall { name: (*name).into(), args: vec![Term::var(a), Term::var(b)] }));
        }
        let args = (0..arities[p])
            .map(|_| {
                if !bound.is_empty() && rng.random_bool(0.8) {
                    Term::var(bound.choose(rng).unwrap())
                } else {
                    Term::Const(rand_const(rng))
                }
            })
            .collect();
        prog.push(Statement::rule(Atom::new(speaker, &format!("p{p}"), args), body));
    }
    let p = rng.random_range(0..npreds);
    let sp = if rng.random_bool(0.5) { Term::var("S") } else { Term::str(SPEAKERS.choose(rng).unwrap()) };
    let args = (0..arities[p])
        .map(|i| if rng.random_bool(0.7) { Term::var(&format!("Q{i}")) } else { Term::Const(rand_const(rng)) })
        .collect();
    (prog, vec![Literal::Atom(Atom::new(sp, &format!("p{p}"), args))])
}
