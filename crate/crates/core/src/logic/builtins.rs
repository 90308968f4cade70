//! The closed set of builtin predicates available to logic programs.
//!
//! Builtins are written `@name(args)`. All of them are tests over bound
//! arguments except `@root_id(Scid, Pid)`, which binds `Pid` when it is free.

use std::net::Ipv4Addr;

use crate::cert::Scid;
use crate::logic::ipv4::Ipv4Prefix;
use crate::logic::term::Const;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Ipv4Contains,
    Ipv4InRange,
    RootId,
}

pub const BUILTIN_NAMES: &[&str] =
    &["eq", "neq", "lt", "le", "gt", "ge", "ipv4_contains", "ipv4_in_range", "root_id"];

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "eq" => Builtin::Eq,
            "neq" => Builtin::Neq,
            "lt" => Builtin::Lt,
            "le" => Builtin::Le,
            "gt" => Builtin::Gt,
            "ge" => Builtin::Ge,
            "ipv4_contains" => Builtin::Ipv4Contains,
            "ipv4_in_range" => Builtin::Ipv4InRange,
            "root_id" => Builtin::RootId,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        2
    }

    /// Argument positions that may be unbound at call time.
    pub fn output_positions(self) -> &'static [usize] {
        match self {
            Builtin::RootId => &[1],
            _ => &[],
        }
    }

    /// Evaluates the builtin. `args` holds the bound values, `None` for a
    /// free output position. Returns the values for free positions on success.
    pub fn eval(self, args: &[Option<&Const>]) -> Option<Vec<(usize, Const)>> {
        let a = args.first().copied().flatten()?;
        if self == Builtin::RootId {
            let root = Const::from(a.as_str()?.parse::<Scid>().ok()?.authority().to_string());
            return match args[1] {
                Some(b) if *b == root => Some(vec![]),
                Some(_) => None,
                None => Some(vec![(1, root)]),
            };
        }
        let b = args.get(1).copied().flatten()?;
        let ok = match self {
            Builtin::Eq => a == b,
            Builtin::Neq => a != b,
            Builtin::Lt | Builtin::Le | Builtin::Gt | Builtin::Ge => {
                let ord = match (a, b) {
                    (Const::Int(x), Const::Int(y)) => x.cmp(y),
                    (Const::Str(x), Const::Str(y)) => x.cmp(y),
                    _ => return None,
                };
                match self {
                    Builtin::Lt => ord.is_lt(),
                    Builtin::Le => ord.is_le(),
                    Builtin::Gt => ord.is_gt(),
                    _ => ord.is_ge(),
                }
            }
            Builtin::Ipv4Contains => match (as_prefix(a), as_prefix(b)) {
                (Some(o), Some(i)) => o.contains(&i),
                _ => false,
            },
            Builtin::Ipv4InRange => match (as_addr(a), as_prefix(b)) {
                (Some(addr), Some(p)) => p.contains_addr(addr),
                _ => false,
            },
            Builtin::RootId => unreachable!(),
        };
        ok.then(Vec::new)
    }
}

/// Prefix-typed constants, or strings in `a.b.c.d/len` form. Malformed input
/// makes the builtin fail rather than abort the query.
fn as_prefix(c: &Const) -> Option<Ipv4Prefix> {
    match c {
        Const::Ipv4(p) => Some(*p),
        Const::Str(s) => s.parse().ok(),
        Const::Int(_) => None,
    }
}

fn as_addr(c: &Const) -> Option<Ipv4Addr> {
    match c {
        Const::Str(s) => s.parse().ok(),
        Const::Ipv4(p) if p.len() == 32 => Some(p.addr()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{PrincipalId, Scid};

    fn run(b: Builtin, x: Const, y: Const) -> bool {
        b.eval(&[Some(&x), Some(&y)]).is_some()
    }

    #[test]
    fn comparisons_are_kind_aware() {
        assert!(run(Builtin::Lt, Const::Int(2), Const::Int(10)));
        assert!(!run(Builtin::Lt, Const::str("2"), Const::str("10")));
        assert!(!run(Builtin::Lt, Const::Int(2), Const::str("10")));
        assert!(run(Builtin::Ge, Const::Int(3), Const::Int(3)));
        assert!(run(Builtin::Neq, Const::Int(3), Const::str("3")));
    }

    #[test]
    fn ipv4_builtins_accept_typed_and_string_forms() {
        let outer = Const::Ipv4("10.0.0.0/8".parse().unwrap());
        assert!(run(Builtin::Ipv4Contains, outer.clone(), Const::str("10.2.0.0/16")));
        assert!(!run(Builtin::Ipv4Contains, outer.clone(), Const::str("11.0.0.0/16")));
        assert!(!run(Builtin::Ipv4Contains, outer.clone(), Const::str("garbage")));
        assert!(run(Builtin::Ipv4InRange, Const::str("10.9.9.9"), outer));
    }

    #[test]
    fn root_id_binds_or_checks() {
        let pid = PrincipalId::from_bytes([9; 32]);
        let scid = Const::from(Scid::new(pid).to_string());
        let out = Builtin::RootId.eval(&[Some(&scid), None]).unwrap();
        assert_eq!(out, vec![(1, Const::from(pid.to_string()))]);
        assert!(run(Builtin::RootId, scid.clone(), Const::from(pid.to_string())));
        assert!(!run(Builtin::RootId, scid, Const::str("someone")));
        assert!(Builtin::RootId.eval(&[Some(&Const::str("not-a-scid")), None]).is_none());
    }
}
