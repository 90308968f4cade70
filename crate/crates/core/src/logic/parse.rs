//! Text syntax for statements and queries.
//!
//! ```text
//! program   = { statement } ;
//! statement = atom [ ":-" literal { "," literal } ] "." ;
//! query     = literal { "," literal } [ "?" | "." ] ;
//! literal   = atom | "@" ident "(" [ terms ] ")" ;
//! atom      = [ term ":" ] ident "(" [ terms ] ")" ;
//! terms     = term { "," term } ;
//! term      = "?" ident | "$Self" | ident | string | integer | "ipv4" string ;
//! ```
//!
//! An atom without a speaker is spoken by `$Self`. Comments start with `//`
//! or `%` and run to the end of the line.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::logic::builtins::Builtin;
use crate::logic::ipv4::Ipv4Prefix;
use crate::logic::term::{Atom, BuiltinCall, Const, Literal, Statement, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("variable ?{0} in the head is not bound by the body")]
    NotRangeRestricted(String),
    #[error("argument ?{0} of a builtin is not bound by a preceding atom")]
    UnboundBuiltinArg(String),
    #[error("negation is not supported")]
    Negation,
    #[error("function symbols are not supported (`{0}(...)` used as a term)")]
    FunctionSymbol(String),
    #[error("unknown builtin @{0}")]
    UnknownBuiltin(String),
    #[error("builtin @{0} takes {1} arguments")]
    BuiltinArity(String, usize),
    #[error("environment variable ${0} was not interpolated")]
    EnvVar(String),
    #[error("{0}")]
    BadLiteral(String),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Var(String),
    Env(String),
    Str(String),
    Int(i64),
    Ipv4(Ipv4Prefix),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    ColonDash,
    ColonEq,
    Colon,
    At,
    Question,
    Neg,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Var(s) => write!(f, "`?{s}`"),
            Tok::Env(s) => write!(f, "`${s}`"),
            Tok::Str(_) => f.write_str("string"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Ipv4(p) => write!(f, "`ipv4\"{p}\"`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::ColonDash => f.write_str("`:-`"),
            Tok::ColonEq => f.write_str("`:=`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::At => f.write_str("`@`"),
            Tok::Question => f.write_str("`?`"),
            Tok::Neg => f.write_str("negation"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    let (mut line, mut line_start) = (1usize, 0usize);
    while let Some(&(i, c)) = it.peek() {
        let col = src[line_start..i].chars().count() + 1;
        let err = |kind| ParseError { line, col, kind };
        if c == '\n' {
            it.next();
            line += 1;
            line_start = i + 1;
            continue;
        }
        if c.is_whitespace() {
            it.next();
            continue;
        }
        if c == '%' || (c == '/' && src[i..].starts_with("//")) {
            while let Some(&(_, c)) = it.peek() {
                if c == '\n' {
                    break;
                }
                it.next();
            }
            continue;
        }
        let mut push = |tok, end| out.push(Spanned { tok, line, col, start: i, end });
        match c {
            '(' | ')' | '{' | '}' | ',' | '.' | '@' => {
                it.next();
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    _ => Tok::At,
                };
                push(tok, i + 1);
            }
            ':' => {
                it.next();
                match it.peek() {
                    Some(&(_, '-')) => {
                        it.next();
                        push(Tok::ColonDash, i + 2);
                    }
                    Some(&(_, '=')) => {
                        it.next();
                        push(Tok::ColonEq, i + 2);
                    }
                    _ => push(Tok::Colon, i + 1),
                }
            }
            '!' | '~' => {
                it.next();
                push(Tok::Neg, i + 1);
            }
            '\\' if src[i..].starts_with("\\+") => {
                it.next();
                it.next();
                push(Tok::Neg, i + 2);
            }
            '?' | '$' => {
                it.next();
                let start = i + 1;
                let mut end = start;
                while let Some(&(j, c)) = it.peek() {
                    if (j == start && is_ident_start(c)) || (j > start && is_ident_char(c)) {
                        it.next();
                        end = j + c.len_utf8();
                    } else {
                        break;
                    }
                }
                let name = src[start..end].to_string();
                match (c, name.is_empty()) {
                    ('?', true) => push(Tok::Question, i + 1),
                    ('?', false) => push(Tok::Var(name), end),
                    (_, true) => return Err(err(ParseErrorKind::Syntax("`$` must be followed by a name".into()))),
                    (_, false) => push(Tok::Env(name), end),
                }
            }
            '"' => {
                it.next();
                let (s, end) = lex_string(src, &mut it).map_err(|m| err(ParseErrorKind::Syntax(m)))?;
                push(Tok::Str(s), end);
            }
            c if c.is_ascii_digit() || (c == '-' && src[i + 1..].starts_with(|d: char| d.is_ascii_digit())) => {
                it.next();
                let mut end = i + 1;
                while let Some(&(j, d)) = it.peek() {
                    if d.is_ascii_digit() {
                        it.next();
                        end = j + 1;
                    } else {
                        break;
                    }
                }
                let v: i64 = src[i..end]
                    .parse()
                    .map_err(|_| err(ParseErrorKind::BadLiteral(format!("integer `{}` out of range", &src[i..end]))))?;
                push(Tok::Int(v), end);
            }
            c if is_ident_start(c) => {
                let mut end = i;
                while let Some(&(j, c)) = it.peek() {
                    if is_ident_char(c) {
                        it.next();
                        end = j + 1;
                    } else {
                        break;
                    }
                }
                let word = &src[i..end];
                if word == "ipv4" && matches!(it.peek(), Some(&(_, '"'))) {
                    it.next();
                    let (s, end) = lex_string(src, &mut it).map_err(|m| err(ParseErrorKind::Syntax(m)))?;
                    let p: Ipv4Prefix =
                        s.parse().map_err(|e: crate::logic::ipv4::PrefixError| err(ParseErrorKind::BadLiteral(e.to_string())))?;
                    push(Tok::Ipv4(p), end);
                } else {
                    push(Tok::Ident(word.to_string()), end);
                }
            }
            other => return Err(err(ParseErrorKind::Syntax(format!("unexpected character `{other}`")))),
        }
    }
    Ok(out)
}

fn lex_string(
    src: &str,
    it: &mut std::iter::Peekable<std::str::CharIndices<'_>>,
) -> Result<(String, usize), String> {
    let mut s = String::new();
    while let Some((j, c)) = it.next() {
        match c {
            '"' => return Ok((s, j + 1)),
            '\n' => return Err("newline in string literal".into()),
            '\\' => match it.next() {
                Some((_, 'n')) => s.push('\n'),
                Some((_, 'r')) => s.push('\r'),
                Some((_, 't')) => s.push('\t'),
                Some((_, '"')) => s.push('"'),
                Some((_, '\\')) => s.push('\\'),
                Some((_, '$')) => s.push('$'),
                Some((_, 'u')) => {
                    if !matches!(it.next(), Some((_, '{'))) {
                        return Err("expected `{` after \\u".into());
                    }
                    let mut hex = String::new();
                    loop {
                        match it.next() {
                            Some((_, '}')) => break,
                            Some((_, h)) if h.is_ascii_hexdigit() && hex.len() < 6 => hex.push(h),
                            _ => return Err("bad \\u{...} escape".into()),
                        }
                    }
                    let ch = u32::from_str_radix(&hex, 16)
                        .ok()
                        .and_then(char::from_u32)
                        .ok_or("bad \\u{...} escape")?;
                    s.push(ch);
                }
                _ => return Err("unknown escape in string literal".into()),
            },
            c => s.push(c),
        }
    }
    let _ = src;
    Err("unterminated string literal".into())
}

pub(crate) struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    anon: usize,
    eof: (usize, usize),
}

impl Parser {
    pub(crate) fn new(toks: Vec<Spanned>, src: &str) -> Self {
        let line = src.lines().count().max(1);
        let col = src.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
        Parser { toks, pos: 0, anon: 0, eof: (line, col) }
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    pub(crate) fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(crate) fn position(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.col)).unwrap_or(self.eof)
    }

    pub(crate) fn err(&self, kind: ParseErrorKind) -> ParseError {
        let (line, col) = self.position();
        ParseError { line, col, kind }
    }

    fn err_at(&self, tok: usize, kind: ParseErrorKind) -> ParseError {
        let s = &self.toks[tok.min(self.toks.len().saturating_sub(1))];
        ParseError { line: s.line, col: s.col, kind }
    }

    pub(crate) fn unexpected(&self, wanted: &str) -> ParseError {
        let found = self.peek().map(|t| t.to_string()).unwrap_or_else(|| "end of input".into());
        self.err(ParseErrorKind::Syntax(format!("expected {wanted}, found {found}")))
    }

    pub(crate) fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.unexpected(&t.to_string()))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let t = match self.peek() {
            Some(Tok::Var(v)) if v == "_" => {
                self.anon += 1;
                Term::Var(Var(Arc::from(format!("_{}", self.anon))))
            }
            Some(Tok::Var(v)) => Term::var(v),
            Some(Tok::Env(e)) if e == "Self" => Term::SelfRef,
            Some(Tok::Env(e)) => return Err(self.err(ParseErrorKind::EnvVar(e.clone()))),
            Some(Tok::Ident(s)) => {
                if self.peek_at(1) == Some(&Tok::LParen) {
                    return Err(self.err(ParseErrorKind::FunctionSymbol(s.clone())));
                }
                Term::str(s)
            }
            Some(Tok::Str(s)) => Term::str(s),
            Some(Tok::Int(v)) => Term::int(*v),
            Some(Tok::Ipv4(p)) => Term::Const(Const::Ipv4(*p)),
            Some(Tok::Neg) => return Err(self.err(ParseErrorKind::Negation)),
            _ => return Err(self.unexpected("a term")),
        };
        self.pos += 1;
        Ok(t)
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            if self.peek() == Some(&Tok::LParen) {
                let name = match &self.toks[self.pos - 1].tok {
                    Tok::Ident(s) => s.clone(),
                    other => other.to_string(),
                };
                return Err(self.err(ParseErrorKind::FunctionSymbol(name)));
            }
            self.expect(&Tok::Comma)?;
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        if matches!(self.peek(), Some(Tok::Neg)) {
            return Err(self.err(ParseErrorKind::Negation));
        }
        if let Some(Tok::Ident(name)) = self.peek() {
            if name == "not" && matches!(self.peek_at(1), Some(Tok::LParen) | Some(Tok::Ident(_))) {
                return Err(self.err(ParseErrorKind::Negation));
            }
        }
        let speaker = if self.peek_at(1) == Some(&Tok::Colon) {
            let s = self.term()?;
            self.pos += 1;
            s
        } else {
            Term::SelfRef
        };
        let pred = match self.next() {
            Some(Tok::Ident(p)) => p,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("a predicate name"));
            }
        };
        let args = self.args()?;
        Ok(Atom { speaker, predicate: Arc::from(pred), args })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        if self.eat(&Tok::At) {
            let at = self.pos;
            let name = match self.next() {
                Some(Tok::Ident(n)) => n,
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("a builtin name"));
                }
            };
            let b = Builtin::from_name(&name).ok_or_else(|| self.err_at(at, ParseErrorKind::UnknownBuiltin(name.clone())))?;
            let args = self.args()?;
            if args.len() != b.arity() {
                return Err(self.err_at(at, ParseErrorKind::BuiltinArity(name, b.arity())));
            }
            return Ok(Literal::Builtin(BuiltinCall { name: Arc::from(name), args }));
        }
        Ok(Literal::Atom(self.atom()?))
    }

    fn body(&mut self) -> Result<Vec<Literal>, ParseError> {
        let mut body = vec![self.literal()?];
        while self.eat(&Tok::Comma) {
            body.push(self.literal()?);
        }
        Ok(body)
    }

    pub(crate) fn statement(&mut self) -> Result<Statement, ParseError> {
        let start = self.pos;
        let head = self.atom()?;
        let body = if self.eat(&Tok::ColonDash) { self.body()? } else { Vec::new() };
        self.expect(&Tok::Dot)?;
        let st = Statement { head, body, origin: None };
        check_statement(&st).map_err(|k| self.err_at(start, k))?;
        Ok(st)
    }

    pub(crate) fn query(&mut self) -> Result<Vec<Literal>, ParseError> {
        let start = self.pos;
        let body = self.body()?;
        if !self.eat(&Tok::Question) {
            self.eat(&Tok::Dot);
        }
        check_body(&body, &mut HashSet::new()).map_err(|k| self.err_at(start, k))?;
        Ok(body)
    }
}

/// Left-to-right binding analysis over a body. `bound` is extended in place.
fn check_body(body: &[Literal], bound: &mut HashSet<Var>) -> Result<(), ParseErrorKind> {
    for lit in body {
        match lit {
            Literal::Atom(a) => {
                for t in a.terms() {
                    if let Term::Var(v) = t {
                        bound.insert(v.clone());
                    }
                }
            }
            Literal::Builtin(b) => {
                let kind = Builtin::from_name(&b.name).ok_or_else(|| ParseErrorKind::UnknownBuiltin(b.name.to_string()))?;
                if b.args.len() != kind.arity() {
                    return Err(ParseErrorKind::BuiltinArity(b.name.to_string(), kind.arity()));
                }
                for (i, t) in b.args.iter().enumerate() {
                    if let Term::Var(v) = t {
                        if kind.output_positions().contains(&i) {
                            bound.insert(v.clone());
                        } else if !bound.contains(v) {
                            return Err(ParseErrorKind::UnboundBuiltinArg(v.0.to_string()));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Range restriction and builtin safety for a single statement.
pub fn check_statement(st: &Statement) -> Result<(), ParseErrorKind> {
    let mut bound = HashSet::new();
    check_body(&st.body, &mut bound)?;
    for t in st.head.terms() {
        if let Term::Var(v) = t {
            if !bound.contains(v) {
                return Err(ParseErrorKind::NotRangeRestricted(v.0.to_string()));
            }
        }
    }
    Ok(())
}

pub fn parse_program(text: &str) -> Result<Vec<Statement>, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser::new(toks, text);
    let mut out = Vec::new();
    while !p.at_end() {
        out.push(p.statement()?);
    }
    Ok(out)
}

pub fn parse_statement(text: &str) -> Result<Statement, ParseError> {
    let mut v = parse_program(text)?;
    if v.len() != 1 {
        return Err(ParseError { line: 1, col: 1, kind: ParseErrorKind::Syntax(format!("expected one statement, found {}", v.len())) });
    }
    Ok(v.remove(0))
}

pub fn parse_query(text: &str) -> Result<Vec<Literal>, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser::new(toks, text);
    let q = p.query()?;
    if !p.at_end() {
        return Err(p.unexpected("end of query"));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING_ONE: &str =
        "cap(?S,?O,?P,?D) :- ?Dg: delegateCap(?S,?O,?P,?D), cap(?Dg,?O,?P,true).";

    #[test]
    fn capability_rule_parses_with_variable_speaker() {
        let prog = parse_program(LISTING_ONE).unwrap();
        assert_eq!(prog.len(), 1);
        let rule = &prog[0];
        assert_eq!(rule.head.speaker, Term::SelfRef);
        let Literal::Atom(first) = &rule.body[0] else { panic!() };
        assert_eq!(first.speaker, Term::var("Dg"));
        assert_eq!(&*first.predicate, "delegateCap");
        let Literal::Atom(second) = &rule.body[1] else { panic!() };
        assert_eq!(second.args[3], Term::str("true"));
    }

    #[test]
    fn empty_program_is_empty() {
        assert!(parse_program("").unwrap().is_empty());
        assert!(parse_program("  // only a comment\n% another\n").unwrap().is_empty());
    }

    #[test]
    fn head_variables_must_be_bound() {
        let e = parse_program("p(?X) :- q(?Y).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NotRangeRestricted("X".into()));
        let e = parse_program("p(?X).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NotRangeRestricted("X".into()));
        let e = parse_program("?S: p(a) :- q(a).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NotRangeRestricted("S".into()));
    }

    #[test]
    fn negation_and_function_symbols_are_rejected() {
        assert_eq!(parse_program("p(a) :- not q(a).").unwrap_err().kind, ParseErrorKind::Negation);
        assert_eq!(parse_program("p(a) :- \\+ q(a).").unwrap_err().kind, ParseErrorKind::Negation);
        assert_eq!(parse_program("p(a) :- !q(a).").unwrap_err().kind, ParseErrorKind::Negation);
        assert_eq!(
            parse_program("p(f(a)).").unwrap_err().kind,
            ParseErrorKind::FunctionSymbol("f".into())
        );
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_program("p(a).\nq(b) :- r(b)\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        let e = parse_program("p(a).\n  @nope(a, b).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)) || matches!(e.kind, ParseErrorKind::UnknownBuiltin(_)));
        let e = parse_program("p(?X) :- q(?X), @nope(?X, 1).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownBuiltin("nope".into()));
        assert_eq!((e.line, e.col), (1, 18));
    }

    #[test]
    fn builtin_arguments_need_prior_binding() {
        let e = parse_program("p(?X) :- @lt(?X, 3), q(?X).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnboundBuiltinArg("X".into()));
        assert!(parse_program("p(?O) :- q(?S), @root_id(?S, ?O).").is_ok());
    }

    #[test]
    fn literals_of_every_kind() {
        let st = parse_statement(r#"alice: route(ipv4"152.3.136.0/24", -12, "x\ty", plain)."#).unwrap();
        assert_eq!(st.head.speaker, Term::str("alice"));
        assert_eq!(st.head.args[0], Term::Const(Const::Ipv4("152.3.136.0/24".parse().unwrap())));
        assert_eq!(st.head.args[1], Term::int(-12));
        assert_eq!(st.head.args[2], Term::str("x\ty"));
        assert!(parse_program(r#"p(ipv4"10.0.0.1/8")."#).is_err());
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let st = parse_statement("p(?X) :- q(?X, ?_, ?_).").unwrap();
        let Literal::Atom(a) = &st.body[0] else { panic!() };
        assert_ne!(a.args[1], a.args[2]);
    }

    #[test]
    fn uninterpolated_env_vars_are_errors() {
        assert_eq!(parse_program("p($Foo).").unwrap_err().kind, ParseErrorKind::EnvVar("Foo".into()));
        assert!(parse_program("$Self: p(a).").is_ok());
    }

    #[test]
    fn queries_accept_terminators() {
        assert_eq!(parse_query("cap(a, ?O, read, ?D)?").unwrap().len(), 1);
        assert_eq!(parse_query("p(?X), q(?X).").unwrap().len(), 2);
        assert_eq!(parse_query("p(?X), @eq(?X, 1)").unwrap().len(), 2);
        assert!(parse_query("p(?X) q(?X)").is_err());
    }

    #[test]
    fn display_round_trips_through_the_parser() {
        let src = r#""k": p("a\"b", 3, ipv4"10.0.0.0/8") :- ?S: q(?S, "$"), @neq(?S, "k")."#;
        let st = parse_statement(src).unwrap();
        let again = parse_statement(&st.to_string()).unwrap();
        assert_eq!(st, again);
    }
}
