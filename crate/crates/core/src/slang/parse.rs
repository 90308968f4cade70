//! Script syntax.
//!
//! ```text
//! script   = header { item } ;
//! header   = "safe-script 1" newline ;
//! item     = defenv | defcon | defguard ;
//! defenv   = "defenv" env [ ":-" string ] "." ;
//! defcon   = "defcon" ident params ":-" { let "," } template [ "," "post" ] "." ;
//! defguard = "defguard" ident params ":-" { let "," } block { "," block } "." ;
//! params   = "(" [ var { "," var } ] ")" ;
//! let      = var ":=" expr ;
//! template = "{" { directive | statement } "}" ;
//! block    = "{" { "link" "(" expr ")" "." } query "?" "}" ;
//! directive= ( "label" | "link" | "ttl" ) "(" expr ")" "." ;
//! expr     = string | integer | ipv4 | var | env | ident [ "(" [ expr { "," expr } ] ")" ] ;
//! ```
//!
//! Inside a template, `?Name` refers to a parameter or let binding when one
//! with that name is in scope and is a logic variable otherwise. `$Name`
//! always refers to an environment variable.

use std::collections::{BTreeMap, BTreeSet};

use crate::logic::parse::{lex, ParseError, ParseErrorKind, Spanned, Tok};
use crate::logic::{parse_program, parse_query, Literal, Statement};
use crate::slang::{ScriptError, Value};

pub const SCRIPT_HEADER: &str = "safe-script 1";

/// Environment variables every invocation has, declared or not.
pub const BUILTIN_ENV: [&str; 2] = ["Self", "BearerRef"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Scid,
    PrincipalId,
    RootId,
    SplitHead,
    SplitTail,
    TokenFromLabel,
    Concat,
    Ipv4,
    Int,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "scid" => Func::Scid,
            "principalID" => Func::PrincipalId,
            "rootID" => Func::RootId,
            "splitHead" => Func::SplitHead,
            "splitTail" => Func::SplitTail,
            "tokenFromLabel" => Func::TokenFromLabel,
            "concat" => Func::Concat,
            "ipv4" => Func::Ipv4,
            "int" => Func::Int,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Scid => "scid",
            Func::PrincipalId => "principalID",
            Func::RootId => "rootID",
            Func::SplitHead => "splitHead",
            Func::SplitTail => "splitTail",
            Func::TokenFromLabel => "tokenFromLabel",
            Func::Concat => "concat",
            Func::Ipv4 => "ipv4",
            Func::Int => "int",
        }
    }

    fn arity(self) -> (usize, usize) {
        match self {
            Func::Scid => (0, 0),
            Func::PrincipalId => (0, 1),
            Func::TokenFromLabel => (2, 2),
            Func::Concat => (1, usize::MAX),
            _ => (1, 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Lit(Value),
    Var(String),
    Env(String),
    Call(Func, Vec<Expr>),
}

/// Template text split around the references that get interpolated.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Piece {
    Text(String),
    Var(String),
    Env(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum TemplateKind {
    Statements,
    Query,
}

/// Logic text with holes. The structure the text parses to with placeholder
/// values is kept so interpolated results can be checked against it.
#[derive(Clone, Debug)]
pub struct Template {
    pub(crate) pieces: Vec<Piece>,
    pub(crate) shape: Vec<(String, usize, usize)>,
}

impl Template {
    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }

    /// Number of statements (or query literals) in the template.
    pub fn len(&self) -> usize {
        self.shape.len()
    }
}

pub(crate) fn statement_shape(st: &[Statement]) -> Vec<(String, usize, usize)> {
    st.iter().map(|s| (s.head.predicate.to_string(), s.head.arity(), s.body.len())).collect()
}

pub(crate) fn query_shape(q: &[Literal]) -> Vec<(String, usize, usize)> {
    q.iter()
        .map(|l| match l {
            Literal::Atom(a) => (a.predicate.to_string(), a.arity(), 0),
            Literal::Builtin(b) => (format!("@{}", b.name), b.args.len(), 0),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Defcon {
    pub name: String,
    pub params: Vec<String>,
    pub lets: Vec<(String, Expr)>,
    pub template: Template,
    pub label: Option<Expr>,
    pub links: Vec<Expr>,
    pub ttl: Option<Expr>,
    pub post: bool,
}

#[derive(Clone, Debug)]
pub struct GuardBlock {
    pub links: Vec<Expr>,
    pub query: Template,
}

#[derive(Clone, Debug)]
pub struct Defguard {
    pub name: String,
    pub params: Vec<String>,
    pub lets: Vec<(String, Expr)>,
    pub blocks: Vec<GuardBlock>,
}

/// A loaded script. Immutable once loaded.
#[derive(Clone, Debug, Default)]
pub struct ScriptModule {
    /// Declared environment variables and their defaults.
    pub env: BTreeMap<String, Option<String>>,
    pub defcons: BTreeMap<String, Defcon>,
    pub defguards: BTreeMap<String, Defguard>,
}

impl ScriptModule {
    /// Entry names, defcons and defguards together, sorted.
    pub fn entries(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.defcons.keys().chain(self.defguards.keys()).map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ScriptError {
    ScriptError::Syntax { line, col, msg: msg.into() }
}

struct Cursor<'a> {
    src: &'a str,
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
    /// `$Name` references with their positions, checked once all defenvs are known.
    env_refs: Vec<(String, usize, usize)>,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.col)).unwrap_or(self.eof)
    }

    fn fail(&self, wanted: &str) -> ScriptError {
        let (line, col) = self.here();
        let found = self.peek().map(|t| t.to_string()).unwrap_or_else(|| "end of input".into());
        syntax(line, col, format!("expected {wanted}, found {found}"))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), ScriptError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.fail(&t.to_string()))
        }
    }

    fn ident(&mut self) -> Result<String, ScriptError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.fail("a name")),
        }
    }

    fn var(&mut self) -> Result<String, ScriptError> {
        match self.peek() {
            Some(Tok::Var(s)) if s != "_" => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.fail("a variable")),
        }
    }

    fn params(&mut self) -> Result<Vec<String>, ScriptError> {
        self.expect(&Tok::LParen)?;
        let mut out: Vec<String> = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            let (line, col) = self.here();
            let v = self.var()?;
            if out.contains(&v) {
                return Err(syntax(line, col, format!("parameter ?{v} appears twice")));
            }
            out.push(v);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    fn expr(&mut self, scope: &BTreeSet<String>) -> Result<Expr, ScriptError> {
        let (line, col) = self.here();
        let e = match self.peek().cloned() {
            Some(Tok::Str(s)) => Expr::Lit(Value::Str(s)),
            Some(Tok::Int(v)) => Expr::Lit(Value::Int(v)),
            Some(Tok::Ipv4(p)) => Expr::Lit(Value::Ipv4(p)),
            Some(Tok::Var(v)) => {
                if !scope.contains(&v) {
                    return Err(syntax(line, col, format!("?{v} is not a parameter or earlier binding")));
                }
                Expr::Var(v)
            }
            Some(Tok::Env(e)) => {
                self.env_refs.push((e.clone(), line, col));
                Expr::Env(e)
            }
            Some(Tok::Ident(name)) if self.peek_at(1) == Some(&Tok::LParen) => {
                let f = Func::from_name(&name).ok_or(ScriptError::UnknownBuiltin { line, col, name: name.clone() })?;
                self.pos += 2;
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        args.push(self.expr(scope)?);
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(&Tok::Comma)?;
                    }
                }
                let (lo, hi) = f.arity();
                if args.len() < lo || args.len() > hi {
                    return Err(syntax(line, col, format!("{} takes {} arguments, got {}", name, arity_text(lo, hi), args.len())));
                }
                return Ok(Expr::Call(f, args));
            }
            Some(Tok::Ident(s)) => Expr::Lit(Value::Str(s)),
            _ => return Err(self.fail("an expression")),
        };
        self.pos += 1;
        Ok(e)
    }

    fn directive(&mut self, scope: &BTreeSet<String>) -> Result<Expr, ScriptError> {
        self.pos += 1;
        self.expect(&Tok::LParen)?;
        let e = self.expr(scope)?;
        self.expect(&Tok::RParen)?;
        self.expect(&Tok::Dot)?;
        Ok(e)
    }

    fn at_directive(&self, names: &[&str]) -> Option<String> {
        match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Ident(n)), Some(Tok::LParen)) if names.contains(&n.as_str()) => Some(n.clone()),
            _ => None,
        }
    }

    /// Consumes logic tokens up to and including `end`, returning them as
    /// template pieces.
    fn logic_run(&mut self, end: &Tok, scope: &BTreeSet<String>, pieces: &mut Vec<Piece>) -> Result<(), ScriptError> {
        loop {
            let Some(sp) = self.toks.get(self.pos).cloned() else {
                return Err(self.fail(&end.to_string()));
            };
            if matches!(sp.tok, Tok::RBrace | Tok::LBrace) {
                return Err(self.fail(&end.to_string()));
            }
            let prev_end = self.toks[self.pos - 1].end;
            push_text(pieces, &self.src[prev_end..sp.start]);
            match &sp.tok {
                Tok::Var(v) if scope.contains(v) => pieces.push(Piece::Var(v.clone())),
                Tok::Env(e) => {
                    self.env_refs.push((e.clone(), sp.line, sp.col));
                    pieces.push(Piece::Env(e.clone()));
                }
                _ => push_text(pieces, &self.src[sp.start..sp.end]),
            }
            self.pos += 1;
            if &sp.tok == end {
                return Ok(());
            }
        }
    }
}

fn arity_text(lo: usize, hi: usize) -> String {
    match (lo, hi) {
        (l, h) if l == h => l.to_string(),
        (l, usize::MAX) => format!("at least {l}"),
        (l, h) => format!("{l} to {h}"),
    }
}

fn push_text(pieces: &mut Vec<Piece>, s: &str) {
    if let Some(Piece::Text(t)) = pieces.last_mut() {
        t.push_str(s);
    } else {
        pieces.push(Piece::Text(s.to_string()));
    }
}

/// Renders pieces with the given substitutions.
pub(crate) fn render(
    pieces: &[Piece],
    var: &mut dyn FnMut(&str) -> Result<String, ScriptError>,
    env: &mut dyn FnMut(&str) -> Result<String, ScriptError>,
) -> Result<String, ScriptError> {
    let mut out = String::new();
    for p in pieces {
        match p {
            Piece::Text(t) => out.push_str(t),
            Piece::Var(v) => out.push_str(&var(v)?),
            Piece::Env(e) => out.push_str(&env(e)?),
        }
    }
    Ok(out)
}

fn placeholder_check(pieces: Vec<Piece>, kind: TemplateKind, line: usize) -> Result<Template, ScriptError> {
    let text = render(&pieces, &mut |_| Ok("\"x\"".into()), &mut |_| Ok("\"x\"".into()))?;
    let relocate = |e: ParseError| ScriptError::from(ParseError { line: line + e.line.saturating_sub(1), col: e.col, kind: e.kind });
    let shape = match kind {
        TemplateKind::Statements => statement_shape(&parse_program(&text).map_err(relocate)?),
        TemplateKind::Query => query_shape(&parse_query(&text).map_err(relocate)?),
    };
    Ok(Template { pieces, shape })
}

/// Blanks out the header line so token offsets still match the source.
fn strip_header(src: &str) -> Result<String, ScriptError> {
    let mut offset = 0;
    for (n, line) in src.split_inclusive('\n').enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with("//") || t.starts_with('%') {
            offset += line.len();
            continue;
        }
        if t != SCRIPT_HEADER {
            let msg = match t.strip_prefix("safe-script") {
                Some(v) => format!("unsupported script version `{}`", v.trim()),
                None => format!("script must start with `{SCRIPT_HEADER}`"),
            };
            return Err(syntax(n + 1, 1, msg));
        }
        let mut out = String::with_capacity(src.len());
        out.push_str(&src[..offset]);
        out.extend(line.chars().map(|c| if c == '\n' { '\n' } else { ' ' }));
        out.push_str(&src[offset + line.len()..]);
        return Ok(out);
    }
    Err(syntax(1, 1, format!("script must start with `{SCRIPT_HEADER}`")))
}

pub fn load_script(source: &str) -> Result<ScriptModule, ScriptError> {
    let src = strip_header(source)?;
    let toks = lex(&src)?;
    let eof = (src.lines().count().max(1), src.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1));
    let mut c = Cursor { src: &src, toks, pos: 0, eof, env_refs: Vec::new() };
    let mut m = ScriptModule::default();
    let mut names: BTreeSet<String> = BTreeSet::new();
    while c.peek().is_some() {
        let (line, col) = c.here();
        let kw = c.ident()?;
        match kw.as_str() {
            "defenv" => {
                let name = match c.peek().cloned() {
                    Some(Tok::Env(e)) => e,
                    _ => return Err(c.fail("`$Name`")),
                };
                c.pos += 1;
                if BUILTIN_ENV.contains(&name.as_str()) {
                    return Err(syntax(line, col, format!("${name} is provided by the runtime")));
                }
                let default = if c.eat(&Tok::ColonDash) {
                    match c.peek().cloned() {
                        Some(Tok::Str(s)) => {
                            c.pos += 1;
                            Some(s)
                        }
                        _ => return Err(c.fail("a string")),
                    }
                } else {
                    None
                };
                c.expect(&Tok::Dot)?;
                if m.env.insert(name.clone(), default).is_some() {
                    return Err(syntax(line, col, format!("${name} is declared twice")));
                }
            }
            "defcon" | "defguard" => {
                let name = c.ident()?;
                if !names.insert(name.clone()) {
                    return Err(ScriptError::Duplicate(name));
                }
                let params = c.params()?;
                c.expect(&Tok::ColonDash)?;
                let mut scope: BTreeSet<String> = params.iter().cloned().collect();
                let mut lets = Vec::new();
                while matches!(c.peek(), Some(Tok::Var(_))) && c.peek_at(1) == Some(&Tok::ColonEq) {
                    let v = c.var()?;
                    c.pos += 1;
                    let e = c.expr(&scope)?;
                    scope.insert(v.clone());
                    lets.push((v, e));
                    c.expect(&Tok::Comma)?;
                }
                if kw == "defcon" {
                    let d = defcon_body(&mut c, name, params, lets, &scope)?;
                    m.defcons.insert(d.name.clone(), d);
                } else {
                    let mut blocks = vec![guard_block(&mut c, &scope)?];
                    while c.eat(&Tok::Comma) {
                        blocks.push(guard_block(&mut c, &scope)?);
                    }
                    c.expect(&Tok::Dot)?;
                    m.defguards.insert(name.clone(), Defguard { name, params, lets, blocks });
                }
            }
            other => return Err(syntax(line, col, format!("expected defenv, defcon or defguard, found `{other}`"))),
        }
    }
    for (name, line, col) in &c.env_refs {
        if !BUILTIN_ENV.contains(&name.as_str()) && !m.env.contains_key(name) {
            return Err(ScriptError::UndeclaredEnv { line: *line, col: *col, name: name.clone() });
        }
    }
    Ok(m)
}

fn defcon_body(
    c: &mut Cursor<'_>,
    name: String,
    params: Vec<String>,
    lets: Vec<(String, Expr)>,
    scope: &BTreeSet<String>,
) -> Result<Defcon, ScriptError> {
    let (line, _) = c.here();
    c.expect(&Tok::LBrace)?;
    let (mut label, mut ttl, mut links) = (None, None, Vec::new());
    let mut pieces = Vec::new();
    while !c.eat(&Tok::RBrace) {
        let (l, col) = c.here();
        match c.at_directive(&["label", "link", "ttl"]).as_deref() {
            Some("label") => {
                if label.replace(c.directive(scope)?).is_some() {
                    return Err(syntax(l, col, "a template has at most one label"));
                }
            }
            Some("ttl") => {
                if ttl.replace(c.directive(scope)?).is_some() {
                    return Err(syntax(l, col, "a template has at most one ttl"));
                }
            }
            Some(_) => links.push(c.directive(scope)?),
            None => {
                c.logic_run(&Tok::Dot, scope, &mut pieces)?;
            }
        }
    }
    let template = placeholder_check(pieces, TemplateKind::Statements, line)?;
    let post = if c.eat(&Tok::Comma) {
        match c.peek() {
            Some(Tok::Ident(p)) if p == "post" => {
                c.pos += 1;
                true
            }
            _ => return Err(c.fail("`post`")),
        }
    } else {
        false
    };
    c.expect(&Tok::Dot)?;
    Ok(Defcon { name, params, lets, template, label, links, ttl, post })
}

fn guard_block(c: &mut Cursor<'_>, scope: &BTreeSet<String>) -> Result<GuardBlock, ScriptError> {
    c.expect(&Tok::LBrace)?;
    let mut links = Vec::new();
    while c.at_directive(&["link"]).is_some() {
        links.push(c.directive(scope)?);
    }
    if let Some(d) = c.at_directive(&["label", "ttl"]) {
        let (line, col) = c.here();
        return Err(syntax(line, col, format!("{d}(...) is only allowed in defcon templates")));
    }
    let (line, _) = c.here();
    let mut pieces = Vec::new();
    c.logic_run(&Tok::Question, scope, &mut pieces)?;
    c.expect(&Tok::RBrace)?;
    let query = placeholder_check(pieces, TemplateKind::Query, line)?;
    Ok(GuardBlock { links, query })
}

impl From<ParseError> for ScriptError {
    fn from(err: ParseError) -> Self {
        match err.kind {
            ParseErrorKind::UnknownBuiltin(name) => ScriptError::UnknownBuiltin { line: err.line, col: err.col, name },
            _ => ScriptError::Template { err },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(body: &str) -> Result<ScriptModule, ScriptError> {
        load_script(&format!("{SCRIPT_HEADER}\n{body}"))
    }

    #[test]
    fn capability_rule_as_printed() {
        let m = load(
            "defcon capabilityRule() :- {
               cap(?Subject, ?Object, ?Priv, ?Delegatable) :-
                 ?Delegator: delegateCap(?Subject, ?Object, ?Priv, ?Delegatable),
                 cap(?Delegator, ?Object, ?Priv, true).
             }.",
        )
        .unwrap();
        let d = &m.defcons["capabilityRule"];
        assert!(d.params.is_empty());
        assert_eq!(d.template.len(), 1);
        assert!(d.label.is_none() && !d.post);
    }

    #[test]
    fn label_and_links_are_collected() {
        let m = load(
            "defcon grant(?Who, ?Obj) :- ?T := tokenFromLabel(\"caps\", $Self), {
               grant(?Who, ?Obj).
               label(concat(\"grant/\", ?Obj)).
               link(?T).
               link(tokenFromLabel(\"subject\", ?Who)).
             }, post.",
        )
        .unwrap();
        let d = &m.defcons["grant"];
        assert_eq!(d.links.len(), 2);
        assert!(d.label.is_some() && d.post);
        assert_eq!(d.lets.len(), 1);
        assert!(d.template.pieces.iter().any(|p| *p == Piece::Var("Who".into())));
    }

    #[test]
    fn undeclared_env_is_a_load_error() {
        let e = load("defcon c() :- { p($Foo). }.").unwrap_err();
        assert!(matches!(e, ScriptError::UndeclaredEnv { ref name, .. } if name == "Foo"), "{e}");
        assert!(load("defenv $Foo :- \"x\".\ndefcon c() :- { p($Foo). }.").is_ok());
        assert!(load("defcon c() :- { p($Foo). }.\ndefenv $Foo.").is_ok());
    }

    #[test]
    fn load_errors() {
        assert!(matches!(load("defcon a() :- {}.\ndefguard a() :- { p(x)? }."), Err(ScriptError::Duplicate(_))));
        assert!(matches!(load("defcon a() :- ?X := nope(), {}."), Err(ScriptError::UnknownBuiltin { .. })));
        assert!(matches!(load("defguard g() :- { p(?X), @nope(?X)? }."), Err(ScriptError::UnknownBuiltin { .. })));
        assert!(matches!(load("defcon a() :- { p(?X). }."), Err(ScriptError::Template { .. })));
        assert!(matches!(load("defcon a() :- { p(x) }."), Err(ScriptError::Syntax { .. })));
        assert!(matches!(load("defcon a(?X, ?X) :- {}."), Err(ScriptError::Syntax { .. })));
        assert!(matches!(load("defguard g() :- { label(x). p(x)? }."), Err(ScriptError::Syntax { .. })));
        assert!(matches!(load_script("defcon a() :- {}."), Err(ScriptError::Syntax { line: 1, .. })));
        assert!(matches!(load_script("safe-script 2\n"), Err(ScriptError::Syntax { .. })));
    }

    #[test]
    fn template_errors_point_into_the_file() {
        let e = load("\n\ndefcon a() :- {\n  p(x).\n  q(?Y).\n}.").unwrap_err();
        let ScriptError::Template { err } = e else { panic!("{e}") };
        assert_eq!(err.line, 6);
    }

    #[test]
    fn guard_blocks() {
        let m = load(
            "defguard access(?S, ?O) :- {
               link($BearerRef).
               cap(?S, ?O, read, ?_)?
             }, {
               link(tokenFromLabel(\"policy\", $Self)).
               allowed(?S)?
             }.",
        )
        .unwrap();
        let g = &m.defguards["access"];
        assert_eq!(g.blocks.len(), 2);
        assert_eq!(g.blocks[0].query.len(), 1);
        assert_eq!(m.entries(), vec!["access"]);
    }

    #[test]
    fn empty_template_loads() {
        let m = load("defcon nothing() :- {}.").unwrap();
        assert!(m.defcons["nothing"].template.is_empty());
    }

    #[test]
    fn header_may_follow_comments() {
        assert!(load_script("// x\n\nsafe-script 1\ndefcon a() :- {}.").is_ok());
    }
}
