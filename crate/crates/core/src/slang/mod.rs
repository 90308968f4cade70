//! Trust scripts: set constructors and guards.
//!
//! A script is a list of `defcon` rules, which build (and optionally post)
//! logic sets from templates, and `defguard` rules, which assemble a context
//! from linked sets and run a query against it. Scripts are local code; the
//! sets they produce carry only statements and links.
//!
//! ```
//! use std::sync::Arc;
//! use safe_core::cache::{CacheConfig, ContextCache};
//! use safe_core::cert::Ed25519Key;
//! use safe_core::slang::{load_script, Env, Interpreter};
//! use safe_core::store::SafeSets;
//! use safe_core::time::SystemClock;
//!
//! let script = load_script(r#"safe-script 1
//! defcon member(?Who) :- { member(?Who, staff). label("staff"). }, post.
//! defguard isStaff(?Who) :- { link(tokenFromLabel("staff", $Self)). member(?Who, staff)? }.
//! "#).unwrap();
//! let cache = Arc::new(ContextCache::new(Arc::new(SafeSets::in_memory()), CacheConfig::default()));
//! let interp = Interpreter::new(cache, Arc::new(SystemClock));
//! let mut env = Env::new(Arc::new(Ed25519Key::generate()));
//! interp.invoke_defcon(&script, "member", &["bob".into()], &mut env).unwrap();
//! assert!(interp.invoke_defguard(&script, "isStaff", &["bob".into()], &mut env).unwrap().allowed);
//! assert!(!interp.invoke_defguard(&script, "isStaff", &["eve".into()], &mut env).unwrap().allowed);
//! ```

mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use thiserror::Error;
use tracing::debug;

use crate::cache::{AssembleError, ContextCache};
use crate::cert::{
    build_and_sign, make_token, principal_id, verify_certificate, BuildError, Certificate, KeyHandle, LogicSet, PrincipalId,
    Scid, Token, Validity,
};
use crate::logic::{parse_program, parse_query, quoted, Answer, Const, Ipv4Prefix, ParseError, SolveError, SolveOptions};
use crate::store::{post, StoreError};
use crate::time::Clock;

pub use parse::{
    load_script, Defcon, Defguard, Expr, Func, GuardBlock, ScriptModule, Template, BUILTIN_ENV, SCRIPT_HEADER,
};
use parse::{query_shape, render, statement_shape};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown builtin {name}")]
    UnknownBuiltin { line: usize, col: usize, name: String },
    #[error("{line}:{col}: ${name} is used but never declared with defenv")]
    UndeclaredEnv { line: usize, col: usize, name: String },
    #[error("{err}")]
    Template { err: ParseError },
    #[error("{0} is defined twice")]
    Duplicate(String),
    #[error("no entry named {0}")]
    UnknownEntry(String),
    #[error("{entry} takes {expected} arguments, got {found}")]
    Arity { entry: String, expected: usize, found: usize },
    #[error("${0} has no value and no default")]
    UnboundEnv(String),
    #[error("{func}: {msg}")]
    Builtin { func: &'static str, msg: String },
    #[error("`{0}` is not a token")]
    BadToken(String),
    #[error("interpolated logic does not parse: {0}")]
    Interpolation(ParseError),
    #[error("interpolated logic changed shape")]
    Injection,
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("post failed: {0}")]
    Store(#[from] StoreError),
    #[error("context assembly failed: {0}")]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl ScriptError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ScriptError::Syntax { .. }
            | ScriptError::UnknownBuiltin { .. }
            | ScriptError::UndeclaredEnv { .. }
            | ScriptError::Template { .. }
            | ScriptError::Duplicate(_) => "script",
            ScriptError::UnknownEntry(_) => "unknown_entry",
            ScriptError::Arity { .. }
            | ScriptError::UnboundEnv(_)
            | ScriptError::Builtin { .. }
            | ScriptError::BadToken(_)
            | ScriptError::Interpolation(_)
            | ScriptError::Injection => "bad_request",
            ScriptError::Build(_) => "build",
            ScriptError::Store(e) => e.code(),
            ScriptError::Assemble(_) => "context",
            ScriptError::Solve(_) => "limit",
        }
    }
}

/// A script value. Arguments and environment variables are strings; `int`
/// and `ipv4` produce typed values that interpolate as typed literals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Str(String),
    Int(i64),
    Ipv4(Ipv4Prefix),
}

impl Value {
    /// The value as logic literal text.
    pub fn literal(&self) -> String {
        match self {
            Value::Str(s) => quoted(s),
            Value::Int(v) => v.to_string(),
            Value::Ipv4(p) => format!("ipv4\"{p}\""),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => f.write_str(s),
            Value::Int(v) => write!(f, "{v}"),
            Value::Ipv4(p) => write!(f, "{p}"),
        }
    }
}

/// Per-invocation state: the signing key behind `$Self`, environment
/// variables, and the GUID source for `scid()`.
pub struct Env {
    key: Arc<dyn KeyHandle>,
    me: PrincipalId,
    vars: BTreeMap<String, String>,
    guids: StdRng,
    deadline: Option<Instant>,
}

impl Env {
    pub fn new(key: Arc<dyn KeyHandle>) -> Self {
        let me = key.principal_id();
        Env { key, me, vars: BTreeMap::new(), guids: StdRng::from_os_rng(), deadline: None }
    }

    /// Makes `scid()` deterministic.
    pub fn with_guid_seed(mut self, seed: u64) -> Self {
        self.guids = StdRng::seed_from_u64(seed);
        self
    }

    /// Prover work for this invocation stops at `deadline`.
    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub fn with(mut self, name: &str, value: impl Into<String>) -> Self {
        self.set(name, value);
        self
    }

    /// Sets `$name`. `$Self` always comes from the key and cannot be set.
    pub fn set(&mut self, name: &str, value: impl Into<String>) {
        if name != "Self" {
            self.vars.insert(name.to_string(), value.into());
        }
    }

    pub fn get(&self, name: &str) -> Option<String> {
        if name == "Self" {
            return Some(self.me.to_string());
        }
        self.vars.get(name).cloned()
    }

    pub fn self_id(&self) -> PrincipalId {
        self.me
    }

    pub fn key(&self) -> &Arc<dyn KeyHandle> {
        &self.key
    }

    fn lookup(&self, module: &ScriptModule, name: &str) -> Result<String, ScriptError> {
        self.get(name)
            .or_else(|| module.env.get(name).cloned().flatten())
            .ok_or_else(|| ScriptError::UnboundEnv(name.to_string()))
    }

    fn new_scid(&mut self) -> Scid {
        let mut b = [0u8; 16];
        self.guids.fill_bytes(&mut b);
        Scid::from_parts(self.me, uuid::Builder::from_random_bytes(b).into_uuid())
    }
}

/// `bob:a/b/c` → `("bob:a", "b/c")`; `a/b` → `("a", "b")`; `bob:a` → `("bob:a", "")`.
pub fn split_path(path: &str) -> Result<(String, String), String> {
    let (root, rest) = match path.split_once(':') {
        Some((r, rest)) if !r.contains('/') => (Some(r), rest),
        _ => (None, path),
    };
    if root == Some("") {
        return Err(format!("pathname `{path}` has an empty root"));
    }
    let parts: Vec<&str> = rest.split('/').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("pathname `{path}` has an empty component"));
    }
    if parts.iter().any(|p| p.contains(':')) {
        return Err(format!("pathname `{path}` has `:` inside a component"));
    }
    let head = match root {
        Some(r) => format!("{r}:{}", parts[0]),
        None => parts[0].to_string(),
    };
    Ok((head, parts[1..].join("/")))
}

fn builtin_err(f: Func, msg: impl Into<String>) -> ScriptError {
    ScriptError::Builtin { func: f.name(), msg: msg.into() }
}

fn eval(
    e: &Expr,
    vals: &BTreeMap<String, Value>,
    module: &ScriptModule,
    env: &mut Env,
) -> Result<Value, ScriptError> {
    Ok(match e {
        Expr::Lit(v) => v.clone(),
        Expr::Var(v) => vals.get(v).cloned().expect("scope checked at load"),
        Expr::Env(n) => Value::Str(env.lookup(module, n)?),
        Expr::Call(f, args) => {
            let mut a = Vec::with_capacity(args.len());
            for x in args {
                a.push(eval(x, vals, module, env)?);
            }
            call(*f, a, env)?
        }
    })
}

fn call(f: Func, a: Vec<Value>, env: &mut Env) -> Result<Value, ScriptError> {
    let text = |i: usize| a[i].to_string();
    Ok(match f {
        Func::Scid => Value::Str(env.new_scid().to_string()),
        Func::PrincipalId if a.is_empty() => Value::Str(env.self_id().to_string()),
        Func::PrincipalId => {
            let s = text(0);
            let (scheme, key) = s.split_once(':').ok_or_else(|| builtin_err(f, "expected `<scheme>:<base64url key>`"))?;
            let bytes = base64::Engine::decode(&base64::engine::general_purpose::URL_SAFE_NO_PAD, key)
                .map_err(|_| builtin_err(f, "key is not base64url"))?;
            Value::Str(principal_id(scheme, &bytes).map_err(|e| builtin_err(f, e.to_string()))?.to_string())
        }
        Func::RootId => {
            let s = Scid::from_str(&text(0)).map_err(|e| builtin_err(f, e.to_string()))?;
            Value::Str(s.authority().to_string())
        }
        Func::SplitHead => Value::Str(split_path(&text(0)).map_err(|e| builtin_err(f, e))?.0),
        Func::SplitTail => Value::Str(split_path(&text(0)).map_err(|e| builtin_err(f, e))?.1),
        Func::TokenFromLabel => {
            let p = PrincipalId::from_str(&text(1)).map_err(|_| builtin_err(f, format!("unknown principal `{}`", text(1))))?;
            Value::Str(make_token(&p, &text(0)).map_err(|e| builtin_err(f, e.to_string()))?.to_string())
        }
        Func::Concat => Value::Str(a.iter().map(|v| v.to_string()).collect()),
        Func::Ipv4 => match &a[0] {
            Value::Ipv4(p) => Value::Ipv4(*p),
            v => Value::Ipv4(v.to_string().parse().map_err(|e: crate::logic::PrefixError| builtin_err(f, e.to_string()))?),
        },
        Func::Int => match &a[0] {
            Value::Int(v) => Value::Int(*v),
            v => Value::Int(v.to_string().parse().map_err(|_| builtin_err(f, format!("`{v}` is not an integer")))?),
        },
    })
}

fn bind(
    entry: &str,
    params: &[String],
    lets: &[(String, Expr)],
    args: &[String],
    module: &ScriptModule,
    env: &mut Env,
) -> Result<BTreeMap<String, Value>, ScriptError> {
    if args.len() != params.len() {
        return Err(ScriptError::Arity { entry: entry.to_string(), expected: params.len(), found: args.len() });
    }
    let mut vals: BTreeMap<String, Value> =
        params.iter().cloned().zip(args.iter().map(|a| Value::Str(a.clone()))).collect();
    for (name, e) in lets {
        let v = eval(e, &vals, module, env)?;
        vals.insert(name.clone(), v);
    }
    Ok(vals)
}

fn interpolate(
    t: &Template,
    vals: &BTreeMap<String, Value>,
    module: &ScriptModule,
    env: &Env,
) -> Result<String, ScriptError> {
    render(
        &t.pieces,
        &mut |v| Ok(vals[v].literal()),
        &mut |e| Ok(quoted(&env.lookup(module, e)?)),
    )
}

fn token_of(v: Value) -> Result<Token, ScriptError> {
    let s = v.to_string();
    Token::from_str(&s).map_err(|_| ScriptError::BadToken(s))
}

#[derive(Clone, Debug)]
pub struct InterpreterConfig {
    /// Lifetime of sets built without a `ttl(...)` directive.
    pub default_ttl: Duration,
    pub solve: SolveOptions,
    /// Refresh the context and retry once when a guard query fails.
    pub retry_on_deny: bool,
}

impl Default for InterpreterConfig {
    fn default() -> Self {
        InterpreterConfig { default_ttl: Duration::from_secs(24 * 3600), solve: SolveOptions::default(), retry_on_deny: true }
    }
}

#[derive(Clone, Debug)]
pub struct DefconOutput {
    pub set: LogicSet,
    pub token: Token,
    pub posted: bool,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GuardDiagnostics {
    /// Every set in the contexts queried, in assembly order.
    pub context: Vec<Token>,
    pub statements: usize,
    pub steps: u64,
    pub refreshes: u32,
    /// Index of the block whose query failed, if one did.
    pub failed_block: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct GuardResult {
    pub allowed: bool,
    /// One answer per block, for blocks that succeeded.
    pub bindings: Vec<Answer>,
    pub diagnostics: GuardDiagnostics,
}

/// Runs script entries against a cache and store. Holds no per-request
/// state; many threads may invoke through one interpreter.
pub struct Interpreter {
    cache: Arc<ContextCache>,
    clock: Arc<dyn Clock>,
    config: InterpreterConfig,
}

impl Interpreter {
    pub fn new(cache: Arc<ContextCache>, clock: Arc<dyn Clock>) -> Self {
        Self::with_config(cache, clock, InterpreterConfig::default())
    }

    pub fn with_config(cache: Arc<ContextCache>, clock: Arc<dyn Clock>, config: InterpreterConfig) -> Self {
        Interpreter { cache, clock, config }
    }

    pub fn cache(&self) -> &Arc<ContextCache> {
        &self.cache
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn config(&self) -> &InterpreterConfig {
        &self.config
    }

    pub fn invoke_defcon(
        &self,
        module: &ScriptModule,
        name: &str,
        args: &[String],
        env: &mut Env,
    ) -> Result<DefconOutput, ScriptError> {
        let d = module.defcons.get(name).ok_or_else(|| ScriptError::UnknownEntry(name.to_string()))?;
        let vals = bind(name, &d.params, &d.lets, args, module, env)?;
        let text = interpolate(&d.template, &vals, module, env)?;
        let statements = parse_program(&text).map_err(ScriptError::Interpolation)?;
        if statement_shape(&statements) != d.template.shape {
            return Err(ScriptError::Injection);
        }
        let label = match &d.label {
            Some(e) => eval(e, &vals, module, env)?.to_string(),
            None => d.name.clone(),
        };
        let mut links = Vec::with_capacity(d.links.len());
        for e in &d.links {
            links.push(token_of(eval(e, &vals, module, env)?)?);
        }
        let ttl = match &d.ttl {
            Some(e) => {
                let v = eval(e, &vals, module, env)?;
                let secs: u64 = v.to_string().parse().ok().filter(|s| *s > 0).ok_or_else(|| ScriptError::Builtin {
                    func: "ttl",
                    msg: format!("`{v}` is not a positive number of seconds"),
                })?;
                Duration::from_secs(secs)
            }
            None => self.config.default_ttl,
        };
        let now = self.clock.now();
        let cert = build_and_sign(&label, statements, links, Validity::starting(now, ttl), &**env.key())?;
        let token = cert.token();
        let sets = self.cache.sets();
        if d.post {
            post(&**sets.store(), &cert)?;
            sets.unpin(&token);
            sets.invalidate(&token);
        } else {
            sets.pin(verify_certificate(&cert, now).expect("a freshly signed set verifies"));
        }
        debug!(entry = name, %token, posted = d.post, "defcon");
        Ok(DefconOutput { set: cert.set.clone(), token, posted: d.post, certificate: cert })
    }

    pub fn invoke_defguard(
        &self,
        module: &ScriptModule,
        name: &str,
        args: &[String],
        env: &mut Env,
    ) -> Result<GuardResult, ScriptError> {
        let g = module.defguards.get(name).ok_or_else(|| ScriptError::UnknownEntry(name.to_string()))?;
        let vals = bind(name, &g.params, &g.lets, args, module, env)?;
        let mut diag = GuardDiagnostics::default();
        let mut seen: BTreeSet<Token> = BTreeSet::new();
        let mut bindings = Vec::new();
        let mut retried = false;
        let mut opts = self.config.solve;
        if env.deadline.is_some() {
            opts.limits.deadline = env.deadline;
        }
        for (i, block) in g.blocks.iter().enumerate() {
            let mut roots = Vec::with_capacity(block.links.len());
            for e in &block.links {
                roots.push(token_of(eval(e, &vals, module, env)?)?);
            }
            let text = interpolate(&block.query, &vals, module, env)?;
            let mut query = parse_query(&text).map_err(ScriptError::Interpolation)?;
            if query_shape(&query) != block.query.shape {
                return Err(ScriptError::Injection);
            }
            let me = Const::from(env.self_id().to_string());
            query.iter_mut().for_each(|l| l.resolve_self(&me));
            let now = self.clock.now();
            let mut ctx = self.cache.assemble(&roots, now)?;
            let mut proof = crate::logic::prove(&ctx.context, &query, &opts)?;
            diag.steps += proof.stats.steps;
            if !proof.holds && self.config.retry_on_deny && !retried {
                retried = true;
                if self.cache.refresh_on_failure(&roots, now)?.refreshed {
                    diag.refreshes += 1;
                    ctx = self.cache.assemble(&roots, now)?;
                    proof = crate::logic::prove(&ctx.context, &query, &opts)?;
                    diag.steps += proof.stats.steps;
                }
            }
            for t in &ctx.members {
                if seen.insert(*t) {
                    diag.context.push(*t);
                }
            }
            diag.statements += ctx.context.len();
            match proof.bindings {
                Some(b) if proof.holds => bindings.push(b),
                _ => {
                    diag.failed_block = Some(i);
                    debug!(entry = name, block = i, "guard denied");
                    return Ok(GuardResult { allowed: false, bindings, diagnostics: diag });
                }
            }
        }
        debug!(entry = name, steps = diag.steps, "guard allowed");
        Ok(GuardResult { allowed: true, bindings, diagnostics: diag })
    }
}

/// Arguments named by a guard or defcon's parameters, in declaration order.
/// Used by transports that receive named parameters.
pub fn order_args(module: &ScriptModule, entry: &str, named: &BTreeMap<String, String>) -> Result<Vec<String>, ScriptError> {
    let params = module
        .defguards
        .get(entry)
        .map(|g| &g.params)
        .or_else(|| module.defcons.get(entry).map(|d| &d.params))
        .ok_or_else(|| ScriptError::UnknownEntry(entry.to_string()))?;
    params
        .iter()
        .map(|p| named.get(p).cloned().ok_or_else(|| ScriptError::Arity { entry: entry.to_string(), expected: params.len(), found: named.len() }))
        .collect()
}
