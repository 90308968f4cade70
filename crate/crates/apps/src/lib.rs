//! Trust applications built from scripts plus host-side drivers.
//!
//! * [`strong`]: capabilities, nested groups, and hierarchical names with
//!   directory ACLs.
//! * [`routing`]: IPv4 prefix delegation and route validation.
//! * [`attest`]: access decided by attested image properties.
//!
//! Each application ships a script (see `scripts/`) whose defcons issue
//! credentials and whose defguards check them. Drivers fill in what a fixed
//! template cannot: sets with computed statement lists or growing link lists,
//! and multi-step procedures such as pathname resolution.

use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safe_core::cache::{CacheConfig, ContextCache};
use safe_core::cert::{build_and_sign, make_token, verify_encoded, BuildError, Ed25519Key, KeyHandle, PrincipalId, Token, Validity};
use safe_core::logic::{parse_program, ParseError, SolveOptions, Statement};
use safe_core::slang::{load_script, Env, GuardResult, Interpreter, InterpreterConfig, ScriptError, ScriptModule};
use safe_core::store::{post, CertStore, StoreError};
use safe_core::time::Clock;
use thiserror::Error;

pub mod attest;
pub mod cli;
pub mod fixture;
pub mod routing;
pub mod strong;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("statement text: {0}")]
    Parse(#[from] ParseError),
    #[error("{who} may not delegate {privilege} on {object}")]
    NotDelegatable { who: PrincipalId, object: String, privilege: String },
    #[error("no name entry for `{component}` at hop {hop}")]
    MissingName { hop: usize, component: String },
    #[error("pathname `{0}` is malformed")]
    BadPath(String),
    #[error("{0}")]
    Fixture(String),
}

/// A principal and its invocation environment.
pub struct Principal {
    env: Env,
}

impl Principal {
    pub fn new(key: Arc<dyn KeyHandle>) -> Self {
        Principal { env: Env::new(key) }
    }

    /// A reproducible principal: key and `scid()` GUIDs both derive from `seed`.
    pub fn from_seed(seed: u64) -> Self {
        let bytes: [u8; 32] = ChaCha8Rng::seed_from_u64(seed).random();
        Principal { env: Env::new(Arc::new(Ed25519Key::from_seed(bytes))).with_guid_seed(seed) }
    }

    pub fn generate() -> Self {
        Self::new(Arc::new(Ed25519Key::generate()))
    }

    pub fn id(&self) -> PrincipalId {
        self.env.self_id()
    }

    /// Token of this principal's set labelled `label`.
    pub fn token(&self, label: &str) -> Token {
        make_token(&self.id(), label).expect("labels used by the drivers are valid")
    }

    pub fn env(&mut self) -> &mut Env {
        &mut self.env
    }

    pub fn key(&self) -> &Arc<dyn KeyHandle> {
        self.env.key()
    }
}

impl std::fmt::Debug for Principal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("Principal").field(&self.id()).finish()
    }
}

/// Token of `issuer`'s set labelled `label`.
pub fn token_for(issuer: &PrincipalId, label: &str) -> Token {
    make_token(issuer, label).expect("labels used by the drivers are valid")
}

/// Parses statements written by a driver. Constants must already be quoted.
pub fn statements(src: &str) -> Result<Vec<Statement>, AppError> {
    Ok(parse_program(src)?)
}

/// Issues and posts sets directly, for content a template cannot express.
/// Read-modify-write helpers assume one writer per set.
pub struct Issuer {
    store: Arc<dyn CertStore>,
    clock: Arc<dyn Clock>,
    ttl: Duration,
}

impl Issuer {
    pub fn new(store: Arc<dyn CertStore>, clock: Arc<dyn Clock>, ttl: Duration) -> Self {
        Issuer { store, clock, ttl }
    }

    pub fn issue(&self, who: &Principal, label: &str, statements: Vec<Statement>, links: Vec<Token>) -> Result<Token, AppError> {
        let v = Validity::starting(self.clock.now(), self.ttl);
        let cert = build_and_sign(label, statements, links, v, &**who.key())?;
        Ok(post(&*self.store, &cert)?)
    }

    /// The issuer's current statements and links under `label`, if posted
    /// and still valid.
    pub fn current(&self, who: &PrincipalId, label: &str) -> Result<Option<(Vec<Statement>, Vec<Token>)>, AppError> {
        match self.store.fetch(&token_for(who, label)) {
            Ok(bytes) => match verify_encoded(&bytes, self.clock.now()) {
                Ok((cert, _)) => Ok(Some((cert.set.statements.clone(), cert.set.links.clone()))),
                Err(_) => Ok(None),
            },
            Err(StoreError::NotFound(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Reissues `label` with `link` added, creating the set if needed.
    pub fn append_link(&self, who: &Principal, label: &str, link: Token) -> Result<Token, AppError> {
        let (stmts, mut links) = self.current(&who.id(), label)?.unwrap_or_default();
        if !links.contains(&link) {
            links.push(link);
        }
        self.issue(who, label, stmts, links)
    }

    /// Reissues `label` with `extra` statements added, creating the set if needed.
    pub fn append_statements(&self, who: &Principal, label: &str, extra: Vec<Statement>) -> Result<Token, AppError> {
        let (mut stmts, links) = self.current(&who.id(), label)?.unwrap_or_default();
        for s in extra {
            if !stmts.contains(&s) {
                stmts.push(s);
            }
        }
        self.issue(who, label, stmts, links)
    }

    pub fn store(&self) -> &Arc<dyn CertStore> {
        &self.store
    }
}

/// Shared machinery for issuing through a script's defcons.
pub struct Driver {
    module: Arc<ScriptModule>,
    interp: Interpreter,
    issuer: Issuer,
}

impl Driver {
    pub fn new(script: &str, store: Arc<dyn CertStore>, clock: Arc<dyn Clock>) -> Self {
        let module = Arc::new(load_script(script).expect("bundled scripts load"));
        let cache = Arc::new(ContextCache::new(store.clone(), CacheConfig { set_capacity: 1024, context_capacity: 16, ..Default::default() }));
        let interp = Interpreter::new(cache, clock.clone());
        let ttl = interp.config().default_ttl;
        Driver { module, interp, issuer: Issuer::new(store, clock, ttl) }
    }

    pub fn module(&self) -> &Arc<ScriptModule> {
        &self.module
    }

    pub fn issuer(&self) -> &Issuer {
        &self.issuer
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        self.interp.clock()
    }

    /// Runs a defcon as `who` and returns the posted token.
    pub fn defcon(&self, who: &mut Principal, name: &str, args: &[&str]) -> Result<Token, AppError> {
        let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        Ok(self.interp.invoke_defcon(&self.module, name, &args, who.env())?.token)
    }

    /// Like [`Driver::defcon`], returning the set's label too.
    pub fn defcon_labelled(&self, who: &mut Principal, name: &str, args: &[&str]) -> Result<(Token, String), AppError> {
        let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        let out = self.interp.invoke_defcon(&self.module, name, &args, who.env())?;
        Ok((out.token, out.set.label))
    }
}

/// Settings for a guard's caches and prover.
#[derive(Clone, Debug, Default)]
pub struct GuardConfig {
    pub cache: CacheConfig,
    pub solve: SolveOptions,
    /// Disable the refresh-and-retry on deny.
    pub no_retry: bool,
}

/// A guard principal evaluating one script's defguards with its own caches.
pub struct Guard {
    principal: Principal,
    module: Arc<ScriptModule>,
    interp: Interpreter,
}

impl Guard {
    pub fn new(principal: Principal, script: &str, store: Arc<dyn CertStore>, clock: Arc<dyn Clock>, config: GuardConfig) -> Self {
        let module = Arc::new(load_script(script).expect("bundled scripts load"));
        let cache = Arc::new(ContextCache::new(store, config.cache));
        let ic = InterpreterConfig { solve: config.solve, retry_on_deny: !config.no_retry, ..Default::default() };
        Guard { principal, module, interp: Interpreter::with_config(cache, clock, ic) }
    }

    pub fn id(&self) -> PrincipalId {
        self.principal.id()
    }

    pub fn principal(&mut self) -> &mut Principal {
        &mut self.principal
    }

    pub fn interpreter(&self) -> &Interpreter {
        &self.interp
    }

    pub fn module(&self) -> &Arc<ScriptModule> {
        &self.module
    }

    /// Runs a defguard, with `$BearerRef` set when a bearer is given.
    pub fn check(&mut self, entry: &str, args: &[&str], bearer: Option<&Token>) -> Result<GuardResult, AppError> {
        if let Some(b) = bearer {
            self.principal.env().set("BearerRef", b.to_string());
        }
        let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        Ok(self.interp.invoke_defguard(&self.module, entry, &args, self.principal.env())?)
    }

    /// Runs a defcon as the guard principal, e.g. to post its policy.
    pub fn defcon(&mut self, name: &str, args: &[&str]) -> Result<Token, AppError> {
        let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        Ok(self.interp.invoke_defcon(&self.module, name, &args, self.principal.env())?.token)
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/apps.md")]
mod book {}
