//! Helpers shared by the demo binaries.

use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use safe_core::cert::{Ed25519Key, PrincipalId, Token};
use safe_core::slang::GuardResult;
use safe_core::store::{CertStore, SafeSets};
use safe_core::time::{Clock, SystemClock};
use safe_net::RemoteStore;
use serde_json::{json, Value};

use crate::Principal;

/// Loads an armored key file as written by `safe keygen`.
pub fn principal(path: &Path) -> Result<Principal> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading key {}", path.display()))?;
    let key = Ed25519Key::from_armor(&text).with_context(|| format!("parsing key {}", path.display()))?;
    Ok(Principal::new(Arc::new(key)))
}

/// A store client for `url`, or an in-process store for `memory`.
pub fn store(url: &str) -> Arc<dyn CertStore> {
    if url == "memory" {
        Arc::new(SafeSets::in_memory())
    } else {
        Arc::new(RemoteStore::new(url))
    }
}

pub fn clock() -> Arc<dyn Clock> {
    Arc::new(SystemClock)
}

pub fn pid(s: &str) -> Result<PrincipalId> {
    s.parse().map_err(|e| anyhow::anyhow!("`{s}` is not a principal ID: {e}"))
}

pub fn token(s: &str) -> Result<Token> {
    s.parse().map_err(|e| anyhow::anyhow!("`{s}` is not a token: {e}"))
}

pub fn decision(r: &GuardResult) -> Value {
    json!({
        "allowed": r.allowed,
        "sets": r.diagnostics.context.len(),
        "statements": r.diagnostics.statements,
        "steps": r.diagnostics.steps,
    })
}

/// Prints `v` and exits nonzero on a deny.
pub fn report(v: Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&v)?);
    if v.get("allowed") == Some(&Value::Bool(false)) {
        std::process::exit(1);
    }
    Ok(())
}
