//! Guard daemon: script entry points over REST.
//!
//! `POST /api/{entry}` takes a JSON object of string parameters. Keys naming
//! the entry's parameters (with or without the leading `?`) become
//! arguments; `BearerRef` and variables declared with `defenv` go to the
//! environment. A JSON array is taken as positional arguments.
//!
//! A guard entry answers `{"allowed": bool, "bindings": [...],
//! "diagnostics": {...}}`; a defcon entry answers `{"token": ..., "posted":
//! ...}`. Failures carry `"error": {"code", "message"}` and always
//! `"allowed": false`. Unknown entries are `404`, not a deny.
//!
//! `POST /admin/reload` (or SIGHUP in the binary) reloads the scripts. A
//! reload that fails to load keeps the running scripts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use safe_core::cache::{CacheConfig, ContextCache};
use safe_core::cert::KeyHandle;
use safe_core::logic::SolveOptions;
use safe_core::slang::{load_script, Env, Interpreter, InterpreterConfig, ScriptError, ScriptModule};
use safe_core::store::CertStore;
use safe_core::time::Clock;
use serde_json::{json, Map, Value};
use tracing::{info, warn};

use crate::SECRET_HEADER;

#[derive(Clone, Debug)]
pub struct GuardOptions {
    pub cache: CacheConfig,
    pub solve: SolveOptions,
    /// Prover deadline per request.
    pub request_timeout: Duration,
    /// When set, every `/api` and `/admin` call must carry it in `x-safe-secret`.
    pub secret: Option<String>,
}

impl Default for GuardOptions {
    fn default() -> Self {
        GuardOptions {
            cache: CacheConfig::default(),
            solve: SolveOptions::default(),
            request_timeout: Duration::from_secs(5),
            secret: None,
        }
    }
}

/// Loads each script file and merges them into one module. Entry and
/// environment names must be unique across files.
pub fn load_modules(paths: &[PathBuf]) -> Result<ScriptModule, String> {
    let mut out = ScriptModule::default();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        let m = load_script(&text).map_err(|e| format!("{}: {e}", p.display()))?;
        for (k, v) in m.env {
            if out.env.insert(k.clone(), v).is_some() {
                return Err(format!("{}: ${k} is declared in more than one script", p.display()));
            }
        }
        for (k, v) in m.defcons {
            if out.defguards.contains_key(&k) || out.defcons.insert(k.clone(), v).is_some() {
                return Err(format!("{}: {k} is defined in more than one script", p.display()));
            }
        }
        for (k, v) in m.defguards {
            if out.defcons.contains_key(&k) || out.defguards.insert(k.clone(), v).is_some() {
                return Err(format!("{}: {k} is defined in more than one script", p.display()));
            }
        }
    }
    Ok(out)
}

/// Everything a running guard holds. Requests take a snapshot of the module,
/// so a reload never mixes old and new scripts within one request.
pub struct GuardState {
    module: RwLock<Arc<ScriptModule>>,
    scripts: Vec<PathBuf>,
    interp: Interpreter,
    key: Arc<dyn KeyHandle>,
    options: GuardOptions,
}

impl GuardState {
    pub fn new(
        key: Arc<dyn KeyHandle>,
        scripts: Vec<PathBuf>,
        store: Arc<dyn CertStore>,
        clock: Arc<dyn Clock>,
        options: GuardOptions,
    ) -> Result<Self, String> {
        let module = load_modules(&scripts)?;
        Ok(Self::with_module(key, module, scripts, store, clock, options))
    }

    /// A guard over an already-loaded module. Reload rereads `scripts`.
    pub fn with_module(
        key: Arc<dyn KeyHandle>,
        module: ScriptModule,
        scripts: Vec<PathBuf>,
        store: Arc<dyn CertStore>,
        clock: Arc<dyn Clock>,
        options: GuardOptions,
    ) -> Self {
        let cache = Arc::new(ContextCache::new(store, options.cache.clone()));
        let config = InterpreterConfig { solve: options.solve, ..Default::default() };
        let interp = Interpreter::with_config(cache, clock, config);
        GuardState { module: RwLock::new(Arc::new(module)), scripts, interp, key, options }
    }

    pub fn module(&self) -> Arc<ScriptModule> {
        self.module.read().expect("lock").clone()
    }

    pub fn interpreter(&self) -> &Interpreter {
        &self.interp
    }

    /// Rereads the script files. On failure the current module stays.
    pub fn reload(&self) -> Result<usize, String> {
        let m = load_modules(&self.scripts)?;
        let n = m.entries().len();
        *self.module.write().expect("lock") = Arc::new(m);
        Ok(n)
    }

    /// Swaps in a module directly.
    pub fn replace(&self, module: ScriptModule) {
        *self.module.write().expect("lock") = Arc::new(module);
    }

    fn authorized(&self, headers: &HeaderMap) -> bool {
        match &self.options.secret {
            None => true,
            Some(s) => headers.get(SECRET_HEADER).and_then(|h| h.to_str().ok()) == Some(s.as_str()),
        }
    }

    /// Runs one request. Blocking: call from a blocking context.
    pub fn handle(&self, entry: &str, body: &Value) -> (StatusCode, Value) {
        let module = self.module();
        let started = Instant::now();
        let deadline = started + self.options.request_timeout;
        let mut env = Env::new(self.key.clone()).with_deadline(deadline);
        let args = match bind_request(&module, entry, body, &mut env) {
            Ok(a) => a,
            Err(e) => return failure(&e),
        };
        let (status, out) = if module.defguards.contains_key(entry) {
            match self.interp.invoke_defguard(&module, entry, &args, &mut env) {
                Ok(r) => {
                    let bindings: Vec<Value> = r
                        .bindings
                        .iter()
                        .map(|a| Value::Object(a.iter().map(|(k, v)| (k.name().to_string(), Value::String(v.to_string()))).collect()))
                        .collect();
                    let d = &r.diagnostics;
                    info!(entry, allowed = r.allowed, steps = d.steps, sets = d.context.len(), refreshes = d.refreshes, ms = started.elapsed().as_millis() as u64, "guard");
                    let body = json!({
                        "allowed": r.allowed,
                        "bindings": bindings,
                        "diagnostics": {
                            "context": d.context.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                            "statements": d.statements,
                            "steps": d.steps,
                            "refreshes": d.refreshes,
                            "failed_block": d.failed_block,
                        },
                    });
                    (StatusCode::OK, body)
                }
                Err(e) => failure(&e),
            }
        } else {
            match self.interp.invoke_defcon(&module, entry, &args, &mut env) {
                Ok(out) => {
                    info!(entry, token = %out.token, posted = out.posted, "defcon");
                    let body = json!({
                        "allowed": true,
                        "token": out.token.to_string(),
                        "posted": out.posted,
                        "label": out.set.label,
                        "statements": out.set.statements.len(),
                    });
                    (StatusCode::OK, body)
                }
                Err(e) => failure(&e),
            }
        };
        (status, out)
    }
}

fn failure(e: &ScriptError) -> (StatusCode, Value) {
    let code = e.code();
    let status = match code {
        "unknown_entry" => StatusCode::NOT_FOUND,
        "bad_request" | "build" => StatusCode::BAD_REQUEST,
        "limit" => StatusCode::OK,
        "context" => StatusCode::SERVICE_UNAVAILABLE,
        "script" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_GATEWAY,
    };
    if status != StatusCode::NOT_FOUND {
        warn!(code, error = %e, "request failed");
    }
    (status, json!({ "allowed": false, "error": { "code": code, "message": e.to_string() } }))
}

fn bad(msg: String) -> ScriptError {
    ScriptError::Builtin { func: "request", msg }
}

/// Splits a request body into positional arguments and environment values.
fn bind_request(module: &ScriptModule, entry: &str, body: &Value, env: &mut Env) -> Result<Vec<String>, ScriptError> {
    let params = module
        .defguards
        .get(entry)
        .map(|g| &g.params)
        .or_else(|| module.defcons.get(entry).map(|d| &d.params))
        .ok_or_else(|| ScriptError::UnknownEntry(entry.to_string()))?;
    match body {
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| bad("arguments must be strings".into())))
            .collect(),
        Value::Null => Ok(Vec::new()),
        Value::Object(map) => {
            let mut named = BTreeMap::new();
            let env_names: BTreeSet<&str> = module.env.keys().map(String::as_str).chain(["BearerRef"]).collect();
            for (k, v) in map {
                let v = v.as_str().ok_or_else(|| bad(format!("parameter {k} must be a string")))?;
                let name = k.trim_start_matches(['?', '$']);
                if params.iter().any(|p| p == name) {
                    named.insert(name.to_string(), v.to_string());
                } else if env_names.contains(name) {
                    env.set(name, v);
                } else {
                    return Err(bad(format!("unknown parameter {k}")));
                }
            }
            params
                .iter()
                .map(|p| named.remove(p).ok_or_else(|| bad(format!("missing parameter {p}"))))
                .collect()
        }
        _ => Err(bad("body must be a JSON object or array".into())),
    }
}

async fn api(State(st): State<Arc<GuardState>>, Path(entry): Path<String>, headers: HeaderMap, body: axum::body::Bytes) -> Response {
    if !st.authorized(&headers) {
        return (StatusCode::UNAUTHORIZED, Json(json!({ "allowed": false, "error": { "code": "unauthorized", "message": "bad or missing secret" } }))).into_response();
    }
    let body: Value = if body.is_empty() {
        Value::Null
    } else {
        match serde_json::from_slice(&body) {
            Ok(v) => v,
            Err(e) => {
                return (StatusCode::BAD_REQUEST, Json(json!({ "allowed": false, "error": { "code": "bad_request", "message": e.to_string() } }))).into_response()
            }
        }
    };
    let (status, out) = tokio::task::spawn_blocking(move || st.handle(&entry, &body)).await.unwrap_or_else(|_| {
        (StatusCode::INTERNAL_SERVER_ERROR, json!({ "allowed": false, "error": { "code": "internal", "message": "handler panicked" } }))
    });
    (status, Json(out)).into_response()
}

async fn reload(State(st): State<Arc<GuardState>>, headers: HeaderMap) -> Response {
    if !st.authorized(&headers) {
        return StatusCode::UNAUTHORIZED.into_response();
    }
    let s = st.clone();
    match tokio::task::spawn_blocking(move || s.reload()).await.expect("reload task") {
        Ok(n) => {
            info!(entries = n, "scripts reloaded");
            Json(json!({ "reloaded": true, "entries": n })).into_response()
        }
        Err(e) => {
            warn!(error = %e, "reload failed; keeping current scripts");
            (StatusCode::UNPROCESSABLE_ENTITY, Json(json!({ "reloaded": false, "error": e }))).into_response()
        }
    }
}

async fn health(State(st): State<Arc<GuardState>>) -> Json<Value> {
    let m = st.module();
    let mut body = Map::new();
    body.insert("status".into(), "ok".into());
    body.insert("principal".into(), st.key.principal_id().to_string().into());
    body.insert("entries".into(), m.entries().into_iter().map(Value::from).collect::<Vec<_>>().into());
    let metrics = st.interp.cache().metrics();
    body.insert(
        "cache".into(),
        json!({
            "set_hits": metrics.set_hits,
            "set_misses": metrics.set_misses,
            "context_hits": metrics.context_hits,
            "context_misses": metrics.context_misses,
            "refreshes": metrics.refreshes,
            "throttled": metrics.throttled,
        }),
    );
    Json(Value::Object(body))
}

pub fn guard_router(state: Arc<GuardState>) -> Router {
    Router::new()
        .route("/api/{entry}", post(api))
        .route("/admin/reload", post(reload))
        .route("/health", get(health))
        .with_state(state)
}
