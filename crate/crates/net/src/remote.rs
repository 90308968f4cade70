use std::time::Duration;

use safe_core::cert::Token;
use safe_core::store::{CertStore, DeleteRequest, StoreError};
use ureq::Agent;

use crate::DELETE_HEADER;

/// A [`CertStore`] backed by a store server. Calls block.
#[derive(Clone)]
pub struct RemoteStore {
    base: String,
    agent: Agent,
    max_response: u64,
}

impl RemoteStore {
    /// `base` is the server root, e.g. `http://127.0.0.1:7070`.
    pub fn new(base: &str) -> Self {
        Self::with_timeout(base, Duration::from_secs(10))
    }

    pub fn with_timeout(base: &str, timeout: Duration) -> Self {
        let agent: Agent =
            Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into();
        RemoteStore { base: base.trim_end_matches('/').to_string(), agent, max_response: 64 << 20 }
    }

    fn url(&self, token: &Token) -> String {
        format!("{}/sets/{token}", self.base)
    }

    pub fn health(&self) -> Result<(), StoreError> {
        let r = self.agent.get(&format!("{}/health", self.base)).call().map_err(transport)?;
        if r.status().is_success() {
            Ok(())
        } else {
            Err(StoreError::Transport(format!("health check returned {}", r.status())))
        }
    }

    fn check(&self, token: &Token, mut resp: ureq::http::Response<ureq::Body>) -> Result<Vec<u8>, StoreError> {
        let status = resp.status();
        let body = resp.body_mut().with_config().limit(self.max_response).read_to_vec().map_err(transport)?;
        if status.is_success() {
            return Ok(body);
        }
        let parsed: Option<serde_json::Value> = serde_json::from_slice(&body).ok();
        let field = |k: &str| parsed.as_ref().and_then(|v| v.get(k)).and_then(|v| v.as_str()).map(str::to_string);
        match field("error") {
            Some(code) => Err(StoreError::from_code(&code, field("message").unwrap_or_default(), token)),
            None if status == 404 => Err(StoreError::NotFound(*token)),
            None if status == 413 => Err(StoreError::PayloadTooLarge { size: 0, limit: 0 }),
            None => Err(StoreError::Transport(format!("status {status}"))),
        }
    }
}

fn transport(e: ureq::Error) -> StoreError {
    StoreError::Transport(e.to_string())
}

impl CertStore for RemoteStore {
    fn put(&self, token: &Token, bytes: &[u8]) -> Result<(), StoreError> {
        let r = self.agent.put(&self.url(token)).content_type("application/octet-stream").send(bytes).map_err(transport)?;
        self.check(token, r).map(drop)
    }

    fn fetch(&self, token: &Token) -> Result<Vec<u8>, StoreError> {
        let r = self.agent.get(&self.url(token)).call().map_err(transport)?;
        self.check(token, r)
    }

    fn delete(&self, token: &Token, req: &DeleteRequest) -> Result<(), StoreError> {
        let r = self.agent.delete(&self.url(token)).header(DELETE_HEADER, &req.to_header()).call().map_err(transport)?;
        self.check(token, r).map(drop)
    }
}
