use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use tracing::{debug, info};

use crate::cert::{self, make_token, PrincipalId, Token};
use crate::store::{CertStore, DeleteRequest, StoreError, DELETE_WINDOW};
use crate::time::{Clock, SystemClock, Timestamp};

pub const DEFAULT_MAX_PAYLOAD: usize = 1 << 20;

#[derive(Clone, Debug)]
pub struct StoreConfig {
    pub max_payload: usize,
    pub delete_window: Duration,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { max_payload: DEFAULT_MAX_PAYLOAD, delete_window: DELETE_WINDOW }
    }
}

#[derive(Clone, Debug)]
pub struct StoreRecord {
    pub token: Token,
    pub bytes: Arc<[u8]>,
    pub issuer: PrincipalId,
    pub expiry: Timestamp,
}

/// The write-checked store, in memory or backed by an append-only log file.
pub struct SafeSets {
    config: StoreConfig,
    clock: Arc<dyn Clock>,
    records: RwLock<HashMap<Token, StoreRecord>>,
    log: Option<(PathBuf, Mutex<File>)>,
    seen_deletes: Mutex<HashSet<(Token, i64, Vec<u8>)>>,
}

impl SafeSets {
    pub fn in_memory() -> Self {
        Self::with_clock(StoreConfig::default(), Arc::new(SystemClock))
    }

    pub fn with_clock(config: StoreConfig, clock: Arc<dyn Clock>) -> Self {
        SafeSets { config, clock, records: RwLock::default(), log: None, seen_deletes: Mutex::default() }
    }

    /// Opens (or creates) `dir/sets.log` and replays it.
    pub fn open(dir: &Path, config: StoreConfig, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("sets.log");
        let mut records = HashMap::new();
        if path.exists() {
            replay(&path, &mut records)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        info!(path = %path.display(), records = records.len(), "opened set log");
        Ok(SafeSets {
            config,
            clock,
            records: RwLock::new(records),
            log: Some((path, Mutex::new(file))),
            seen_deletes: Mutex::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.read().expect("lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn append(&self, entry: &[u8]) -> Result<(), StoreError> {
        if let Some((_, f)) = &self.log {
            let mut f = f.lock().expect("lock");
            f.write_all(entry)?;
            f.flush()?;
        }
        Ok(())
    }

    /// Removes records whose certificates have expired at `now`.
    pub fn sweep_expired(&self, now: Timestamp) -> Result<usize, StoreError> {
        let expired: Vec<Token> = {
            let r = self.records.read().expect("lock");
            r.values().filter(|rec| rec.expiry <= now).map(|rec| rec.token).collect()
        };
        let mut w = self.records.write().expect("lock");
        for t in &expired {
            w.remove(t);
            self.append(format!("DEL {t}\n").as_bytes())?;
        }
        if !expired.is_empty() {
            debug!(count = expired.len(), "swept expired sets");
        }
        Ok(expired.len())
    }
}

fn replay(path: &Path, records: &mut HashMap<Token, StoreRecord>) -> Result<(), StoreError> {
    let corrupt = |m: &str| StoreError::Corrupt(format!("{}: {m}", path.display()));
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let fields: Vec<&str> = line.trim_end_matches('\n').split(' ').collect();
        match fields.as_slice() {
            ["PUT", tok, issuer, expiry, len] => {
                let token: Token = tok.parse().map_err(|_| corrupt("bad token"))?;
                let issuer: PrincipalId = issuer.parse().map_err(|_| corrupt("bad issuer"))?;
                let expiry = Timestamp(expiry.parse().map_err(|_| corrupt("bad expiry"))?);
                let len: usize = len.parse().map_err(|_| corrupt("bad length"))?;
                let mut bytes = vec![0u8; len + 1];
                r.read_exact(&mut bytes).map_err(|_| corrupt("truncated record"))?;
                if bytes.pop() != Some(b'\n') {
                    return Err(corrupt("missing record terminator"));
                }
                records.insert(token, StoreRecord { token, bytes: bytes.into(), issuer, expiry });
            }
            ["DEL", tok] => {
                let token: Token = tok.parse().map_err(|_| corrupt("bad token"))?;
                records.remove(&token);
            }
            _ => return Err(corrupt("unrecognized entry")),
        }
    }
}

impl CertStore for SafeSets {
    fn put(&self, token: &Token, bytes: &[u8]) -> Result<(), StoreError> {
        if bytes.len() > self.config.max_payload {
            return Err(StoreError::PayloadTooLarge { size: bytes.len(), limit: self.config.max_payload });
        }
        let now = self.clock.now();
        let (cert, _) = cert::verify_encoded(bytes, now)?;
        let computed = make_token(&cert.set.issuer, &cert.set.label).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        if computed != *token {
            return Err(StoreError::TokenMismatch { claimed: *token, computed });
        }
        let mut w = self.records.write().expect("lock");
        if let Some(old) = w.get(token) {
            if old.issuer != cert.set.issuer {
                return Err(StoreError::ForeignOverwrite(*token));
            }
        }
        let issuer = cert.set.issuer;
        let expiry = cert.set.expiry;
        let mut entry = format!("PUT {token} {issuer} {expiry} {}\n", bytes.len()).into_bytes();
        entry.extend_from_slice(bytes);
        entry.push(b'\n');
        self.append(&entry)?;
        w.insert(*token, StoreRecord { token: *token, bytes: bytes.into(), issuer, expiry });
        Ok(())
    }

    fn fetch(&self, token: &Token) -> Result<Vec<u8>, StoreError> {
        let r = self.records.read().expect("lock");
        r.get(token).map(|rec| rec.bytes.to_vec()).ok_or(StoreError::NotFound(*token))
    }

    fn delete(&self, token: &Token, req: &DeleteRequest) -> Result<(), StoreError> {
        let now = self.clock.now();
        let mut w = self.records.write().expect("lock");
        let rec = w.get(token).ok_or(StoreError::NotFound(*token))?;
        let pid = cert::principal_id(&req.scheme, &req.public_key).map_err(|_| StoreError::Unauthorized)?;
        if pid != rec.issuer {
            return Err(StoreError::Unauthorized);
        }
        let msg = DeleteRequest::message(token, req.timestamp);
        if !cert::verify_signature(&req.scheme, &req.public_key, &msg, &req.signature).unwrap_or(false) {
            return Err(StoreError::Unauthorized);
        }
        let window = self.config.delete_window;
        if req.timestamp < now.saturating_sub(window) || req.timestamp > now.saturating_add(window) {
            return Err(StoreError::StaleRequest);
        }
        {
            let mut seen = self.seen_deletes.lock().expect("lock");
            let oldest = now.saturating_sub(window).as_millis();
            seen.retain(|(_, ts, _)| *ts >= oldest);
            if !seen.insert((*token, req.timestamp.as_millis(), req.signature.clone())) {
                return Err(StoreError::StaleRequest);
            }
        }
        self.append(format!("DEL {token}\n").as_bytes())?;
        w.remove(token);
        Ok(())
    }
}
