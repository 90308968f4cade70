//! Set and context caches.
//!
//! Nothing is served past the expiry of the certificates it came from. A set
//! cache entry lives until its set expires; a context lives until the
//! earliest expiry among its member sets. Answers are never cached.

use std::collections::{BTreeSet, HashMap};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use lru::LruCache;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::debug;

use crate::cert::{Token, ValidatedSet};
use crate::logic::{ContextError, IndexedContext};
use crate::store::{
    fetch_closure_many, fetch_validated, CertStore, ClosureError, ClosureLimits, FetchError, SetSource, SkipReason,
};
use crate::time::Timestamp;

#[derive(Clone, Debug)]
pub struct CacheConfig {
    pub set_capacity: usize,
    pub context_capacity: usize,
    /// Upper bound of the refresh throttle; the actual delay is drawn from
    /// `[delay/2, delay]`.
    pub throttle_delay: Duration,
    pub closure: ClosureLimits,
    /// Seed for throttle jitter, for reproducible runs.
    pub jitter_seed: Option<u64>,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            set_capacity: 65_536,
            context_capacity: 4_096,
            throttle_delay: Duration::from_secs(1),
            closure: ClosureLimits::default(),
            jitter_seed: None,
        }
    }
}

#[derive(Default, Debug)]
struct Counters {
    set_hits: AtomicU64,
    set_misses: AtomicU64,
    context_hits: AtomicU64,
    context_misses: AtomicU64,
    refreshes: AtomicU64,
    throttled: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheMetrics {
    pub set_hits: u64,
    pub set_misses: u64,
    pub context_hits: u64,
    pub context_misses: u64,
    pub refreshes: u64,
    pub throttled: u64,
}

impl Counters {
    fn snapshot(&self) -> CacheMetrics {
        let l = |a: &AtomicU64| a.load(Ordering::Relaxed);
        CacheMetrics {
            set_hits: l(&self.set_hits),
            set_misses: l(&self.set_misses),
            context_hits: l(&self.context_hits),
            context_misses: l(&self.context_misses),
            refreshes: l(&self.refreshes),
            throttled: l(&self.throttled),
        }
    }
}

fn bump(a: &AtomicU64) {
    a.fetch_add(1, Ordering::Relaxed);
}

type FlightResult = Option<Result<ValidatedSet, FetchError>>;

#[derive(Default)]
struct Flight {
    result: Mutex<FlightResult>,
    done: Condvar,
}

/// Validated sets by token, LRU-evicted, with one fetch per token in flight.
pub struct SetCache {
    store: Arc<dyn CertStore>,
    lru: Mutex<LruCache<Token, ValidatedSet>>,
    pinned: Mutex<HashMap<Token, ValidatedSet>>,
    inflight: Mutex<HashMap<Token, Arc<Flight>>>,
    counters: Arc<Counters>,
}

impl SetCache {
    pub fn new(store: Arc<dyn CertStore>, capacity: usize) -> Self {
        Self::with_counters(store, capacity, Arc::default())
    }

    fn with_counters(store: Arc<dyn CertStore>, capacity: usize, counters: Arc<Counters>) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("non-zero");
        SetCache {
            store,
            lru: Mutex::new(LruCache::new(cap)),
            pinned: Mutex::default(),
            inflight: Mutex::default(),
            counters,
        }
    }

    pub fn store(&self) -> &Arc<dyn CertStore> {
        &self.store
    }

    /// Makes a locally built set available without posting it. Pinned sets
    /// are never evicted but still expire.
    pub fn pin(&self, set: ValidatedSet) {
        self.pinned.lock().expect("lock").insert(set.token, set);
    }

    pub fn unpin(&self, token: &Token) {
        self.pinned.lock().expect("lock").remove(token);
    }

    pub fn invalidate(&self, token: &Token) {
        self.lru.lock().expect("lock").pop(token);
    }

    pub fn clear(&self) {
        self.lru.lock().expect("lock").clear();
    }

    pub fn len(&self) -> usize {
        self.lru.lock().expect("lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn metrics(&self) -> CacheMetrics {
        self.counters.snapshot()
    }

    fn cached(&self, token: &Token, now: Timestamp) -> Option<ValidatedSet> {
        if let Some(s) = self.pinned.lock().expect("lock").get(token) {
            if s.expiry() > now {
                return Some(s.clone());
            }
        }
        let mut lru = self.lru.lock().expect("lock");
        match lru.get(token) {
            Some(s) if s.expiry() > now => Some(s.clone()),
            Some(_) => {
                lru.pop(token);
                None
            }
            None => None,
        }
    }

    pub fn get_set(&self, token: &Token, now: Timestamp) -> Result<ValidatedSet, FetchError> {
        if let Some(s) = self.cached(token, now) {
            bump(&self.counters.set_hits);
            return Ok(s);
        }
        let (flight, leader) = {
            let mut inflight = self.inflight.lock().expect("lock");
            match inflight.get(token) {
                Some(f) => (f.clone(), false),
                None => {
                    let f = Arc::new(Flight::default());
                    inflight.insert(*token, f.clone());
                    (f, true)
                }
            }
        };
        if !leader {
            let mut r = flight.result.lock().expect("lock");
            while r.is_none() {
                r = flight.done.wait(r).expect("lock");
            }
            bump(&self.counters.set_hits);
            return r.clone().expect("set above");
        }
        // Another flight may have filled the cache between our check and
        // registering this one.
        let result = match self.cached(token, now) {
            Some(s) => Ok(s),
            None => {
                bump(&self.counters.set_misses);
                let r = fetch_validated(&*self.store, token, now);
                if let Ok(s) = &r {
                    self.lru.lock().expect("lock").put(*token, s.clone());
                }
                r
            }
        };
        *flight.result.lock().expect("lock") = Some(result.clone());
        flight.done.notify_all();
        self.inflight.lock().expect("lock").remove(token);
        result
    }
}

impl SetSource for SetCache {
    fn get_set(&self, token: &Token, now: Timestamp) -> Result<ValidatedSet, FetchError> {
        SetCache::get_set(self, token, now)
    }
}

/// Cache key for a context: a hash of its sorted, deduplicated root tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextKey([u8; 32]);

impl ContextKey {
    pub fn of(roots: &[Token]) -> Self {
        let sorted: BTreeSet<&Token> = roots.iter().collect();
        let mut h = Sha256::new();
        for t in sorted {
            h.update(t.as_bytes());
        }
        ContextKey(h.finalize().into())
    }
}

/// An indexed context plus what it was built from.
#[derive(Debug)]
pub struct AssembledContext {
    pub key: ContextKey,
    pub roots: Vec<Token>,
    pub context: IndexedContext,
    /// Tokens of every set in the context, breadth-first from the roots.
    pub members: Vec<Token>,
    pub skipped: Vec<(Token, SkipReason)>,
    /// When the context stops being usable: the earliest member expiry.
    pub expires: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssembleError {
    #[error("no root tokens given")]
    NoRoots,
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error("closure exceeds configured limits")]
    Truncated,
    #[error(transparent)]
    Context(#[from] ContextError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RefreshOutcome {
    pub refreshed: bool,
    /// How long until another refresh of this context is allowed.
    pub retry_after: Duration,
}

/// Contexts by root-token set, built on top of a [`SetCache`].
pub struct ContextCache {
    sets: Arc<SetCache>,
    contexts: Mutex<LruCache<ContextKey, Arc<AssembledContext>>>,
    throttle: Mutex<HashMap<ContextKey, Timestamp>>,
    rng: Mutex<StdRng>,
    config: CacheConfig,
    counters: Arc<Counters>,
}

impl ContextCache {
    pub fn new(store: Arc<dyn CertStore>, config: CacheConfig) -> Self {
        let counters: Arc<Counters> = Arc::default();
        let sets = Arc::new(SetCache::with_counters(store, config.set_capacity, counters.clone()));
        let rng = match config.jitter_seed {
            Some(s) => StdRng::seed_from_u64(s),
            None => StdRng::from_os_rng(),
        };
        ContextCache {
            sets,
            contexts: Mutex::new(LruCache::new(NonZeroUsize::new(config.context_capacity.max(1)).expect("non-zero"))),
            throttle: Mutex::default(),
            rng: Mutex::new(rng),
            config,
            counters,
        }
    }

    pub fn sets(&self) -> &Arc<SetCache> {
        &self.sets
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn metrics(&self) -> CacheMetrics {
        self.counters.snapshot()
    }

    /// The context for `roots`: their closures' union, indexed once.
    pub fn assemble(&self, roots: &[Token], now: Timestamp) -> Result<Arc<AssembledContext>, AssembleError> {
        if roots.is_empty() {
            return Err(AssembleError::NoRoots);
        }
        let key = ContextKey::of(roots);
        {
            let mut ctxs = self.contexts.lock().expect("lock");
            match ctxs.get(&key) {
                Some(c) if c.expires > now => {
                    bump(&self.counters.context_hits);
                    return Ok(c.clone());
                }
                Some(_) => {
                    ctxs.pop(&key);
                }
                None => {}
            }
        }
        bump(&self.counters.context_misses);
        let built = Arc::new(self.build(key, roots, now)?);
        self.contexts.lock().expect("lock").put(key, built.clone());
        Ok(built)
    }

    fn build(&self, key: ContextKey, roots: &[Token], now: Timestamp) -> Result<AssembledContext, AssembleError> {
        let closure = fetch_closure_many(&*self.sets, roots, &self.config.closure, now)?;
        if closure.truncated {
            return Err(AssembleError::Truncated);
        }
        let expires = closure.sets.iter().map(|s| s.expiry()).min().unwrap_or(Timestamp::MAX);
        let statements = closure.sets.iter().flat_map(|s| s.statements().iter().cloned()).collect();
        let context = IndexedContext::build(statements, now)?;
        let mut sorted: Vec<Token> = roots.to_vec();
        sorted.sort();
        sorted.dedup();
        Ok(AssembledContext { key, roots: sorted, members: closure.tokens(), skipped: closure.skipped, context, expires })
    }

    /// Called after a query against this context failed: drops the context
    /// and its member sets and rebuilds from the store, unless a refresh of
    /// the same context happened within the throttle delay.
    pub fn refresh_on_failure(&self, roots: &[Token], now: Timestamp) -> Result<RefreshOutcome, AssembleError> {
        let key = ContextKey::of(roots);
        {
            let mut th = self.throttle.lock().expect("lock");
            if let Some(&next) = th.get(&key) {
                if now < next {
                    bump(&self.counters.throttled);
                    debug!(retry_ms = now.until(next).as_millis() as u64, "refresh throttled");
                    return Ok(RefreshOutcome { refreshed: false, retry_after: now.until(next) });
                }
            }
            let delay = self.jittered();
            th.insert(key, now.saturating_add(delay));
        }
        let old = self.contexts.lock().expect("lock").pop(&key);
        let mut stale: BTreeSet<Token> = roots.iter().copied().collect();
        if let Some(c) = old {
            stale.extend(c.members.iter().copied());
            stale.extend(c.skipped.iter().map(|(t, _)| *t));
        }
        for t in &stale {
            self.sets.invalidate(t);
        }
        bump(&self.counters.refreshes);
        debug!(sets = stale.len(), "refreshing context");
        let rebuilt = self.build(key, roots, now)?;
        self.contexts.lock().expect("lock").put(key, Arc::new(rebuilt));
        let next = self.throttle.lock().expect("lock").get(&key).copied().unwrap_or(now);
        Ok(RefreshOutcome { refreshed: true, retry_after: now.until(next) })
    }

    fn jittered(&self) -> Duration {
        let base = self.config.throttle_delay;
        if base.is_zero() {
            return base;
        }
        let f: f64 = self.rng.lock().expect("lock").random_range(0.5..=1.0);
        base.mul_f64(f)
    }

    pub fn invalidate_all(&self) {
        self.contexts.lock().expect("lock").clear();
        self.sets.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{build_and_sign, Ed25519Key, KeyHandle, Validity};
    use crate::logic::{parse_program, parse_query, prove, SolveOptions};
    use crate::store::{post, CountingStore, SafeSets, StoreConfig};
    use crate::time::ManualClock;
    use std::thread;

    struct Fixture {
        clock: ManualClock,
        store: Arc<CountingStore<SafeSets>>,
        key: Ed25519Key,
    }

    fn fixture() -> Fixture {
        let clock = ManualClock::new(Timestamp(1_000));
        let inner = SafeSets::with_clock(StoreConfig::default(), Arc::new(clock.clone()));
        Fixture { clock, store: Arc::new(CountingStore::new(inner)), key: Ed25519Key::from_seed([2; 32]) }
    }

    impl Fixture {
        fn put(&self, label: &str, src: &str, links: Vec<Token>, expiry: i64) -> Token {
            let c = build_and_sign(
                label,
                parse_program(src).unwrap(),
                links,
                Validity { issued: Timestamp(0), expiry: Timestamp(expiry) },
                &self.key,
            )
            .unwrap();
            post(&*self.store, &c).unwrap()
        }
    }

    #[test]
    fn set_cache_hits_within_ttl_and_refetches_after() {
        let f = fixture();
        let t = f.put("a", "f(x).", vec![], 5_000);
        let cache = SetCache::new(f.store.clone(), 16);
        cache.get_set(&t, Timestamp(1_000)).unwrap();
        cache.get_set(&t, Timestamp(2_000)).unwrap();
        assert_eq!(f.store.fetches(), 1);
        f.put("a", "f(x).", vec![], 9_000);
        cache.get_set(&t, Timestamp(5_000)).unwrap();
        assert_eq!(f.store.fetches(), 2);
        assert_eq!(cache.metrics().set_hits, 1);
    }

    #[test]
    fn lru_evicts_least_recent() {
        let f = fixture();
        let ts: Vec<Token> = ["a", "b", "c"].iter().map(|l| f.put(l, "f(x).", vec![], 5_000)).collect();
        let cache = SetCache::new(f.store.clone(), 2);
        for t in &ts {
            assert_eq!(cache.get_set(t, Timestamp(1_000)).unwrap().token, *t);
        }
        assert_eq!(cache.len(), 2);
        cache.get_set(&ts[2], Timestamp(1_000)).unwrap();
        assert_eq!(f.store.fetches(), 3);
        cache.get_set(&ts[0], Timestamp(1_000)).unwrap();
        assert_eq!(f.store.fetches(), 4);
    }

    #[test]
    fn concurrent_misses_fetch_once() {
        let f = fixture();
        let t = f.put("a", "f(x).", vec![], 5_000);
        let cache = Arc::new(SetCache::new(f.store.clone(), 16));
        let barrier = Arc::new(std::sync::Barrier::new(16));
        let hs: Vec<_> = (0..16)
            .map(|_| {
                let (c, b) = (cache.clone(), barrier.clone());
                thread::spawn(move || {
                    b.wait();
                    c.get_set(&t, Timestamp(1_000)).unwrap()
                })
            })
            .collect();
        for h in hs {
            h.join().unwrap();
        }
        assert_eq!(f.store.fetches(), 1);
    }

    #[test]
    fn contexts_are_keyed_by_root_set_and_expire_with_members() {
        let f = fixture();
        let a = f.put("a", "f(x).", vec![], 2_000);
        let b = f.put("b", "g(x).", vec![], 9_000);
        let cc = ContextCache::new(f.store.clone(), CacheConfig::default());
        let c1 = cc.assemble(&[a, b], Timestamp(1_000)).unwrap();
        let before = f.store.fetches();
        let c2 = cc.assemble(&[b, a, b], Timestamp(1_500)).unwrap();
        assert!(Arc::ptr_eq(&c1, &c2));
        assert_eq!(f.store.fetches(), before);
        assert_eq!(c1.expires, Timestamp(2_000));
        f.clock.set(Timestamp(2_000));
        // `a` has expired; the store still serves it but validation refuses.
        let e = cc.assemble(&[a, b], Timestamp(2_000)).unwrap();
        assert!(e.skipped.iter().any(|(t, _)| *t == a));
        assert_eq!(e.context.len(), 1);
    }

    #[test]
    fn refresh_picks_up_new_content_and_is_throttled() {
        let f = fixture();
        let me = f.key.principal_id().to_string();
        let t = f.put("subject", "f(x).", vec![], 100_000);
        let cc = ContextCache::new(f.store.clone(), CacheConfig { jitter_seed: Some(1), ..Default::default() });
        let q = parse_query(&format!("\"{me}\": g(x)?")).unwrap();
        let ctx = cc.assemble(&[t], Timestamp(1_000)).unwrap();
        assert!(!prove(&ctx.context, &q, &SolveOptions::default()).unwrap().holds);
        f.put("subject", "f(x). g(x).", vec![], 100_000);
        let r = cc.refresh_on_failure(&[t], Timestamp(1_000)).unwrap();
        assert!(r.refreshed);
        assert!(r.retry_after >= Duration::from_millis(500) && r.retry_after <= Duration::from_secs(1));
        let ctx = cc.assemble(&[t], Timestamp(1_001)).unwrap();
        assert!(prove(&ctx.context, &q, &SolveOptions::default()).unwrap().holds);
        let again = cc.refresh_on_failure(&[t], Timestamp(1_100)).unwrap();
        assert!(!again.refreshed);
        assert_eq!(cc.metrics().throttled, 1);
        let later = cc.refresh_on_failure(&[t], Timestamp(2_001)).unwrap();
        assert!(later.refreshed);
        assert_eq!(cc.metrics().refreshes, 2);
    }
}
