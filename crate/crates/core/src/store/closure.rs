//! Breadth-first fetch of a set and everything it links to.

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use crate::cert::{verify_encoded, Token, ValidatedSet, VerifyError};
use crate::store::{CertStore, StoreError};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("{0} not found")]
    NotFound(Token),
    #[error("{token}: {err}")]
    Invalid { token: Token, err: VerifyError },
    #[error("store returned a set for {served} when asked for {requested}")]
    WrongToken { requested: Token, served: Token },
    #[error("{token}: {err}")]
    Store { token: Token, err: StoreError },
}

impl FetchError {
    pub fn token(&self) -> Token {
        match self {
            FetchError::NotFound(t) => *t,
            FetchError::Invalid { token, .. } | FetchError::Store { token, .. } => *token,
            FetchError::WrongToken { requested, .. } => *requested,
        }
    }
}

/// Anything that can hand out validated sets by token.
pub trait SetSource: Sync {
    fn get_set(&self, token: &Token, now: Timestamp) -> Result<ValidatedSet, FetchError>;
}

/// Fetches from a store and validates every set, with no caching.
pub struct StoreSource<S>(pub S);

/// Fetches `token` from `store` and validates it, including that the
/// certificate really belongs under that token.
pub fn fetch_validated(store: &dyn CertStore, token: &Token, now: Timestamp) -> Result<ValidatedSet, FetchError> {
    let bytes = store.fetch(token).map_err(|e| match e {
        StoreError::NotFound(_) => FetchError::NotFound(*token),
        err => FetchError::Store { token: *token, err },
    })?;
    let (_, v) = verify_encoded(&bytes, now).map_err(|err| FetchError::Invalid { token: *token, err })?;
    if v.token != *token {
        return Err(FetchError::WrongToken { requested: *token, served: v.token });
    }
    Ok(v)
}

impl<S: CertStore> SetSource for StoreSource<S> {
    fn get_set(&self, token: &Token, now: Timestamp) -> Result<ValidatedSet, FetchError> {
        fetch_validated(&self.0, token, now)
    }
}

impl<T: SetSource + Send + ?Sized> SetSource for Arc<T> {
    fn get_set(&self, token: &Token, now: Timestamp) -> Result<ValidatedSet, FetchError> {
        (**self).get_set(token, now)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClosureLimits {
    /// Most fetch attempts, including ones that fail.
    pub max_sets: usize,
    pub max_statements: usize,
    /// Most link hops from a root.
    pub max_depth: usize,
    pub concurrency: usize,
}

impl Default for ClosureLimits {
    fn default() -> Self {
        ClosureLimits { max_sets: 512, max_statements: 8192, max_depth: 32, concurrency: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    Missing,
    Invalid(String),
    StatementBudget,
}

#[derive(Debug, Clone, Default)]
pub struct ClosureResult {
    /// Validated sets in breadth-first order, each token once.
    pub sets: Vec<ValidatedSet>,
    pub skipped: Vec<(Token, SkipReason)>,
    /// True iff some fetch was not attempted because a limit was reached.
    pub truncated: bool,
    pub attempts: usize,
}

impl ClosureResult {
    pub fn tokens(&self) -> Vec<Token> {
        self.sets.iter().map(|s| s.token).collect()
    }

    pub fn statement_count(&self) -> usize {
        self.sets.iter().map(|s| s.statements().len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClosureError {
    #[error("root set unavailable: {0}")]
    Root(FetchError),
    #[error("none of the {0} root sets could be fetched")]
    AllRootsMissing(usize),
}

pub fn fetch_closure(
    source: &dyn SetSource,
    root: &Token,
    limits: &ClosureLimits,
    now: Timestamp,
) -> Result<ClosureResult, ClosureError> {
    let r = walk(source, &[*root], limits, now);
    if let Some(e) = r.1.into_iter().next() {
        return Err(ClosureError::Root(e));
    }
    Ok(r.0)
}

/// Union of several closures. Missing roots are reported as skipped unless
/// all of them are missing.
pub fn fetch_closure_many(
    source: &dyn SetSource,
    roots: &[Token],
    limits: &ClosureLimits,
    now: Timestamp,
) -> Result<ClosureResult, ClosureError> {
    let (mut res, root_errs) = walk(source, roots, limits, now);
    if !roots.is_empty() && res.sets.is_empty() && !root_errs.is_empty() && root_errs.len() == dedup_len(roots) {
        return Err(ClosureError::AllRootsMissing(root_errs.len()));
    }
    for e in root_errs {
        res.skipped.push((e.token(), reason(&e)));
    }
    Ok(res)
}

fn dedup_len(t: &[Token]) -> usize {
    t.iter().collect::<HashSet<_>>().len()
}

fn reason(e: &FetchError) -> SkipReason {
    match e {
        FetchError::NotFound(_) => SkipReason::Missing,
        other => SkipReason::Invalid(other.to_string()),
    }
}

fn fetch_level(source: &dyn SetSource, level: &[Token], concurrency: usize, now: Timestamp) -> Vec<Result<ValidatedSet, FetchError>> {
    if level.len() <= 1 || concurrency <= 1 {
        return level.iter().map(|t| source.get_set(t, now)).collect();
    }
    let workers = concurrency.min(level.len());
    let chunk = level.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = level
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|t| source.get_set(t, now)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("fetch worker panicked")).collect()
    })
}

/// Returns the closure and the errors for roots that could not be fetched.
fn walk(
    source: &dyn SetSource,
    roots: &[Token],
    limits: &ClosureLimits,
    now: Timestamp,
) -> (ClosureResult, Vec<FetchError>) {
    let mut res = ClosureResult::default();
    let mut root_errs = Vec::new();
    let mut visited: HashSet<Token> = HashSet::new();
    let mut level: Vec<Token> = roots.iter().copied().filter(|t| visited.insert(*t)).collect();
    let mut statements = 0usize;
    let mut depth = 0usize;
    while !level.is_empty() {
        let budget = limits.max_sets.saturating_sub(res.attempts);
        if level.len() > budget {
            level.truncate(budget);
            res.truncated = true;
        }
        res.attempts += level.len();
        let fetched = fetch_level(source, &level, limits.concurrency, now);
        let mut next = Vec::new();
        for (token, r) in level.iter().zip(fetched) {
            let set = match r {
                Ok(s) => s,
                Err(e) if depth == 0 => {
                    root_errs.push(e);
                    continue;
                }
                Err(e) => {
                    res.skipped.push((*token, reason(&e)));
                    continue;
                }
            };
            let n = set.statements().len();
            if statements + n > limits.max_statements {
                res.skipped.push((*token, SkipReason::StatementBudget));
                res.truncated = true;
                continue;
            }
            statements += n;
            for l in set.links() {
                if !visited.contains(l) {
                    if depth >= limits.max_depth {
                        res.truncated = true;
                    } else {
                        visited.insert(*l);
                        next.push(*l);
                    }
                }
            }
            res.sets.push(set);
        }
        level = next;
        depth += 1;
    }
    (res, root_errs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{build_and_sign, Ed25519Key, Validity};
    use crate::store::{post, CountingStore, SafeSets};
    use crate::logic::parse_program;

    fn mk(store: &SafeSets, k: &Ed25519Key, label: &str, links: Vec<Token>) -> Token {
        let st = parse_program("f(x).").unwrap();
        let c = build_and_sign(label, st, links, Validity { issued: Timestamp(0), expiry: Timestamp(i64::MAX / 2) }, k).unwrap();
        post(store, &c).unwrap()
    }

    fn tok(k: &Ed25519Key, label: &str) -> Token {
        crate::cert::make_token(&crate::cert::KeyHandle::principal_id(k), label).unwrap()
    }

    #[test]
    fn tree_of_seven() {
        let s = SafeSets::in_memory();
        let k = Ed25519Key::from_seed([1; 32]);
        let leaves: Vec<Token> = (0..4).map(|i| mk(&s, &k, &format!("leaf{i}"), vec![])).collect();
        let mid1 = mk(&s, &k, "mid1", leaves[..2].to_vec());
        let mid2 = mk(&s, &k, "mid2", leaves[2..].to_vec());
        let root = mk(&s, &k, "root", vec![mid1, mid2]);
        let r = fetch_closure(&StoreSource(&s), &root, &ClosureLimits::default(), Timestamp(1)).unwrap();
        assert_eq!(r.sets.len(), 7);
        assert!(!r.truncated);
        assert_eq!(r.tokens()[0], root);
    }

    #[test]
    fn mutual_links_terminate() {
        let s = CountingStore::new(SafeSets::in_memory());
        let k = Ed25519Key::from_seed([1; 32]);
        let a = tok(&k, "a");
        let b = mk(s.inner(), &k, "b", vec![a]);
        mk(s.inner(), &k, "a", vec![b, a]);
        let r = fetch_closure(&StoreSource(&s), &a, &ClosureLimits::default(), Timestamp(1)).unwrap();
        assert_eq!(r.sets.len(), 2);
        assert_eq!(s.fetches(), 2);
    }

    #[test]
    fn missing_root_is_an_error_but_missing_links_are_skipped() {
        let s = SafeSets::in_memory();
        let k = Ed25519Key::from_seed([1; 32]);
        let ghost = tok(&k, "ghost");
        assert!(matches!(
            fetch_closure(&StoreSource(&s), &ghost, &ClosureLimits::default(), Timestamp(1)),
            Err(ClosureError::Root(FetchError::NotFound(_)))
        ));
        let root = mk(&s, &k, "root", vec![ghost]);
        let r = fetch_closure(&StoreSource(&s), &root, &ClosureLimits::default(), Timestamp(1)).unwrap();
        assert_eq!(r.sets.len(), 1);
        assert_eq!(r.skipped, vec![(ghost, SkipReason::Missing)]);
        assert!(!r.truncated);
    }

    #[test]
    fn set_cap_truncates() {
        let s = SafeSets::in_memory();
        let k = Ed25519Key::from_seed([1; 32]);
        let kids: Vec<Token> = (0..199).map(|i| mk(&s, &k, &format!("k{i}"), vec![])).collect();
        let root = mk(&s, &k, "root", kids);
        let limits = ClosureLimits { max_sets: 50, ..Default::default() };
        let r = fetch_closure(&StoreSource(&s), &root, &limits, Timestamp(1)).unwrap();
        assert!(r.truncated);
        assert_eq!(r.sets.len(), 50);
    }
}
