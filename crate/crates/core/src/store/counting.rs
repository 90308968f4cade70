use std::sync::atomic::{AtomicU64, Ordering};

use crate::cert::Token;
use crate::store::{CertStore, DeleteRequest, StoreError};

/// Counts operations passing through to an inner store.
pub struct CountingStore<S> {
    inner: S,
    fetches: AtomicU64,
    puts: AtomicU64,
}

impl<S: CertStore> CountingStore<S> {
    pub fn new(inner: S) -> Self {
        CountingStore { inner, fetches: AtomicU64::new(0), puts: AtomicU64::new(0) }
    }

    pub fn fetches(&self) -> u64 {
        self.fetches.load(Ordering::Relaxed)
    }

    pub fn puts(&self) -> u64 {
        self.puts.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.fetches.store(0, Ordering::Relaxed);
        self.puts.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: CertStore> CertStore for CountingStore<S> {
    fn put(&self, token: &Token, bytes: &[u8]) -> Result<(), StoreError> {
        self.puts.fetch_add(1, Ordering::Relaxed);
        self.inner.put(token, bytes)
    }

    fn fetch(&self, token: &Token) -> Result<Vec<u8>, StoreError> {
        self.fetches.fetch_add(1, Ordering::Relaxed);
        self.inner.fetch(token)
    }

    fn delete(&self, token: &Token, req: &DeleteRequest) -> Result<(), StoreError> {
        self.inner.delete(token, req)
    }
}
