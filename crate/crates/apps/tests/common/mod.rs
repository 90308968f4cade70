#![allow(dead_code)]

use std::sync::Arc;

use safe_apps::GuardConfig;
use safe_core::store::{CertStore, SafeSets, StoreConfig};
use safe_core::time::{Clock, ManualClock, Timestamp};

pub struct World {
    pub store: Arc<dyn CertStore>,
    pub clock: Arc<ManualClock>,
}

impl World {
    pub fn new() -> Self {
        let clock = Arc::new(ManualClock::new(Timestamp::from_millis(1_800_000_000_000)));
        let store = Arc::new(SafeSets::with_clock(StoreConfig::default(), clock.clone()));
        World { store, clock }
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        self.clock.clone()
    }
}

pub fn config() -> GuardConfig {
    GuardConfig::default()
}
