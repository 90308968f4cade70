//! Workload generators and measurements for the platform's experiments.
//!
//! Every scenario is a pure function of its [`Params`]: principals, keys,
//! object IDs and topologies all derive from the seed, and time comes from a
//! manual clock, so every column except `latency_us` is reproducible.
//!
//! CSV columns, one row per guard request:
//!
//! | column | meaning |
//! |---|---|
//! | `scenario` | scenario name |
//! | `variant` | curve within the scenario (e.g. `pruned`, `noisy`, `direct`) |
//! | `index` | `primary` or `secondary`: the prover's lookup index |
//! | `x` | the swept parameter (chain length, depth, property count, hops) |
//! | `rep` | repetition or request number within `(variant, x)` |
//! | `allowed` | the decision |
//! | `steps` | prover steps, summed over blocks and any retry |
//! | `context_sets` | sets in the queried contexts |
//! | `context_statements` | statements in the queried contexts |
//! | `fetches` | store fetches caused by the request |
//! | `refreshes` | refresh rounds the request triggered |
//! | `latency_us` | wall time of the request |
//! | `answer_digest` | first 16 hex digits of SHA-256 over the sorted answers |

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use safe_core::logic::{Answer, IndexMode};
use safe_core::slang::GuardResult;
use safe_core::store::{CountingStore, SafeSets, StoreConfig};
use safe_core::time::{Clock, ManualClock, Timestamp};
use serde::Serialize;
use sha2::{Digest, Sha256};

mod scenarios;
pub mod stats;

pub use scenarios::run;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    PruningGroups,
    PruningNames,
    NamingCache,
    DualIndex,
    Routing,
    Attestation,
    LinkingGranularity,
    UpdateMix,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::PruningGroups,
        Scenario::PruningNames,
        Scenario::NamingCache,
        Scenario::DualIndex,
        Scenario::Routing,
        Scenario::Attestation,
        Scenario::LinkingGranularity,
        Scenario::UpdateMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PruningGroups => "pruning-groups",
            Scenario::PruningNames => "pruning-names",
            Scenario::NamingCache => "naming-cache",
            Scenario::DualIndex => "dual-index",
            Scenario::Routing => "routing",
            Scenario::Attestation => "attestation",
            Scenario::LinkingGranularity => "linking-granularity",
            Scenario::UpdateMix => "update-mix",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|c| c.name()).collect();
            format!("unknown scenario `{s}`; expected one of {}", names.join(", "))
        })
    }
}

/// Workload parameters. Each scenario reads the fields it needs.
#[derive(Clone, Debug)]
pub struct Params {
    pub seed: u64,
    /// Force one index everywhere; by default scenarios that compare
    /// indexes run both and the rest use the secondary index.
    pub index: Option<IndexMode>,
    pub reps: usize,
    /// Longest delegation chain or deepest path (pruning, dual-index).
    pub max_n: usize,
    /// Largest chain length that also gets a noisy context.
    pub noisy_max: usize,
    /// Naming tree shape (naming-cache).
    pub height: usize,
    pub branching: usize,
    /// Allocation tree depth under 10.0.0.0/8, branching 8 (routing).
    pub depth: u32,
    pub origins: usize,
    pub queries: usize,
    /// ACL length and property-count sweep (attestation).
    pub acl: usize,
    pub props_min: usize,
    pub props_max: usize,
    pub props_step: usize,
    /// Delegation workload (linking-granularity).
    pub principals: usize,
    pub objects: usize,
    pub delegations: usize,
    pub requests: usize,
    /// Update mix: rounds and fraction of rounds that first delegate.
    pub rounds: usize,
    pub update_ratio: f64,
    /// Failure burst: denied requests spread over the window.
    pub failures: usize,
    pub window_ms: u64,
    pub throttle_ms: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            seed: 1,
            index: None,
            reps: 3,
            max_n: 16,
            noisy_max: 12,
            height: 5,
            branching: 4,
            depth: 4,
            origins: 8,
            queries: 300,
            acl: 2000,
            props_min: 50,
            props_max: 450,
            props_step: 50,
            principals: 200,
            objects: 40,
            delegations: 1500,
            requests: 1000,
            rounds: 200,
            update_ratio: 0.2,
            failures: 50,
            window_ms: 1000,
            throttle_ms: 1000,
        }
    }
}

impl Params {
    /// A reduced workload that keeps every scenario's shape; for tests.
    pub fn small(seed: u64) -> Self {
        Params {
            seed,
            reps: 2,
            max_n: 6,
            noisy_max: 4,
            height: 3,
            branching: 3,
            depth: 2,
            origins: 3,
            queries: 40,
            acl: 200,
            props_min: 10,
            props_max: 40,
            props_step: 10,
            principals: 30,
            objects: 8,
            delegations: 120,
            requests: 80,
            rounds: 30,
            failures: 20,
            ..Params::default()
        }
    }

    /// The index modes a scenario comparing indexes should run.
    pub fn index_modes(&self) -> Vec<IndexMode> {
        match self.index {
            Some(m) => vec![m],
            None => vec![IndexMode::Primary, IndexMode::Secondary],
        }
    }

    /// The index a scenario that does not compare indexes should use.
    pub fn index_or_default(&self) -> IndexMode {
        self.index.unwrap_or(IndexMode::Secondary)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Row {
    pub scenario: &'static str,
    pub variant: String,
    pub index: &'static str,
    pub x: u64,
    pub rep: u64,
    pub allowed: bool,
    pub steps: u64,
    pub context_sets: u64,
    pub context_statements: u64,
    pub fetches: u64,
    pub refreshes: u64,
    pub latency_us: u64,
    pub answer_digest: String,
}

pub fn index_name(m: IndexMode) -> &'static str {
    match m {
        IndexMode::Primary => "primary",
        IndexMode::Secondary => "secondary",
    }
}

pub fn parse_index(s: &str) -> Result<IndexMode, String> {
    match s {
        "primary" => Ok(IndexMode::Primary),
        "secondary" => Ok(IndexMode::Secondary),
        _ => Err(format!("index must be `primary` or `secondary`, not `{s}`")),
    }
}

/// Digest of an answer list, independent of answer order.
pub fn answer_digest(answers: &[Answer]) -> String {
    let mut lines: Vec<String> = answers
        .iter()
        .map(|a| a.iter().map(|(v, c)| format!("{}={c}", v.name())).collect::<Vec<_>>().join(","))
        .collect();
    lines.sort();
    let h = Sha256::digest(lines.join("\n").as_bytes());
    h[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// A store that counts fetches, with a manual clock.
pub struct World {
    pub store: Arc<CountingStore<SafeSets>>,
    pub clock: Arc<ManualClock>,
}

impl World {
    pub fn new() -> Self {
        let clock = Arc::new(ManualClock::new(Timestamp::from_millis(1_800_000_000_000)));
        let store = Arc::new(CountingStore::new(SafeSets::with_clock(StoreConfig::default(), clock.clone())));
        World { store, clock }
    }

    pub fn dyn_store(&self) -> Arc<dyn safe_core::store::CertStore> {
        self.store.clone()
    }

    pub fn dyn_clock(&self) -> Arc<dyn Clock> {
        self.clock.clone()
    }
}

impl Default for World {
    fn default() -> Self {
        World::new()
    }
}

/// Builds rows for one scenario, with the fetch counter and timer.
pub(crate) struct Recorder<'w> {
    scenario: Scenario,
    world: &'w World,
    pub rows: Vec<Row>,
}

impl<'w> Recorder<'w> {
    pub fn new(scenario: Scenario, world: &'w World) -> Self {
        Recorder { scenario, world, rows: Vec::new() }
    }

    /// Runs one request and records it.
    pub fn guard<E>(
        &mut self,
        variant: &str,
        index: IndexMode,
        x: u64,
        rep: u64,
        f: impl FnOnce() -> Result<GuardResult, E>,
    ) -> Result<GuardResult, E> {
        let before = self.world.store.fetches();
        let t = Instant::now();
        let r = f()?;
        let latency = t.elapsed();
        let fetches = self.world.store.fetches() - before;
        self.rows.push(Row {
            scenario: self.scenario.name(),
            variant: variant.to_string(),
            index: index_name(index),
            x,
            rep,
            allowed: r.allowed,
            steps: r.diagnostics.steps,
            context_sets: r.diagnostics.context.len() as u64,
            context_statements: r.diagnostics.statements as u64,
            fetches,
            refreshes: r.diagnostics.refreshes as u64,
            latency_us: latency.as_micros() as u64,
            answer_digest: answer_digest(&r.bindings),
        });
        Ok(r)
    }
}

pub fn write_csv<W: std::io::Write>(rows: &[Row], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/bench.md")]
mod book {}
