//! Prefix delegation and route validation.
//!
//! A trust anchor allocates prefixes down a registry tree; each allocation
//! set links the allocation above it. An AS originates a route by sending
//! an advertisement linked to its own allocation, and every later hop links
//! the advertisement it received. Validating a route therefore needs only
//! the closure of the last advertisement plus the guard's policy.
//!
//! Advertisements are sets per (advertiser, prefix, receiver). Validation is
//! pull-based: a changed route means a new set and fresh fetches, so caching
//! buys little for one-shot route checks.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safe_core::cert::{PrincipalId, Token};
use safe_core::logic::Ipv4Prefix;
use safe_core::slang::GuardResult;
use safe_core::store::CertStore;
use safe_core::time::Clock;

use crate::fixture::Topology;
use crate::{statements, token_for, AppError, Driver, Guard, GuardConfig, Principal};

pub const SCRIPT: &str = include_str!("../scripts/routing.slang");

pub fn alloc_label(holder: &PrincipalId) -> String {
    format!("alloc/{holder}")
}

pub fn adv_label(prefix: &Ipv4Prefix, receiver: &PrincipalId) -> String {
    format!("adv/{prefix}/{receiver}")
}

/// Issues allocations and advertisements through the routing script.
pub struct Routing {
    driver: Driver,
}

impl Routing {
    pub fn new(store: Arc<dyn CertStore>, clock: Arc<dyn Clock>) -> Self {
        Routing { driver: Driver::new(SCRIPT, store, clock) }
    }

    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    /// The anchor's top-level allocation to `holder`.
    pub fn allocate_root(&self, anchor: &mut Principal, holder: &PrincipalId, prefix: &Ipv4Prefix) -> Result<Token, AppError> {
        self.driver.defcon(anchor, "allocateRoot", &[&holder.to_string(), &prefix.to_string()])
    }

    /// A suballocation from `delegator`, linked to the delegator's own
    /// allocation `up`.
    pub fn allocate(&self, delegator: &mut Principal, holder: &PrincipalId, prefix: &Ipv4Prefix, up: &Token) -> Result<Token, AppError> {
        self.driver.defcon(delegator, "allocate", &[&holder.to_string(), &prefix.to_string(), &up.to_string()])
    }

    /// `sender` advertises `prefix` to `receiver`, having learned it from
    /// `prev` (itself when originating). `support` is the advertisement
    /// received from `prev`, or the sender's allocation when originating.
    pub fn advertise(&self, sender: &mut Principal, receiver: &PrincipalId, prefix: &Ipv4Prefix, prev: &PrincipalId, support: &Token) -> Result<Token, AppError> {
        let args = [receiver.to_string(), prefix.to_string(), prev.to_string(), support.to_string()];
        self.driver.defcon(sender, "advertise", &args.iter().map(String::as_str).collect::<Vec<_>>())
    }

    /// Signs an advertisement by hand under `label`, bypassing the script.
    /// Used to build corrupted copies.
    pub fn advertise_raw(&self, sender: &Principal, label: &str, receiver: &PrincipalId, prefix: &Ipv4Prefix, prev: &PrincipalId, links: Vec<Token>) -> Result<Token, AppError> {
        let stmts = statements(&format!("adv(\"{receiver}\", ipv4\"{prefix}\", \"{prev}\")."))?;
        self.driver.issuer().issue(sender, label, stmts, links)
    }
}

/// A guard that validates routes against its policy.
pub struct RoutingGuard {
    guard: Guard,
}

impl RoutingGuard {
    pub fn new(principal: Principal, store: Arc<dyn CertStore>, clock: Arc<dyn Clock>, config: GuardConfig) -> Self {
        RoutingGuard { guard: Guard::new(principal, SCRIPT, store, clock, config) }
    }

    pub fn post_policy(&mut self, anchor: &PrincipalId) -> Result<Token, AppError> {
        self.guard.defcon("routingPolicy", &[&anchor.to_string()])
    }

    pub fn guard(&mut self) -> &mut Guard {
        &mut self.guard
    }

    /// Is the route to `prefix` that `advertiser` sent `receiver` (as set
    /// `adv`) valid?
    pub fn validate_route(&mut self, receiver: &PrincipalId, prefix: &Ipv4Prefix, advertiser: &PrincipalId, adv: &Token) -> Result<GuardResult, AppError> {
        let args = [receiver.to_string(), prefix.to_string(), advertiser.to_string(), adv.to_string()];
        self.guard.check("validateRoute", &args.iter().map(String::as_str).collect::<Vec<_>>(), None)
    }
}

/// One advertisement as posted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Advertisement {
    pub origin: usize,
    pub advertiser: usize,
    pub receiver: usize,
    pub prefix: Ipv4Prefix,
    /// AS hops from the origin to the receiver.
    pub hops: usize,
    pub token: Token,
}

/// Single-hop corruptions of a posted advertisement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    /// Claims a predecessor that never advertised the prefix to the sender.
    WrongPredecessor,
    /// Drops the link to the predecessor's advertisement.
    MissingLink,
    /// The origin advertises a prefix outside its allocation.
    ForeignPrefix,
}

impl Corruption {
    pub const ALL: [Corruption; 3] = [Corruption::WrongPredecessor, Corruption::MissingLink, Corruption::ForeignPrefix];
}

/// A query a guard should deny.
#[derive(Clone, Debug)]
pub struct Forged {
    pub kind: Corruption,
    pub receiver: usize,
    pub advertiser: usize,
    pub prefix: Ipv4Prefix,
    pub token: Token,
}

/// A topology with every principal, allocation and advertisement posted.
pub struct Network {
    pub topology: Topology,
    pub anchor: Principal,
    pub ases: Vec<Principal>,
    /// Each AS's allocation set.
    pub allocations: Vec<Token>,
    routing: Routing,
}

impl Network {
    /// Posts the allocation tree: the anchor allocates the top level, one
    /// registry per interior node suballocates, and AS `i` receives leaf `i`.
    /// Principals derive from `seed`.
    pub fn build(topology: Topology, seed: u64, store: Arc<dyn CertStore>, clock: Arc<dyn Clock>) -> Result<Self, AppError> {
        let routing = Routing::new(store, clock);
        let alloc = topology.alloc;
        alloc.validate()?;
        let mut next_seed = seed.wrapping_mul(1_000_003);
        let mut fresh = || {
            next_seed = next_seed.wrapping_add(1);
            Principal::from_seed(next_seed)
        };
        let mut anchor = fresh();
        let ases: Vec<Principal> = (0..topology.len()).map(|_| fresh()).collect();

        // Level by level: (path, holder, token of the holder's allocation).
        let b = alloc.branching;
        let mut level: Vec<(Vec<u32>, Option<Principal>, Option<Token>)> = vec![(Vec::new(), None, None)];
        let mut allocations = vec![None; ases.len()];
        for depth in 1..=alloc.depth {
            let leaf = depth == alloc.depth;
            let mut next = Vec::with_capacity(level.len() * b as usize);
            for (path, mut holder, up) in level {
                for i in 0..b {
                    let mut child = path.clone();
                    child.push(i);
                    let prefix = alloc.prefix(&child);
                    let leaf_index = leaf.then(|| child.iter().fold(0usize, |acc, &c| acc * b as usize + c as usize));
                    let (child_holder, child_id) = match leaf_index {
                        Some(k) => (None, ases[k].id()),
                        None => {
                            let p = fresh();
                            let id = p.id();
                            (Some(p), id)
                        }
                    };
                    let token = match (&mut holder, &up) {
                        (Some(h), Some(up)) => routing.allocate(h, &child_id, &prefix, up)?,
                        _ => routing.allocate_root(&mut anchor, &child_id, &prefix)?,
                    };
                    match leaf_index {
                        Some(k) => allocations[k] = Some(token),
                        None => next.push((child, child_holder, Some(token))),
                    }
                }
            }
            level = next;
        }
        let allocations = allocations.into_iter().map(|t| t.expect("every leaf allocated")).collect();
        Ok(Network { topology, anchor, ases, allocations, routing })
    }

    pub fn routing(&self) -> &Routing {
        &self.routing
    }

    /// The prefix AS `i` holds.
    pub fn prefix_of(&self, i: usize) -> Ipv4Prefix {
        let a = &self.topology.alloc;
        a.prefix(&a.leaf_path(i))
    }

    /// `origin` originates its prefix and every reachable AS forwards along
    /// shortest paths. Returned in BFS order.
    pub fn announce(&mut self, origin: usize) -> Result<Vec<Advertisement>, AppError> {
        let prefix = self.prefix_of(origin);
        let (parent, dist) = self.topology.shortest_paths(origin);
        let mut order: Vec<usize> = (0..self.ases.len()).filter(|&v| v != origin && dist[v].is_some()).collect();
        order.sort_by_key(|&v| (dist[v], v));
        // received[v]: the advertisement v got from its parent.
        let mut received: Vec<Option<Token>> = vec![None; self.ases.len()];
        let mut out = Vec::with_capacity(order.len());
        for v in order {
            let u = parent[v].expect("reachable non-origin has a parent");
            let (prev, support) = match parent[u] {
                None => (self.ases[u].id(), self.allocations[u]),
                Some(p) => (self.ases[p].id(), received[u].expect("parent announced first")),
            };
            let receiver = self.ases[v].id();
            let token = self.routing.advertise(&mut self.ases[u], &receiver, &prefix, &prev, &support)?;
            received[v] = Some(token);
            out.push(Advertisement { origin, advertiser: u, receiver: v, prefix, hops: dist[v].unwrap(), token });
        }
        Ok(out)
    }

    /// A corrupted copy of `adv`, re-signed by its advertiser under a fresh
    /// label. `ForeignPrefix` applies to the origin's own advertisements and
    /// returns `None` for later hops, as does `WrongPredecessor` when the
    /// advertiser has no other neighbor to blame.
    pub fn corrupt(&self, adv: &Advertisement, kind: Corruption, rng: &mut impl Rng) -> Result<Option<Forged>, AppError> {
        let (u, v) = (adv.advertiser, adv.receiver);
        let receiver = self.ases[v].id();
        let origin_hop = adv.hops == 1;
        let (parent, _) = self.topology.shortest_paths(adv.origin);
        let support = match parent[u] {
            None => self.allocations[u],
            Some(p) => token_for(&self.ases[p].id(), &adv_label(&adv.prefix, &self.ases[u].id())),
        };
        let prev = parent[u].map_or(self.ases[u].id(), |p| self.ases[p].id());
        let (prefix, prev, links) = match kind {
            Corruption::WrongPredecessor => {
                let others: Vec<usize> = self.topology.adj[u].iter().copied().filter(|&w| Some(w) != parent[u] && w != v).collect();
                let Some(&w) = others.choose(rng) else { return Ok(None) };
                (adv.prefix, self.ases[w].id(), vec![support])
            }
            Corruption::MissingLink => {
                if origin_hop {
                    return Ok(None);
                }
                (adv.prefix, prev, Vec::new())
            }
            Corruption::ForeignPrefix => {
                if !origin_hop {
                    return Ok(None);
                }
                let n = self.ases.len();
                let other = (u + rng.random_range(1..n)) % n;
                (self.prefix_of(other), prev, vec![support])
            }
        };
        let label = format!("{}/forged-{kind:?}", adv_label(&prefix, &receiver));
        let token = self.routing.advertise_raw(&self.ases[u], &label, &receiver, &prefix, &prev, links)?;
        Ok(Some(Forged { kind, receiver: v, advertiser: u, prefix, token }))
    }
}

/// Picks `count` distinct origins reproducibly.
pub fn pick_origins(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, n, count.min(n)).into_vec()
}
