//! Route validation over a generated topology, under three query models.

use anyhow::{ensure, Result};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_apps::fixture::{AllocTree, Topology};
use safe_apps::routing::{pick_origins, Advertisement, Network, RoutingGuard};
use safe_apps::Principal;
use safe_core::cache::CacheConfig;

use super::guard_config;
use crate::{Params, Recorder, Row, Scenario, World};

/// Announces from several origins, then validates `queries` routes per
/// model with a fresh guard each:
///
/// * `same-origin`: routes to one origin's prefix, receivers at random;
/// * `random`: any posted route;
/// * `same-receiver`: routes held by one AS, cycling over origins.
///
/// `x` is the route's hop count.
pub fn run(p: &Params) -> Result<Vec<Row>> {
    let world = World::new();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let alloc = AllocTree { base: "10.0.0.0/8".parse()?, branching: 8, depth: p.depth };
    let topo = Topology::generate(alloc, 0.5, &mut rng);
    let mut net = Network::build(topo, p.seed, world.dyn_store(), world.dyn_clock())?;
    let origins = pick_origins(net.ases.len(), p.origins, p.seed);
    let mut by_origin: Vec<Vec<Advertisement>> = Vec::new();
    for &o in &origins {
        by_origin.push(net.announce(o)?);
    }
    let all: Vec<&Advertisement> = by_origin.iter().flatten().collect();
    let receiver = all.choose(&mut rng).map(|a| a.receiver).unwrap_or(0);
    let held: Vec<&Advertisement> = all.iter().copied().filter(|a| a.receiver == receiver).collect();

    let models: [(&str, Vec<&Advertisement>); 3] = [
        ("same-origin", (0..p.queries).filter_map(|_| by_origin[0].choose(&mut rng)).collect()),
        ("random", (0..p.queries).filter_map(|_| all.choose(&mut rng).copied()).collect()),
        ("same-receiver", (0..p.queries).filter_map(|i| held.get(i % held.len().max(1)).copied()).collect()),
    ];
    let index = p.index_or_default();
    let mut rec = Recorder::new(Scenario::Routing, &world);
    for (k, (model, queries)) in models.into_iter().enumerate() {
        let mut g = RoutingGuard::new(Principal::from_seed(9_100 + k as u64), world.dyn_store(), world.dyn_clock(), guard_config(index, CacheConfig::default()));
        g.post_policy(&net.anchor.id())?;
        for (rep, a) in queries.into_iter().enumerate() {
            let (r, adv) = (net.ases[a.receiver].id(), net.ases[a.advertiser].id());
            let res = rec.guard(model, index, a.hops as u64, rep as u64, || g.validate_route(&r, &a.prefix, &adv, &a.token))?;
            ensure!(res.allowed, "route {} -> {} did not validate", a.advertiser, a.receiver);
        }
    }
    Ok(rec.rows)
}
