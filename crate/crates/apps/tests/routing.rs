mod common;

use common::{config, World};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_apps::fixture::{AllocTree, Topology};
use safe_apps::routing::{Corruption, Network, RoutingGuard};
use safe_apps::Principal;

fn network(w: &World, depth: u32, seed: u64) -> (Network, RoutingGuard) {
    let alloc = AllocTree { base: "10.0.0.0/8".parse().unwrap(), branching: 8, depth };
    let topo = Topology::generate(alloc, 0.5, &mut ChaCha8Rng::seed_from_u64(seed));
    let net = Network::build(topo, seed, w.store.clone(), w.clock()).unwrap();
    let mut guard = RoutingGuard::new(Principal::from_seed(99), w.store.clone(), w.clock(), config());
    guard.post_policy(&net.anchor.id()).unwrap();
    (net, guard)
}

#[test]
fn every_shortest_path_advertisement_validates() {
    let w = World::new();
    let (mut net, mut guard) = network(&w, 2, 1);
    for origin in [0, 37] {
        let advs = net.announce(origin).unwrap();
        assert_eq!(advs.len(), net.ases.len() - 1);
        for a in &advs {
            let r = guard
                .validate_route(&net.ases[a.receiver].id(), &a.prefix, &net.ases[a.advertiser].id(), &a.token)
                .unwrap();
            assert!(r.allowed, "route {} -> {} ({} hops)", a.advertiser, a.receiver, a.hops);
        }
    }
}

#[test]
fn corrupted_hops_are_denied() {
    let w = World::new();
    let (mut net, mut guard) = network(&w, 2, 2);
    let advs = net.announce(5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = [0usize; 3];
    for a in &advs {
        for (i, kind) in Corruption::ALL.into_iter().enumerate() {
            let Some(f) = net.corrupt(a, kind, &mut rng).unwrap() else { continue };
            seen[i] += 1;
            let r = guard.validate_route(&net.ases[f.receiver].id(), &f.prefix, &net.ases[f.advertiser].id(), &f.token).unwrap();
            assert!(!r.allowed, "{kind:?} on {} -> {} validated", a.advertiser, a.receiver);
        }
    }
    assert!(seen.iter().all(|&n| n > 0), "{seen:?}");
}

#[test]
fn route_closure_holds_predecessor_and_allocation_chain() {
    let w = World::new();
    let (mut net, mut guard) = network(&w, 2, 4);
    let advs = net.announce(0).unwrap();
    let far = advs.iter().max_by_key(|a| a.hops).unwrap();
    let r = guard.validate_route(&net.ases[far.receiver].id(), &far.prefix, &net.ases[far.advertiser].id(), &far.token).unwrap();
    assert!(r.allowed);
    // One set per hop, the origin's allocation and its parent, plus the policy.
    let ctx = guard.guard().interpreter().cache().assemble(&r.diagnostics.context, w.clock.now()).unwrap();
    assert_eq!(ctx.members.len(), far.hops + 2 + 1);
}

use safe_core::time::Clock;
