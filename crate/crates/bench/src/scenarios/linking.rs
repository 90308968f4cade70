//! Direct versus coarse linking on the same delegation workload.

use anyhow::Result;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safe_apps::strong::{Linking, Strong, StrongGuard};
use safe_apps::Principal;
use safe_core::cache::CacheConfig;
use safe_core::store::ClosureLimits;

use super::guard_config;
use crate::{Params, Recorder, Row, Scenario, World};

/// Random capability delegations among `principals` over `objects`, then
/// `requests` checks: most by holders, the rest by random principals. The
/// workload is replayed identically under each linking mode.
pub fn run(p: &Params) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (variant, linking) in [("direct", Linking::Direct), ("coarse", Linking::Coarse)] {
        rows.extend(one(p, variant, linking)?);
    }
    Ok(rows)
}

fn one(p: &Params, variant: &str, linking: Linking) -> Result<Vec<Row>> {
    let world = World::new();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let strong = Strong::new(world.dyn_store(), world.dyn_clock(), linking);
    let mut people: Vec<Principal> = (0..p.principals as u64).map(|i| Principal::from_seed(p.seed.wrapping_mul(1_009).wrapping_add(i))).collect();
    for q in &people {
        strong.enroll(q)?;
    }
    let mut objects = Vec::with_capacity(p.objects);
    // holders[o]: (principal, delegatable), owner first.
    let mut holders: Vec<Vec<(usize, bool)>> = Vec::with_capacity(p.objects);
    for _ in 0..p.objects {
        let owner = rng.random_range(0..people.len());
        objects.push(strong.new_object(&mut people[owner])?);
        holders.push(vec![(owner, true)]);
    }
    for _ in 0..p.delegations {
        let o = rng.random_range(0..objects.len());
        let delegators: Vec<usize> = holders[o].iter().filter(|h| h.1).map(|h| h.0).collect();
        let Some(&from) = delegators.choose(&mut rng) else { continue };
        let to = rng.random_range(0..people.len());
        if holders[o].iter().any(|h| h.0 == to) {
            continue;
        }
        let flag = rng.random_bool(0.5);
        let to_id = people[to].id();
        let t = strong.delegate_capability(&mut people[from], &to_id, &objects[o], "read", flag)?;
        strong.accept_capability(&people[to], &objects[o], t)?;
        holders[o].push((to, flag));
    }

    let index = p.index_or_default();
    let limits = ClosureLimits { max_sets: 100_000, max_statements: 1_000_000, max_depth: 1_024, ..ClosureLimits::default() };
    let mut g = StrongGuard::new(Principal::from_seed(9_300), world.dyn_store(), world.dyn_clock(), guard_config(index, CacheConfig { closure: limits, ..CacheConfig::default() }));
    g.post_policy()?;
    let mut rec = Recorder::new(Scenario::LinkingGranularity, &world);
    for rep in 0..p.requests as u64 {
        let o = rng.random_range(0..objects.len());
        let who = if rng.random_bool(0.8) { holders[o].choose(&mut rng).map(|h| h.0).unwrap_or(0) } else { rng.random_range(0..people.len()) };
        let id = people[who].id();
        let bearer = strong.bearer(&id, &objects[o]);
        rec.guard(variant, index, o as u64, rep, || g.check_capability(&id, &objects[o], "read", &bearer))?;
    }
    Ok(rec.rows)
}
