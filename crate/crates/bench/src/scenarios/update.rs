//! Delegations arriving at a warm guard, and refresh throttling.

use std::time::Duration;

use anyhow::{ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safe_apps::strong::{Linking, Strong, StrongGuard};
use safe_apps::Principal;
use safe_core::cache::CacheConfig;

use super::guard_config;
use crate::{Params, Recorder, Row, Scenario, World};

/// Variants:
///
/// * `warm`: the first check, which fills the caches;
/// * `query`: a check whose answer is already cached;
/// * `update`: a check right after a new delegation, which the cached
///   context lacks, so it is denied, refreshed and retried;
/// * `failure-burst`: `failures` denied checks spread over `window_ms`.
pub fn run(p: &Params) -> Result<Vec<Row>> {
    let world = World::new();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let strong = Strong::new(world.dyn_store(), world.dyn_clock(), Linking::Direct);
    let throttle = Duration::from_millis(p.throttle_ms);
    let cache = CacheConfig { throttle_delay: throttle, jitter_seed: Some(p.seed), ..CacheConfig::default() };
    let index = p.index_or_default();
    let mut g = StrongGuard::new(Principal::from_seed(9_400), world.dyn_store(), world.dyn_clock(), guard_config(index, cache));
    g.post_policy()?;
    let (mut owner, holder) = (Principal::from_seed(p.seed ^ 0x51), Principal::from_seed(p.seed ^ 0x52));
    strong.enroll(&owner)?;
    strong.enroll(&holder)?;
    let obj = strong.new_object(&mut owner)?;
    let t = strong.delegate_capability(&mut owner, &holder.id(), &obj, "read", false)?;
    let bearer = strong.accept_capability(&holder, &obj, t)?;
    let who = holder.id();

    let mut rec = Recorder::new(Scenario::UpdateMix, &world);
    rec.guard("warm", index, 0, 0, || g.check_capability(&who, &obj, "read", &bearer))?;
    for round in 0..p.rounds as u64 {
        world.clock.advance(throttle * 2);
        if rng.random_bool(p.update_ratio) {
            let privilege = format!("p{round}");
            let t = strong.delegate_capability(&mut owner, &who, &obj, &privilege, false)?;
            strong.accept_capability(&holder, &obj, t)?;
            let r = rec.guard("update", index, round, 0, || g.check_capability(&who, &obj, &privilege, &bearer))?;
            ensure!(r.allowed, "update round {round} was not picked up");
        } else {
            rec.guard("query", index, round, 0, || g.check_capability(&who, &obj, "read", &bearer))?;
        }
    }
    world.clock.advance(throttle * 2);
    let step = Duration::from_millis(p.window_ms) / p.failures.max(1) as u32;
    for i in 0..p.failures as u64 {
        rec.guard("failure-burst", index, 0, i, || g.check_capability(&who, &obj, "admin", &bearer))?;
        world.clock.advance(step);
    }
    Ok(rec.rows)
}
