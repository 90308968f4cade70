//! Attested access with a fixed ACL and a growing image property list.

use std::collections::BTreeSet;

use anyhow::{ensure, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safe_apps::attest::{Attest, AttestGuard, Pattern};
use safe_apps::Principal;
use safe_core::cache::CacheConfig;

use super::guard_config;
use crate::{Params, Recorder, Row, Scenario, World};

/// For each property count, even repetitions use an image disjoint from
/// the ACL and odd ones share exactly one property at a random position.
/// Every decision is checked against set intersection.
pub fn run(p: &Params) -> Result<Vec<Row>> {
    let world = World::new();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let attest = Attest::new(world.dyn_store(), world.dyn_clock());
    let (mut provider, endorser, mut owner) = (Principal::from_seed(p.seed ^ 0xa1), Principal::from_seed(p.seed ^ 0xa2), Principal::from_seed(p.seed ^ 0xa3));
    let acl: Vec<String> = (0..p.acl).map(|i| format!("acl-{i}")).collect();
    let obj = attest.new_object(&mut owner, &acl)?;
    let acl_set: BTreeSet<&str> = acl.iter().map(String::as_str).collect();

    let index = p.index_or_default();
    let mut guards: Vec<(Pattern, AttestGuard)> = Pattern::ALL
        .into_iter()
        .enumerate()
        .map(|(i, pat)| (pat, AttestGuard::new(Principal::from_seed(9_200 + i as u64), provider.id(), world.dyn_store(), world.dyn_clock(), guard_config(index, CacheConfig::default()))))
        .collect();
    for (_, g) in guards.iter_mut() {
        g.post_policy(&endorser.id())?;
    }

    let mut rec = Recorder::new(Scenario::Attestation, &world);
    let mut client_no = 0u64;
    for n in (p.props_min..=p.props_max).step_by(p.props_step.max(1)) {
        for rep in 0..p.reps.max(2) as u64 {
            client_no += 1;
            let mut props: Vec<String> = (0..n).map(|i| format!("img-{client_no}-{i}")).collect();
            if rep % 2 == 1 {
                let at = rng.random_range(0..n);
                props[at] = acl[rng.random_range(0..acl.len())].clone();
            }
            props.shuffle(&mut rng);
            let expected = props.iter().any(|q| acl_set.contains(q.as_str()));
            let image = format!("image-{client_no}");
            let client = Principal::from_seed(p.seed.wrapping_mul(31).wrapping_add(client_no));
            attest.endorse_image(&endorser, &image, &props)?;
            let bearer = attest.attest(&mut provider, &client.id(), &image, &endorser.id())?;
            for (pat, g) in guards.iter_mut() {
                let d = rec.guard(pat.name(), index, n as u64, rep, || g.check_access(*pat, &client.id(), &obj, Some(&bearer)).map(|d| d.result))?;
                ensure!(d.allowed == expected, "{pat:?} decided {} for n={n} rep={rep}, oracle says {expected}", d.allowed);
            }
        }
    }
    Ok(rec.rows)
}
