mod common;

use common::{config, World};
use safe_apps::attest::{Attest, AttestGuard, Denial, Pattern};
use safe_apps::Principal;

struct Setup {
    attest: Attest,
    guard: AttestGuard,
    provider: Principal,
    endorser: Principal,
    owner: Principal,
}

fn setup(w: &World) -> Setup {
    let provider = Principal::from_seed(1);
    let endorser = Principal::from_seed(2);
    let mut guard = AttestGuard::new(Principal::from_seed(3), provider.id(), w.store.clone(), w.clock(), config());
    guard.post_policy(&endorser.id()).unwrap();
    Setup { attest: Attest::new(w.store.clone(), w.clock()), guard, provider, endorser, owner: Principal::from_seed(4) }
}

fn props(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[test]
fn one_overlap_allows_under_every_pattern() {
    let w = World::new();
    let mut s = setup(&w);
    let client = Principal::from_seed(10);
    let mut image = props("img-", 4);
    image.push("shared".into());
    let mut acl = props("acl-", 6);
    acl.push("shared".into());
    s.attest.endorse_image(&s.endorser, "vm1", &image).unwrap();
    let bearer = s.attest.attest(&mut s.provider, &client.id(), "vm1", &s.endorser.id()).unwrap();
    let obj = s.attest.new_object(&mut s.owner, &acl).unwrap();
    for p in Pattern::ALL {
        let d = s.guard.check_access(p, &client.id(), &obj, Some(&bearer)).unwrap();
        assert!(d.allowed(), "{p:?}");
        assert_eq!(d.denial, None);
    }
}

#[test]
fn disjoint_properties_deny() {
    let w = World::new();
    let mut s = setup(&w);
    let client = Principal::from_seed(10);
    s.attest.endorse_image(&s.endorser, "vm1", &props("img-", 5)).unwrap();
    let bearer = s.attest.attest(&mut s.provider, &client.id(), "vm1", &s.endorser.id()).unwrap();
    let obj = s.attest.new_object(&mut s.owner, &props("acl-", 7)).unwrap();
    for p in Pattern::ALL {
        let d = s.guard.check_access(p, &client.id(), &obj, Some(&bearer)).unwrap();
        assert!(!d.allowed());
        assert_eq!(d.denial, Some(Denial::NoMatchingProperty), "{p:?}");
    }
}

#[test]
fn missing_attestation_has_its_own_diagnostic() {
    let w = World::new();
    let mut s = setup(&w);
    let client = Principal::from_seed(10);
    let other = Principal::from_seed(11);
    s.attest.endorse_image(&s.endorser, "vm1", &["p"]).unwrap();
    // Only `other` is attested; `client` presents other's token.
    let bearer = s.attest.attest(&mut s.provider, &other.id(), "vm1", &s.endorser.id()).unwrap();
    let obj = s.attest.new_object(&mut s.owner, &["p"]).unwrap();
    for p in Pattern::ALL {
        let d = s.guard.check_access(p, &client.id(), &obj, Some(&bearer)).unwrap();
        assert!(!d.allowed());
        assert_eq!(d.denial, Some(Denial::NotAttested), "{p:?}");
    }
}

#[test]
fn untrusted_endorser_does_not_count() {
    let w = World::new();
    let mut s = setup(&w);
    let client = Principal::from_seed(10);
    let rogue = Principal::from_seed(12);
    s.attest.endorse_image(&rogue, "vm1", &["p"]).unwrap();
    let bearer = s.attest.attest(&mut s.provider, &client.id(), "vm1", &rogue.id()).unwrap();
    let obj = s.attest.new_object(&mut s.owner, &["p"]).unwrap();
    let d = s.guard.check_access(Pattern::Bearer, &client.id(), &obj, Some(&bearer)).unwrap();
    assert_eq!(d.denial, Some(Denial::NoMatchingProperty));
}
