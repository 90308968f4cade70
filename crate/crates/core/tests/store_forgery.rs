mod forge;

use forge::{forge, genuine, Forgery};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_core::cert::{encode, Ed25519Key};
use safe_core::store::{CertStore, SafeSets};

#[test]
fn every_forgery_is_rejected_with_its_own_code() {
    let store = SafeSets::in_memory();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5afe);
    let mut seen = std::collections::BTreeMap::new();
    for i in 0..1000 {
        let kind = Forgery::ALL[i % 4];
        let (token, bytes) = forge(kind, &mut rng);
        let err = store.put(&token, &bytes).expect_err("forgery accepted");
        assert_eq!(err.code(), kind.expected_code(), "{kind:?}: {err}");
        *seen.entry(kind.expected_code()).or_insert(0) += 1;
    }
    assert_eq!(seen.len(), 4);
    assert!(seen.values().all(|&n| n == 250));
    assert_eq!(store.len(), 0);
}

#[test]
fn genuine_certificates_are_accepted() {
    let store = SafeSets::in_memory();
    for i in 0..20u8 {
        let c = genuine(&Ed25519Key::from_seed([i; 32]), "subject", 3);
        store.put(&c.token(), &encode(&c)).unwrap();
    }
    assert_eq!(store.len(), 20);
}

#[test]
fn another_issuer_cannot_claim_a_token() {
    let store = SafeSets::in_memory();
    let alice = Ed25519Key::from_seed([1; 32]);
    let mallory = Ed25519Key::from_seed([2; 32]);
    let a = genuine(&alice, "subject", 1);
    store.put(&a.token(), &encode(&a)).unwrap();
    let m = genuine(&mallory, "subject", 1);
    let e = store.put(&a.token(), &encode(&m)).unwrap_err();
    assert_eq!(e.code(), "token_mismatch");
    assert_eq!(store.fetch(&a.token()).unwrap(), encode(&a));
}
