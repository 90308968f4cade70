use safe_core::cert::{build_and_sign, make_token, Ed25519Key, KeyHandle, Token, Validity};
use safe_core::logic::parse_program;
use safe_core::store::{fetch_closure, post, ClosureLimits, CountingStore, SafeSets, StoreSource};
use safe_core::time::Timestamp;

struct Graph {
    store: CountingStore<SafeSets>,
    key: Ed25519Key,
}

impl Graph {
    fn new() -> Self {
        Graph { store: CountingStore::new(SafeSets::in_memory()), key: Ed25519Key::from_seed([9; 32]) }
    }

    fn tok(&self, label: &str) -> Token {
        make_token(&self.key.principal_id(), label).unwrap()
    }

    fn node(&self, label: &str, links: &[&str]) -> Token {
        let links = links.iter().map(|l| self.tok(l)).collect();
        let v = Validity { issued: Timestamp(0), expiry: Timestamp(1 << 50) };
        let c = build_and_sign(label, parse_program("n(x).").unwrap(), links, v, &self.key).unwrap();
        post(&self.store, &c).unwrap()
    }

    fn closure(&self, root: &str, limits: ClosureLimits) -> safe_core::store::ClosureResult {
        self.store.reset();
        let r = fetch_closure(&StoreSource(&self.store), &self.tok(root), &limits, Timestamp(1)).unwrap();
        let distinct: std::collections::HashSet<Token> =
            r.sets.iter().map(|s| s.token).chain(r.skipped.iter().map(|(t, _)| *t)).collect();
        assert_eq!(self.store.fetches() as usize, distinct.len(), "a token was fetched twice");
        assert_eq!(r.attempts, distinct.len());
        r
    }
}

#[test]
fn self_link() {
    let g = Graph::new();
    g.node("a", &["a", "a"]);
    let r = g.closure("a", ClosureLimits::default());
    assert_eq!(r.sets.len(), 1);
    assert!(!r.truncated);
}

#[test]
fn two_cycle() {
    let g = Graph::new();
    g.node("a", &["b"]);
    g.node("b", &["a"]);
    let r = g.closure("a", ClosureLimits::default());
    assert_eq!(r.sets.len(), 2);
    assert!(!r.truncated);
}

#[test]
fn hundred_node_cycle_with_chords() {
    let g = Graph::new();
    for i in 0..100 {
        let next = format!("c{}", (i + 1) % 100);
        let chord = format!("c{}", (i * 37) % 100);
        g.node(&format!("c{i}"), &[&next, &chord, "c0"]);
    }
    let r = g.closure("c0", ClosureLimits { max_depth: 200, ..Default::default() });
    assert_eq!(r.sets.len(), 100);
    assert!(!r.truncated);
}

#[test]
fn deep_chain_truncates_exactly_at_max_depth() {
    let g = Graph::new();
    for i in 0..40 {
        let next = format!("d{}", i + 1);
        let links: Vec<&str> = if i < 39 { vec![next.as_str()] } else { vec![] };
        g.node(&format!("d{i}"), &links);
    }
    // 40 sets sit at depths 0..=39.
    let exact = g.closure("d0", ClosureLimits { max_depth: 39, ..Default::default() });
    assert_eq!(exact.sets.len(), 40);
    assert!(!exact.truncated);
    let short = g.closure("d0", ClosureLimits { max_depth: 38, ..Default::default() });
    assert_eq!(short.sets.len(), 39);
    assert!(short.truncated);
    let default = g.closure("d0", ClosureLimits::default());
    assert_eq!(default.sets.len(), 33);
    assert!(default.truncated);
}

#[test]
fn set_budget_binds_exactly() {
    let g = Graph::new();
    let kids: Vec<String> = (0..10).map(|i| format!("k{i}")).collect();
    for k in &kids {
        g.node(k, &[]);
    }
    let refs: Vec<&str> = kids.iter().map(String::as_str).collect();
    g.node("root", &refs);
    assert!(!g.closure("root", ClosureLimits { max_sets: 11, ..Default::default() }).truncated);
    let r = g.closure("root", ClosureLimits { max_sets: 10, ..Default::default() });
    assert!(r.truncated);
    assert_eq!(r.sets.len(), 10);
}

#[test]
fn statement_budget_binds_exactly() {
    let g = Graph::new();
    g.node("b", &[]);
    g.node("a", &["b"]);
    assert!(!g.closure("a", ClosureLimits { max_statements: 2, ..Default::default() }).truncated);
    let r = g.closure("a", ClosureLimits { max_statements: 1, ..Default::default() });
    assert!(r.truncated);
    assert_eq!(r.sets.len(), 1);
}

#[test]
fn dangling_links_are_skipped_without_truncation() {
    let g = Graph::new();
    g.node("a", &["ghost1", "ghost2", "a"]);
    let r = g.closure("a", ClosureLimits::default());
    assert_eq!(r.sets.len(), 1);
    assert_eq!(r.skipped.len(), 2);
    assert!(!r.truncated);
}
