mod common;

use common::{config, World};
use safe_apps::fixture::NameTree;
use safe_apps::strong::{GroupChain, Linking, NameIndex, Namespace, Resolver, Strong, StrongGuard};
use safe_apps::{AppError, Guard, Principal};
use safe_core::cert::verify_encoded;
use safe_core::time::Clock;

struct Setup {
    w: World,
    strong: Strong,
    guard: StrongGuard,
}

fn setup(linking: Linking) -> Setup {
    let w = World::new();
    let strong = Strong::new(w.store.clone(), w.clock(), linking);
    let mut guard = StrongGuard::new(Principal::from_seed(100), w.store.clone(), w.clock(), config());
    guard.post_policy().unwrap();
    Setup { w, strong, guard }
}

/// owner -> p1 -> ... -> pn, with `flags[i]` the delegatable flag on hop i.
fn chain(s: &Setup, flags: &[bool]) -> (Principal, String, Token) {
    let mut owner = Principal::from_seed(1);
    s.strong.enroll(&owner).unwrap();
    let obj = s.strong.new_object(&mut owner).unwrap();
    let mut prev = owner;
    let mut bearer = None;
    for (i, &flag) in flags.iter().enumerate() {
        let next = Principal::from_seed(10 + i as u64);
        s.strong.enroll(&next).unwrap();
        let t = s.strong.delegate_capability(&mut prev, &next.id(), &obj, "read", flag).unwrap();
        bearer = Some(s.strong.accept_capability(&next, &obj, t).unwrap());
        prev = next;
    }
    (prev, obj, bearer.expect("at least one hop"))
}

use safe_core::cert::Token;

#[test]
fn two_delegatable_hops_allow() {
    for linking in [Linking::Direct, Linking::Coarse] {
        let mut s = setup(linking);
        let (b, obj, bearer) = chain(&s, &[true, true]);
        assert!(s.guard.check_capability(&b.id(), &obj, "read", &bearer).unwrap().allowed, "{linking:?}");
        assert!(!s.guard.check_capability(&b.id(), &obj, "write", &bearer).unwrap().allowed);
    }
}

#[test]
fn non_delegatable_hop_blocks_the_next() {
    let mut s = setup(Linking::Direct);
    let (b, obj, bearer) = chain(&s, &[false, true]);
    assert!(!s.guard.check_capability(&b.id(), &obj, "read", &bearer).unwrap().allowed);
}

#[test]
fn owner_direct_grant_allows() {
    let mut s = setup(Linking::Direct);
    let (a, obj, bearer) = chain(&s, &[false]);
    assert!(s.guard.check_capability(&a.id(), &obj, "read", &bearer).unwrap().allowed);
}

#[test]
fn delegator_precheck_refuses_without_authority() {
    let s = setup(Linking::Direct);
    let (mut a, obj, _) = chain(&s, &[false]);
    let pre = Guard::new(Principal::from_seed(100), safe_apps::strong::SCRIPT, s.w.store.clone(), s.w.clock(), config());
    let strong = Strong::new(s.w.store.clone(), s.w.clock(), Linking::Direct).with_precheck(pre);
    let c = Principal::from_seed(50);
    match strong.delegate_capability(&mut a, &c.id(), &obj, "read", true) {
        Err(AppError::NotDelegatable { who, .. }) => assert_eq!(who, a.id()),
        other => panic!("expected NotDelegatable, got {other:?}"),
    }
}

/// G0 contains G1 contains ... contains Gn; `who` is granted Gn.
fn nested(s: &Setup, n: usize) -> (GroupChain, String, Token) {
    let c = GroupChain::build(&s.strong, n, 20).unwrap();
    let (g0, bearer) = (c.groups[0].clone(), c.bearer);
    (c, g0, bearer)
}

#[test]
fn membership_through_five_nestings() {
    let mut s = setup(Linking::Direct);
    let (c, g0, bearer) = nested(&s, 5);
    let p = c.member;
    let r = s.guard.query_membership(&p.id(), &g0, &bearer).unwrap();
    assert!(r.allowed);
    // Bearer, grant, policy, and per level an owner group set and subject
    // set, plus one nesting per link.
    assert_eq!(r.diagnostics.context.len(), 3 * 5 + 5);
}

#[test]
fn empty_group_denies() {
    let mut s = setup(Linking::Direct);
    let mut owner = Principal::from_seed(1);
    s.strong.enroll(&owner).unwrap();
    let g = s.strong.new_group(&mut owner).unwrap();
    let p = Principal::from_seed(2);
    s.strong.enroll(&p).unwrap();
    assert!(!s.guard.query_membership(&p.id(), &g, &p.token("subject")).unwrap().allowed);
}

#[test]
fn membership_context_excludes_sibling_subgroups() {
    let mut s = setup(Linking::Direct);
    let (c, g0, bearer) = nested(&s, 2);
    let (p, mut owner0) = (c.member, c.owners.into_iter().next().unwrap());
    // Siblings of G1 under G0, each with a member.
    let mut sibling_sets = Vec::new();
    for i in 0..3 {
        let mut so = Principal::from_seed(400 + i);
        s.strong.enroll(&so).unwrap();
        let sg = s.strong.new_group(&mut so).unwrap();
        let t = s.strong.nest_group(&mut owner0, &g0, &sg, false).unwrap();
        sibling_sets.push(t);
        sibling_sets.push(s.strong.accept_group(&so, &sg, t).unwrap());
        let q = Principal::from_seed(500 + i);
        let t = s.strong.grant_membership(&mut so, &sg, &q.id(), false).unwrap();
        sibling_sets.push(t);
    }
    let r = s.guard.query_membership(&p.id(), &g0, &bearer).unwrap();
    assert!(r.allowed);
    let ctx = s.guard.guard().interpreter().cache().assemble(&r.diagnostics.context, s.w.clock.now()).unwrap();
    for t in &sibling_sets {
        assert!(!ctx.members.contains(t), "sibling set {t} leaked into the context");
    }
}

#[test]
fn linking_modes_agree_and_direct_is_no_larger() {
    let mut sizes = Vec::new();
    for linking in [Linking::Direct, Linking::Coarse] {
        let mut s = setup(linking);
        let mut owner = Principal::from_seed(1);
        s.strong.enroll(&owner).unwrap();
        let objs: Vec<String> = (0..4).map(|_| s.strong.new_object(&mut owner).unwrap()).collect();
        let mut a = Principal::from_seed(2);
        let b = Principal::from_seed(3);
        s.strong.enroll(&a).unwrap();
        s.strong.enroll(&b).unwrap();
        for o in &objs {
            let t = s.strong.delegate_capability(&mut owner, &a.id(), o, "read", true).unwrap();
            s.strong.accept_capability(&a, o, t).unwrap();
        }
        let t = s.strong.delegate_capability(&mut a, &b.id(), &objs[0], "read", false).unwrap();
        s.strong.accept_capability(&b, &objs[0], t).unwrap();
        let mut row = Vec::new();
        for o in &objs {
            let r = s.guard.check_capability(&b.id(), o, "read", &s.strong.bearer(&b.id(), o)).unwrap();
            row.push((r.allowed, r.diagnostics.statements));
        }
        sizes.push(row);
    }
    for (d, c) in sizes[0].iter().zip(&sizes[1]) {
        assert_eq!(d.0, c.0);
        assert!(d.1 <= c.1, "direct {} > coarse {}", d.1, c.1);
    }
    assert!(sizes[0][0].0);
    assert!(sizes[0][0].1 < sizes[1][0].1);
}

#[test]
fn name_entries_carry_both_orders() {
    let s = setup(Linking::Direct);
    let ns = Namespace::build(&s.strong, &NameTree::balanced(2, 2), 7).unwrap();
    for (path, (obj, entry)) in &ns.leaves {
        let bytes = s.w.store.fetch(entry).unwrap();
        let (cert, _) = verify_encoded(&bytes, s.w.clock.now()).unwrap();
        let text: Vec<String> = cert.set.statements.iter().map(|st| st.to_string()).collect();
        let dir = ns.domain(path.rsplit_once('/').map_or("", |p| p.0)).id().to_string();
        let down = format!("\"{dir}\": nameDelegate(\"{dir}\", \"{obj}\").");
        let up = format!("\"{dir}\": nameParent(\"{obj}\", \"{dir}\").");
        assert!(text.contains(&down), "{text:?}");
        assert!(text.contains(&up), "{text:?}");
    }
}

#[test]
fn resolve_validates_and_reports_missing_hops() {
    let s = setup(Linking::Direct);
    let ns = Namespace::build(&s.strong, &NameTree::balanced(3, 2), 7).unwrap();
    let mut r = Resolver::new(Principal::from_seed(100), s.w.store.clone(), s.w.clock(), config());
    let root = ns.root.id();
    for (path, (obj, _)) in &ns.leaves {
        let res = r.resolve(&root, path).unwrap();
        assert_eq!(&res.target, obj);
        assert!(res.validated);
        assert_eq!(res.hops.len(), 3);
    }
    match r.resolve(&root, "n0/nope/n1") {
        Err(AppError::MissingName { hop, component }) => assert_eq!((hop, component.as_str()), (1, "nope")),
        other => panic!("expected MissingName, got {other:?}"),
    }
    assert!(matches!(r.resolve(&root, "n0//n1"), Err(AppError::BadPath(_))));
}

#[test]
fn prefix_acl_grants_deep_objects() {
    let mut s = setup(Linking::Direct);
    let tree = NameTree { leaves: vec!["a/b/c/d/e/f/obj".into(), "a/x".into()] };
    let ns = Namespace::build(&s.strong, &tree, 9).unwrap();
    let (c, g0, bearer) = nested(&s, 0);
    let p = c.member;
    let (obj, entry) = ns.leaves["a/b/c/d/e/f/obj"].clone();

    for index in [NameIndex::Dual, NameIndex::Single] {
        assert!(!s.guard.check_prefix_access(&p.id(), &obj, "read", &bearer, &entry, index).unwrap().allowed);
    }
    s.strong.set_acl(&ns.dirs["a"], &[(g0.as_str(), "read")]).unwrap();
    s.guard.guard().interpreter().cache().invalidate_all();
    let dual = s.guard.check_prefix_access(&p.id(), &obj, "read", &bearer, &entry, NameIndex::Dual).unwrap();
    let single = s.guard.check_prefix_access(&p.id(), &obj, "read", &bearer, &entry, NameIndex::Single).unwrap();
    assert!(dual.allowed && single.allowed);
    assert!(dual.diagnostics.steps <= single.diagnostics.steps, "{} vs {}", dual.diagnostics.steps, single.diagnostics.steps);
    assert!(!s.guard.check_prefix_access(&p.id(), &obj, "write", &bearer, &entry, NameIndex::Dual).unwrap().allowed);
    let (other, other_entry) = ns.leaves["a/x"].clone();
    assert!(s.guard.check_prefix_access(&p.id(), &other, "read", &bearer, &other_entry, NameIndex::Dual).unwrap().allowed);
}

#[test]
fn under_root_walks_down() {
    let mut s = setup(Linking::Direct);
    let ns = Namespace::build(&s.strong, &NameTree::balanced(3, 2), 7).unwrap();
    let (obj, entry) = ns.leaves["n1/n0/n1"].clone();
    assert!(s.guard.under_root(&obj, &ns.root.id(), &entry).unwrap().allowed);
    assert!(s.guard.under_root(&obj, &ns.dirs["n1"].id(), &entry).unwrap().allowed);
    assert!(!s.guard.under_root(&obj, &ns.dirs["n0"].id(), &entry).unwrap().allowed);
}
