//! Pruned versus noisy contexts, and the two name-walk predicates.

use anyhow::Result;
use safe_apps::fixture::NameTree;
use safe_apps::strong::{GroupChain, Linking, NameIndex, Namespace, Strong, StrongGuard};
use safe_apps::{token_for, Principal};
use safe_core::cache::CacheConfig;
use safe_core::cert::{PrincipalId, Scid};
use safe_core::logic::{quoted, Atom, IndexMode, Statement, Term};
use uuid::Uuid;

use super::{guard_config, noisy_check};
use crate::{Params, Recorder, Row, Scenario, World};

/// Chain lengths swept: 2, 4, ..., `max_n`, or 1..=`max_n` for short sweeps.
fn lengths(max_n: usize) -> Vec<usize> {
    if max_n >= 8 {
        (2..=max_n).step_by(2).collect()
    } else {
        (1..=max_n).collect()
    }
}

fn guard(world: &World, index: IndexMode) -> StrongGuard {
    let mut g = StrongGuard::new(Principal::from_seed(9_000), world.dyn_store(), world.dyn_clock(), guard_config(index, CacheConfig::default()));
    g.post_policy().expect("policy posts");
    g
}

/// A binary tree of group nestings of the given height under `root`, all
/// rooted at `owner` so the membership search must descend every branch.
fn group_noise(owner: &PrincipalId, root: &str, height: usize) -> Vec<Statement> {
    let speaker = Term::str(&owner.to_string());
    let mut out = Vec::new();
    let mut level = vec![root.to_string()];
    let mut next_id = 0u128;
    for _ in 0..height {
        let mut next = Vec::with_capacity(level.len() * 2);
        for parent in &level {
            for _ in 0..2 {
                next_id += 1;
                let child = Scid::from_parts(*owner, Uuid::from_u128(next_id)).to_string();
                out.push(Statement::fact(Atom::new(speaker.clone(), "nestGroup", vec![Term::str(parent), Term::str(&child), Term::str("false")])));
                next.push(child);
            }
        }
        level = next;
    }
    out
}

/// A binary tree of name delegations of the given height under `root`,
/// in both parameter orders.
fn name_noise(root: &PrincipalId, height: usize) -> Vec<Statement> {
    let mut out = Vec::new();
    let mut level = vec![root.to_string()];
    let mut next_id = 0u64;
    for _ in 0..height {
        let mut next = Vec::with_capacity(level.len() * 2);
        for parent in &level {
            for _ in 0..2 {
                next_id += 1;
                let child = token_for(root, &format!("noise/{next_id}")).to_string();
                let sp = Term::str(parent);
                out.push(Statement::fact(Atom::new(sp.clone(), "nameDelegate", vec![Term::str(parent), Term::str(&child)])));
                out.push(Statement::fact(Atom::new(sp, "nameParent", vec![Term::str(&child), Term::str(parent)])));
                next.push(child);
            }
        }
        level = next;
    }
    out
}

/// Membership through `n` nested groups: the pruned context holds the
/// bearer's closure only; the noisy one adds a distractor tree of height `n`.
pub fn groups(p: &Params) -> Result<Vec<Row>> {
    let world = World::new();
    let mut rec = Recorder::new(Scenario::PruningGroups, &world);
    let strong = Strong::new(world.dyn_store(), world.dyn_clock(), Linking::Direct);
    for n in lengths(p.max_n) {
        let chain = GroupChain::build(&strong, n, p.seed.wrapping_add(n as u64))?;
        let (who, g0) = (chain.member.id(), chain.groups[0].clone());
        let noise = (n <= p.noisy_max).then(|| group_noise(&chain.owners[0].id(), &g0, n));
        for index in p.index_modes() {
            let mut g = guard(&world, index);
            let policy = g.guard().principal().token("policy");
            let query = format!("{}: member({}, {}, ?_)", quoted(&g.guard().id().to_string()), quoted(&who.to_string()), quoted(&g0));
            for rep in 0..p.reps as u64 {
                let r = rec.guard("pruned", index, n as u64, rep, || g.query_membership(&who, &g0, &chain.bearer))?;
                anyhow::ensure!(r.allowed, "pruned membership failed at n={n}");
                if let Some(noise) = &noise {
                    let cache = g.guard().interpreter().cache().clone();
                    let clock = world.clock.clone();
                    rec.guard("noisy", index, n as u64, rep, || noisy_check(&cache, &*clock, &[chain.bearer, policy], noise, &query, index))?;
                }
            }
        }
    }
    Ok(rec.rows)
}

/// Is an object `n` levels down under the root? Pruned: the entry's
/// closure; noisy: plus a distractor naming tree of height `n`.
pub fn names(p: &Params) -> Result<Vec<Row>> {
    let world = World::new();
    let mut rec = Recorder::new(Scenario::PruningNames, &world);
    let strong = Strong::new(world.dyn_store(), world.dyn_clock(), Linking::Direct);
    for n in lengths(p.max_n) {
        let path: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        let tree = NameTree { leaves: vec![path.join("/")] };
        let ns = Namespace::build(&strong, &tree, p.seed.wrapping_add(n as u64))?;
        let (obj, entry) = ns.leaves.values().next().cloned().expect("one leaf");
        let root = ns.root.id();
        let noise = (n <= p.noisy_max).then(|| name_noise(&root, n));
        for index in p.index_modes() {
            let mut g = guard(&world, index);
            let policy = g.guard().principal().token("policy");
            let query = format!("{}: reaches({}, {})", quoted(&g.guard().id().to_string()), quoted(&root.to_string()), quoted(&obj));
            for rep in 0..p.reps as u64 {
                let r = rec.guard("pruned", index, n as u64, rep, || g.under_root(&obj, &root, &entry))?;
                anyhow::ensure!(r.allowed, "pruned name walk failed at n={n}");
                if let Some(noise) = &noise {
                    let cache = g.guard().interpreter().cache().clone();
                    let clock = world.clock.clone();
                    rec.guard("noisy", index, n as u64, rep, || noisy_check(&cache, &*clock, &[entry, policy], noise, &query, index))?;
                }
            }
        }
    }
    Ok(rec.rows)
}

/// Prefix-ACL checks for an object `n` levels below the directory holding
/// the ACL, walking with the parent-first predicate (`dual`) or the
/// child-first one (`single`).
pub fn dual_index(p: &Params) -> Result<Vec<Row>> {
    let world = World::new();
    let mut rec = Recorder::new(Scenario::DualIndex, &world);
    let strong = Strong::new(world.dyn_store(), world.dyn_clock(), Linking::Direct);
    let index = p.index_or_default();
    let mut g = StrongGuard::new(Principal::from_seed(9_000), world.dyn_store(), world.dyn_clock(), guard_config(index, CacheConfig::default()));
    g.post_policy()?;
    for n in 1..=p.max_n {
        // Each directory also holds a sibling file, so the walks see fan-out.
        let dirs: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
        let mut leaves = vec![format!("{}/obj", dirs.join("/"))];
        for k in 1..=n {
            leaves.push(format!("{}/side", dirs[..k].join("/")));
        }
        let ns = Namespace::build(&strong, &NameTree { leaves }, p.seed.wrapping_add(1_000 + n as u64))?;
        let chain = GroupChain::build(&strong, 0, p.seed.wrapping_add(2_000 + n as u64))?;
        strong.set_acl(&ns.dirs["d0"], &[(chain.groups[0].as_str(), "read")])?;
        let who = chain.member.id();
        let (obj, entry) = ns.leaves[&format!("{}/obj", dirs.join("/"))].clone();
        for rep in 0..p.reps as u64 {
            for (variant, mode) in [("dual", NameIndex::Dual), ("single", NameIndex::Single)] {
                rec.guard(variant, index, n as u64, rep, || g.check_prefix_access(&who, &obj, "read", &chain.bearer, &entry, mode))?;
            }
        }
    }
    Ok(rec.rows)
}
