//! Pathname resolution through the set and context caches.

use anyhow::{ensure, Result};
use safe_apps::fixture::NameTree;
use safe_apps::strong::{Linking, Namespace, Resolver, Strong};
use safe_apps::Principal;
use safe_core::cache::CacheConfig;
use safe_core::logic::{Answer, Const, Var};
use safe_core::slang::{GuardDiagnostics, GuardResult};

use super::guard_config;
use crate::{Params, Recorder, Row, Scenario, World};

/// Resolves and validates every leaf of a balanced tree twice. The second
/// pass should be served from the caches with no store fetches.
pub fn cache(p: &Params) -> Result<Vec<Row>> {
    let world = World::new();
    let strong = Strong::new(world.dyn_store(), world.dyn_clock(), Linking::Direct);
    let tree = NameTree::balanced(p.height, p.branching);
    let ns = Namespace::build(&strong, &tree, p.seed)?;
    let index = p.index_or_default();
    let mut resolver = Resolver::new(Principal::from_seed(9_001), world.dyn_store(), world.dyn_clock(), guard_config(index, CacheConfig::default()));
    let root = ns.root.id();
    let mut rec = Recorder::new(Scenario::NamingCache, &world);
    for pass in ["pass1", "pass2"] {
        for (i, (path, (obj, _))) in ns.leaves.iter().enumerate() {
            let mut target = None;
            rec.guard(pass, index, i as u64, 0, || -> Result<GuardResult> {
                let r = resolver.resolve(&root, path)?;
                let sets = r.hops.iter().map(|h| h.entry).collect();
                target = Some(r.target.clone());
                Ok(GuardResult {
                    allowed: r.validated,
                    bindings: vec![Answer::from([(Var::new("Target"), Const::str(&r.target))])],
                    diagnostics: GuardDiagnostics { context: sets, steps: r.steps, ..Default::default() },
                })
            })?;
            ensure!(target.as_deref() == Some(obj.as_str()), "{path} resolved to {target:?}");
        }
    }
    Ok(rec.rows)
}
