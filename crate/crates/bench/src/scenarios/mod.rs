use anyhow::Result;
use safe_apps::GuardConfig;
use safe_core::cache::{CacheConfig, ContextCache};
use safe_core::cert::Token;
use safe_core::logic::{parse_query, prove, IndexMode, IndexedContext, Limits, SolveOptions, Statement};
use safe_core::slang::{GuardDiagnostics, GuardResult};
use safe_core::time::Clock;

use crate::{Params, Row, Scenario};

mod attest;
mod linking;
mod naming;
mod pruning;
mod routing;
mod update;

/// Runs one scenario and returns its rows.
pub fn run(scenario: Scenario, params: &Params) -> Result<Vec<Row>> {
    match scenario {
        Scenario::PruningGroups => pruning::groups(params),
        Scenario::PruningNames => pruning::names(params),
        Scenario::DualIndex => pruning::dual_index(params),
        Scenario::NamingCache => naming::cache(params),
        Scenario::Routing => routing::run(params),
        Scenario::Attestation => attest::run(params),
        Scenario::LinkingGranularity => linking::run(params),
        Scenario::UpdateMix => update::run(params),
    }
}

/// Guard settings for the bench. Delegation chains in the sweeps run deeper
/// than the default closure depth, so the depth limit is raised.
pub(crate) fn guard_config(index: IndexMode, mut cache: CacheConfig) -> GuardConfig {
    cache.closure.max_depth = cache.closure.max_depth.max(256);
    GuardConfig { cache, solve: SolveOptions { index, ..Default::default() }, no_retry: false }
}

/// Generous limits for searches over deliberately noisy contexts.
pub(crate) fn wide_limits() -> Limits {
    Limits { max_steps: 4_000_000_000, ..Limits::default() }
}

/// Evaluates `query` over the closure of `roots` with `noise` placed ahead
/// of the real statements, bypassing pruning. The result has the shape of a
/// guard result so it can be recorded the same way.
pub(crate) fn noisy_check(
    cache: &ContextCache,
    clock: &dyn Clock,
    roots: &[Token],
    noise: &[Statement],
    query: &str,
    index: IndexMode,
) -> Result<GuardResult> {
    let now = clock.now();
    let ctx = cache.assemble(roots, now)?;
    let mut stmts = noise.to_vec();
    stmts.extend(ctx.context.statements().iter().cloned());
    let total = stmts.len();
    let indexed = IndexedContext::build(stmts, now)?;
    let q = parse_query(query)?;
    let proof = prove(&indexed, &q, &SolveOptions { limits: wide_limits(), index })?;
    Ok(GuardResult {
        allowed: proof.holds,
        bindings: proof.bindings.into_iter().collect(),
        diagnostics: GuardDiagnostics {
            context: ctx.members.clone(),
            statements: total,
            steps: proof.stats.steps,
            refreshes: 0,
            failed_block: (!proof.holds).then_some(0),
        },
    })
}
