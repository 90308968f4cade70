//! `safe-bench <scenario> --seed N --out file.csv [flags]`

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use safe_bench::stats::summarize;
use safe_bench::{parse_index, run, write_csv, Params, Scenario};
use safe_core::logic::IndexMode;

#[derive(Parser)]
#[command(version, about = "Run a benchmark scenario and write one CSV row per request")]
struct Cli {
    /// pruning-groups, pruning-names, naming-cache, dual-index, routing,
    /// attestation, linking-granularity or update-mix.
    scenario: Scenario,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Force `primary` or `secondary` indexing throughout.
    #[arg(long, value_parser = parse_index)]
    index: Option<IndexMode>,
    /// Use the reduced test-sized workload as the starting point.
    #[arg(long)]
    small: bool,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long)]
    noisy_max: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    branching: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    origins: Option<usize>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    acl: Option<usize>,
    #[arg(long)]
    props_min: Option<usize>,
    #[arg(long)]
    props_max: Option<usize>,
    #[arg(long)]
    props_step: Option<usize>,
    #[arg(long)]
    principals: Option<usize>,
    #[arg(long)]
    objects: Option<usize>,
    #[arg(long)]
    delegations: Option<usize>,
    #[arg(long)]
    requests: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    update_ratio: Option<f64>,
    #[arg(long)]
    failures: Option<usize>,
    #[arg(long)]
    window_ms: Option<u64>,
    #[arg(long)]
    throttle_ms: Option<u64>,
}

macro_rules! apply {
    ($cli:ident, $p:ident, $($f:ident),*) => { $( if let Some(v) = $cli.$f { $p.$f = v; } )* };
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut p = if cli.small { Params::small(cli.seed) } else { Params { seed: cli.seed, ..Params::default() } };
    p.index = cli.index;
    apply!(
        cli, p, reps, max_n, noisy_max, height, branching, depth, origins, queries, acl, props_min, props_max, props_step, principals,
        objects, delegations, requests, rounds, update_ratio, failures, window_ms, throttle_ms
    );
    let rows = run(cli.scenario, &p)?;
    let file = File::create(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    write_csv(&rows, BufWriter::new(file))?;
    eprintln!("{}: {} rows -> {}", cli.scenario, rows.len(), cli.out.display());
    eprintln!("{:<16} {:<9} {:>6} {:>7} {:>9} {:>9} {:>8} {:>8} {:>11} {:>8}", "variant", "index", "reqs", "allowed", "p50_us", "p95_us", "p50_st", "p95_st", "mean_steps", "fetches");
    for s in summarize(&rows) {
        eprintln!(
            "{:<16} {:<9} {:>6} {:>7} {:>9} {:>9} {:>8} {:>8} {:>11.1} {:>8}",
            s.variant, s.index, s.requests, s.allowed, s.p50_latency_us, s.p95_latency_us, s.p50_statements, s.p95_statements, s.mean_steps, s.fetches
        );
    }
    Ok(())
}
