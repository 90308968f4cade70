//! Routing demo client: prefix allocations, advertisements and validation.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_apps::cli::{self, decision, pid, report, token};
use safe_apps::fixture::{AllocTree, Topology};
use safe_apps::routing::{Network, Routing, RoutingGuard};
use safe_apps::{GuardConfig, Principal};
use safe_core::logic::Ipv4Prefix;
use serde_json::json;

#[derive(Parser)]
#[command(version, about = "Prefix delegation and route validation")]
struct Cli {
    /// Store URL, or `memory` for a throwaway in-process store.
    #[arg(long, global = true, default_value = "http://127.0.0.1:7070")]
    store: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Allocate a prefix; without `--up` the key is the trust anchor.
    Create {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        holder: String,
        #[arg(long)]
        prefix: Ipv4Prefix,
        /// The delegator's own allocation set.
        #[arg(long)]
        up: Option<String>,
    },
    /// Advertise a route to a neighbor.
    Delegate {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        to: String,
        #[arg(long)]
        prefix: Ipv4Prefix,
        /// The AS the route came from; omit when originating.
        #[arg(long)]
        prev: Option<String>,
        /// The advertisement received, or the own allocation when originating.
        #[arg(long)]
        support: String,
    },
    /// Post the guard policy trusting `anchor`.
    Policy {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        anchor: String,
    },
    /// Validate a received advertisement as the guard.
    Query {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        receiver: String,
        #[arg(long)]
        prefix: Ipv4Prefix,
        #[arg(long)]
        advertiser: String,
        #[arg(long)]
        adv: String,
    },
    /// Build a topology, announce one prefix and validate every route.
    Demo {
        /// A `safe-topology 1` file; a generated one is used otherwise.
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        depth: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    let args = Cli::parse();
    let store = cli::store(&args.store);
    let routing = Routing::new(store.clone(), cli::clock());
    match args.cmd {
        Cmd::Create { key, holder, prefix, up } => {
            let mut p = cli::principal(&key)?;
            let t = match up {
                Some(u) => routing.allocate(&mut p, &pid(&holder)?, &prefix, &token(&u)?)?,
                None => routing.allocate_root(&mut p, &pid(&holder)?, &prefix)?,
            };
            println!("{t}");
        }
        Cmd::Delegate { key, to, prefix, prev, support } => {
            let mut p = cli::principal(&key)?;
            let prev = match prev {
                Some(s) => pid(&s)?,
                None => p.id(),
            };
            println!("{}", routing.advertise(&mut p, &pid(&to)?, &prefix, &prev, &token(&support)?)?);
        }
        Cmd::Policy { key, anchor } => {
            let mut g = RoutingGuard::new(cli::principal(&key)?, store, cli::clock(), GuardConfig::default());
            println!("{}", g.post_policy(&pid(&anchor)?)?);
        }
        Cmd::Query { key, receiver, prefix, advertiser, adv } => {
            let mut g = RoutingGuard::new(cli::principal(&key)?, store, cli::clock(), GuardConfig::default());
            let r = g.validate_route(&pid(&receiver)?, &prefix, &pid(&advertiser)?, &token(&adv)?)?;
            report(decision(&r))?;
        }
        Cmd::Demo { topology, depth, seed } => {
            let topo = match topology {
                Some(path) => Topology::parse(&std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?,
                None => {
                    let alloc = AllocTree { base: "10.0.0.0/8".parse()?, branching: 8, depth };
                    Topology::generate(alloc, 0.5, &mut ChaCha8Rng::seed_from_u64(seed))
                }
            };
            let mut net = Network::build(topo, seed, store.clone(), cli::clock())?;
            let mut g = RoutingGuard::new(Principal::generate(), store, cli::clock(), GuardConfig::default());
            g.post_policy(&net.anchor.id())?;
            let advs = net.announce(0)?;
            let (mut valid, mut hops) = (0, 0);
            for a in &advs {
                let r = g.validate_route(&net.ases[a.receiver].id(), &a.prefix, &net.ases[a.advertiser].id(), &a.token)?;
                valid += r.allowed as usize;
                hops += a.hops;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "ases": net.ases.len(),
                    "prefix": net.prefix_of(0).to_string(),
                    "advertisements": advs.len(),
                    "valid": valid,
                    "mean_hops": hops as f64 / advs.len().max(1) as f64,
                }))?
            );
        }
    }
    Ok(())
}
