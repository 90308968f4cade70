//! STRONG demo client: objects, capabilities, groups and checks.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use safe_apps::cli::{self, decision, pid, report, token};
use safe_apps::strong::{Linking, Strong, StrongGuard};
use safe_apps::{GuardConfig, Principal};
use serde_json::json;

#[derive(Parser)]
#[command(version, about = "STRONG capabilities and groups")]
struct Cli {
    /// Store URL, or `memory` for a throwaway in-process store.
    #[arg(long, global = true, default_value = "http://127.0.0.1:7070")]
    store: String,
    /// Link received capabilities from the subject set.
    #[arg(long, global = true)]
    coarse: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create an object (or group) owned by the key's principal.
    Create {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        group: bool,
    },
    /// Delegate a capability.
    Delegate {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        to: String,
        #[arg(long)]
        object: String,
        #[arg(long, default_value = "read")]
        privilege: String,
        #[arg(long)]
        delegatable: bool,
    },
    /// Link a received capability or group credential; prints the bearer token.
    Accept {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        object: String,
        #[arg(long)]
        token: String,
        /// The token is a group grant or nesting.
        #[arg(long)]
        group: bool,
    },
    /// Grant group membership.
    Grant {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        group: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        delegatable: bool,
    },
    /// Nest `sub` inside `group`.
    Nest {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        group: String,
        #[arg(long)]
        sub: String,
    },
    /// Post the guard policy under the key's principal.
    Policy {
        #[arg(long)]
        key: PathBuf,
    },
    /// Check a capability or membership as the guard.
    Query {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        subject: String,
        /// Object scid, or group scid with `--member`.
        #[arg(long)]
        object: String,
        #[arg(long, default_value = "read")]
        privilege: String,
        #[arg(long)]
        bearer: String,
        #[arg(long)]
        member: bool,
    },
    /// Run owner -> alice -> bob against an in-process store.
    Demo,
}

fn main() -> Result<()> {
    let args = Cli::parse();
    let linking = if args.coarse { Linking::Coarse } else { Linking::Direct };
    let store = cli::store(&args.store);
    let strong = Strong::new(store.clone(), cli::clock(), linking);
    match args.cmd {
        Cmd::Create { key, group } => {
            let mut p = cli::principal(&key)?;
            strong.enroll(&p)?;
            let id = if group { strong.new_group(&mut p)? } else { strong.new_object(&mut p)? };
            println!("{id}");
        }
        Cmd::Delegate { key, to, object, privilege, delegatable } => {
            let mut p = cli::principal(&key)?;
            strong.enroll(&p)?;
            println!("{}", strong.delegate_capability(&mut p, &pid(&to)?, &object, &privilege, delegatable)?);
        }
        Cmd::Accept { key, object, token: t, group } => {
            let p = cli::principal(&key)?;
            strong.enroll(&p)?;
            let b = if group { strong.accept_group(&p, &object, token(&t)?)? } else { strong.accept_capability(&p, &object, token(&t)?)? };
            println!("{b}");
        }
        Cmd::Grant { key, group, to, delegatable } => {
            let mut p = cli::principal(&key)?;
            strong.enroll(&p)?;
            println!("{}", strong.grant_membership(&mut p, &group, &pid(&to)?, delegatable)?);
        }
        Cmd::Nest { key, group, sub } => {
            let mut p = cli::principal(&key)?;
            strong.enroll(&p)?;
            println!("{}", strong.nest_group(&mut p, &group, &sub, false)?);
        }
        Cmd::Policy { key } => {
            let mut g = StrongGuard::new(cli::principal(&key)?, store, cli::clock(), GuardConfig::default());
            println!("{}", g.post_policy()?);
        }
        Cmd::Query { key, subject, object, privilege, bearer, member } => {
            let mut g = StrongGuard::new(cli::principal(&key)?, store, cli::clock(), GuardConfig::default());
            let (s, b) = (pid(&subject)?, token(&bearer)?);
            let r = if member { g.query_membership(&s, &object, &b)? } else { g.check_capability(&s, &object, &privilege, &b)? };
            report(decision(&r))?;
        }
        Cmd::Demo => demo(&strong, store)?,
    }
    Ok(())
}

fn demo(strong: &Strong, store: std::sync::Arc<dyn safe_core::store::CertStore>) -> Result<()> {
    let mut guard = StrongGuard::new(Principal::generate(), store, cli::clock(), GuardConfig::default());
    guard.post_policy()?;
    let (mut owner, mut alice, bob) = (Principal::generate(), Principal::generate(), Principal::generate());
    for p in [&owner, &alice, &bob] {
        strong.enroll(p)?;
    }
    let obj = strong.new_object(&mut owner)?;
    let t = strong.delegate_capability(&mut owner, &alice.id(), &obj, "read", true)?;
    strong.accept_capability(&alice, &obj, t)?;
    let t = strong.delegate_capability(&mut alice, &bob.id(), &obj, "read", false)?;
    let bearer = strong.accept_capability(&bob, &obj, t)?;
    let read = guard.check_capability(&bob.id(), &obj, "read", &bearer)?;
    let write = guard.check_capability(&bob.id(), &obj, "write", &bearer)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "object": obj,
            "bob": bob.id().to_string(),
            "bearer": bearer.to_string(),
            "read": decision(&read),
            "write": decision(&write),
        }))?
    );
    Ok(())
}
