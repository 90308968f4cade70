//! Attestation demo client: endorsements, attestations, object ACLs and checks.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use safe_apps::attest::{AccessDecision, Attest, AttestGuard, Denial, Pattern};
use safe_apps::cli::{self, decision, pid, report, token};
use safe_apps::{GuardConfig, Principal};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(version, about = "Attestation-based access")]
struct Cli {
    /// Store URL, or `memory` for a throwaway in-process store.
    #[arg(long, global = true, default_value = "http://127.0.0.1:7070")]
    store: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Bearer,
    Synth,
    Multi,
}

impl From<PatternArg> for Pattern {
    fn from(p: PatternArg) -> Self {
        match p {
            PatternArg::Bearer => Pattern::Bearer,
            PatternArg::Synth => Pattern::Synthesized,
            PatternArg::Multi => Pattern::MultiContext,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Create an object whose ACL lists the given properties.
    Create {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "prop", required = true)]
        props: Vec<String>,
    },
    /// Endorse an image's properties.
    Endorse {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        image: String,
        #[arg(long = "prop", required = true)]
        props: Vec<String>,
    },
    /// Attest that a client runs an image; prints the client's bearer token.
    Delegate {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        client: String,
        #[arg(long)]
        image: String,
        #[arg(long)]
        endorser: String,
    },
    /// Post the guard policy.
    Policy {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        provider: String,
        #[arg(long)]
        endorser: String,
    },
    /// Check access as the guard.
    Query {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        provider: String,
        #[arg(long)]
        client: String,
        #[arg(long)]
        object: String,
        #[arg(long, value_enum, default_value = "bearer")]
        pattern: PatternArg,
        #[arg(long)]
        bearer: Option<String>,
    },
    /// One allowed and one denied check against an in-process store.
    Demo,
}

fn describe(d: &AccessDecision) -> Value {
    let mut v = decision(&d.result);
    v["denial"] = match d.denial {
        None => Value::Null,
        Some(Denial::NotAttested) => json!("not_attested"),
        Some(Denial::NoMatchingProperty) => json!("no_matching_property"),
    };
    v
}

fn main() -> Result<()> {
    let args = Cli::parse();
    let store = cli::store(&args.store);
    let attest = Attest::new(store.clone(), cli::clock());
    match args.cmd {
        Cmd::Create { key, props } => println!("{}", attest.new_object(&mut cli::principal(&key)?, &props)?),
        Cmd::Endorse { key, image, props } => println!("{}", attest.endorse_image(&cli::principal(&key)?, &image, &props)?),
        Cmd::Delegate { key, client, image, endorser } => {
            println!("{}", attest.attest(&mut cli::principal(&key)?, &pid(&client)?, &image, &pid(&endorser)?)?)
        }
        Cmd::Policy { key, provider, endorser } => {
            let mut g = AttestGuard::new(cli::principal(&key)?, pid(&provider)?, store, cli::clock(), GuardConfig::default());
            println!("{}", g.post_policy(&pid(&endorser)?)?);
        }
        Cmd::Query { key, provider, client, object, pattern, bearer } => {
            let mut g = AttestGuard::new(cli::principal(&key)?, pid(&provider)?, store, cli::clock(), GuardConfig::default());
            let bearer = bearer.as_deref().map(token).transpose()?;
            let d = g.check_access(pattern.into(), &pid(&client)?, &object, bearer.as_ref())?;
            report(describe(&d))?;
        }
        Cmd::Demo => {
            let (mut provider, endorser, mut owner) = (Principal::generate(), Principal::generate(), Principal::generate());
            let mut g = AttestGuard::new(Principal::generate(), provider.id(), store, cli::clock(), GuardConfig::default());
            g.post_policy(&endorser.id())?;
            attest.endorse_image(&endorser, "web-v2", &["patched", "fips", "audited"])?;
            let client = Principal::generate();
            let bearer = attest.attest(&mut provider, &client.id(), "web-v2", &endorser.id())?;
            let open = attest.new_object(&mut owner, &["audited", "internal"])?;
            let closed = attest.new_object(&mut owner, &["hsm"])?;
            let mut out = json!({ "client": client.id().to_string() });
            for p in Pattern::ALL {
                out[p.name()] = json!({
                    "open": describe(&g.check_access(p, &client.id(), &open, Some(&bearer))?),
                    "closed": describe(&g.check_access(p, &client.id(), &closed, Some(&bearer))?),
                });
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}
