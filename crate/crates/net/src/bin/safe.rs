//! Command-line client: keys, scripts and raw store access.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use safe_core::cache::{CacheConfig, ContextCache};
use safe_core::cert::{from_armor, to_armor, verify_encoded, Ed25519Key, KeyHandle, Token};
use safe_core::slang::{load_script, Env, Interpreter};
use safe_core::store::{CertStore, DeleteRequest};
use safe_core::time::{Clock, SystemClock};
use safe_net::RemoteStore;
use serde_json::json;

#[derive(Parser)]
#[command(version, about = "SAFE command-line client")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a key and write it to a file.
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the principal ID of a key.
    Id {
        #[arg(long)]
        key: PathBuf,
    },
    /// Run a defcon or defguard entry from a script.
    Run {
        script: PathBuf,
        entry: String,
        args: Vec<String>,
        #[arg(long)]
        key: PathBuf,
        #[arg(long, default_value = "http://127.0.0.1:7070")]
        store: String,
        /// Environment values, `NAME=VALUE`; may be repeated.
        #[arg(long = "env", value_parser = parse_kv)]
        env: Vec<(String, String)>,
        /// Shorthand for `--env BearerRef=<token>`.
        #[arg(long)]
        bearer: Option<String>,
    },
    /// Fetch, verify and print a set.
    Fetch {
        token: String,
        #[arg(long, default_value = "http://127.0.0.1:7070")]
        store: String,
        /// Print the armored certificate instead of its statements.
        #[arg(long)]
        armor: bool,
    },
    /// Post an armored certificate file.
    Post {
        file: PathBuf,
        #[arg(long, default_value = "http://127.0.0.1:7070")]
        store: String,
    },
    /// Delete one of your sets.
    Delete {
        token: String,
        #[arg(long)]
        key: PathBuf,
        #[arg(long, default_value = "http://127.0.0.1:7070")]
        store: String,
    },
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())).ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))
}

fn read_key(path: &PathBuf) -> anyhow::Result<Ed25519Key> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ed25519Key::from_armor(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn token(s: &str) -> anyhow::Result<Token> {
    Token::from_str(s).map_err(|_| anyhow!("`{s}` is not a token"))
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Keygen { out } => {
            if out.exists() {
                bail!("{} already exists", out.display());
            }
            let k = Ed25519Key::generate();
            std::fs::write(&out, k.to_armor())?;
            println!("{}", k.principal_id());
        }
        Cmd::Id { key } => println!("{}", read_key(&key)?.principal_id()),
        Cmd::Run { script, entry, args, key, store, env, bearer } => {
            let text = std::fs::read_to_string(&script).with_context(|| format!("reading {}", script.display()))?;
            let module = load_script(&text).map_err(|e| anyhow!("{}: {e}", script.display()))?;
            let key: Arc<dyn KeyHandle> = Arc::new(read_key(&key)?);
            let cache = Arc::new(ContextCache::new(Arc::new(RemoteStore::new(&store)), CacheConfig::default()));
            let interp = Interpreter::new(cache, Arc::new(SystemClock));
            let mut e = Env::new(key);
            for (k, v) in env {
                e.set(&k, v);
            }
            if let Some(b) = bearer {
                e.set("BearerRef", b);
            }
            let out = if module.defguards.contains_key(&entry) {
                let r = interp.invoke_defguard(&module, &entry, &args, &mut e)?;
                let code = i32::from(!r.allowed);
                println!(
                    "{}",
                    json!({
                        "allowed": r.allowed,
                        "sets": r.diagnostics.context.len(),
                        "statements": r.diagnostics.statements,
                        "steps": r.diagnostics.steps,
                        "refreshes": r.diagnostics.refreshes,
                    })
                );
                code
            } else {
                let r = interp.invoke_defcon(&module, &entry, &args, &mut e)?;
                println!("{}", json!({ "token": r.token.to_string(), "posted": r.posted, "label": r.set.label }));
                0
            };
            std::process::exit(out);
        }
        Cmd::Fetch { token: t, store, armor } => {
            let t = token(&t)?;
            let bytes = RemoteStore::new(&store).fetch(&t)?;
            let (cert, v) = verify_encoded(&bytes, SystemClock.now())?;
            if v.token != t {
                bail!("store returned {} for {t}", v.token);
            }
            if armor {
                print!("{}", to_armor(&cert));
            } else {
                println!("% label {:?} issuer {} expiry {}", cert.set.label, cert.set.issuer, cert.set.expiry);
                for l in &cert.set.links {
                    println!("% link {l}");
                }
                for s in &cert.set.statements {
                    println!("{s}");
                }
            }
        }
        Cmd::Post { file, store } => {
            let text = std::fs::read_to_string(&file)?;
            let cert = from_armor(&text)?;
            let t = safe_core::store::post(&RemoteStore::new(&store), &cert)?;
            println!("{t}");
        }
        Cmd::Delete { token: t, key, store } => {
            let t = token(&t)?;
            let k = read_key(&key)?;
            RemoteStore::new(&store).delete(&t, &DeleteRequest::sign(&t, SystemClock.now(), &k))?;
        }
    }
    Ok(())
}
