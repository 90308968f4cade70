//! Guard daemon: serves script entry points over REST.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::Parser;
use safe_core::cache::CacheConfig;
use safe_core::cert::Ed25519Key;
use safe_core::logic::SolveOptions;
use safe_core::time::SystemClock;
use safe_net::{guard_router, init_logging, GuardOptions, GuardState, RemoteStore};
use tracing::{info, warn};

#[derive(Parser)]
#[command(version, about = "SAFE guard daemon")]
struct Cli {
    #[arg(long, default_value = "127.0.0.1:7080")]
    listen: SocketAddr,
    /// Private key file (`safe keygen`).
    #[arg(long)]
    key: PathBuf,
    /// Script files; may be repeated.
    #[arg(long = "script", required = true)]
    scripts: Vec<PathBuf>,
    /// Store server URL.
    #[arg(long, default_value = "http://127.0.0.1:7070")]
    store: String,
    #[arg(long, default_value_t = 65_536)]
    set_cache: usize,
    #[arg(long, default_value_t = 4_096)]
    context_cache: usize,
    /// Upper bound of the refresh throttle, in milliseconds.
    #[arg(long, default_value_t = 1_000)]
    throttle_ms: u64,
    #[arg(long, default_value_t = 50_000_000)]
    max_steps: u64,
    #[arg(long, default_value_t = 5_000)]
    timeout_ms: u64,
    /// Require this value in the x-safe-secret header.
    #[arg(long, env = "SAFE_GUARD_SECRET")]
    secret: Option<String>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    init_logging();
    let cli = Cli::parse();
    let key_text = std::fs::read_to_string(&cli.key).with_context(|| format!("reading {}", cli.key.display()))?;
    let key = Ed25519Key::from_armor(&key_text).map_err(|e| anyhow!("{}: {e}", cli.key.display()))?;
    let mut solve = SolveOptions::default();
    solve.limits.max_steps = cli.max_steps;
    let options = GuardOptions {
        cache: CacheConfig {
            set_capacity: cli.set_cache,
            context_capacity: cli.context_cache,
            throttle_delay: Duration::from_millis(cli.throttle_ms),
            ..Default::default()
        },
        solve,
        request_timeout: Duration::from_millis(cli.timeout_ms),
        secret: cli.secret,
    };
    let store = Arc::new(RemoteStore::new(&cli.store));
    let state = GuardState::new(Arc::new(key), cli.scripts, store, Arc::new(SystemClock), options).map_err(|e| anyhow!(e))?;
    let state = Arc::new(state);
    info!(entries = ?state.module().entries(), "scripts loaded");

    #[cfg(unix)]
    {
        let s = state.clone();
        let mut hup = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::hangup())?;
        tokio::spawn(async move {
            while hup.recv().await.is_some() {
                let s = s.clone();
                match tokio::task::spawn_blocking(move || s.reload()).await {
                    Ok(Ok(n)) => info!(entries = n, "scripts reloaded on SIGHUP"),
                    Ok(Err(e)) => warn!(error = %e, "reload failed; keeping current scripts"),
                    Err(e) => warn!(error = %e, "reload task failed"),
                }
            }
        });
    }

    let listener = tokio::net::TcpListener::bind(cli.listen).await.with_context(|| format!("binding {}", cli.listen))?;
    info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, guard_router(state)).await?;
    Ok(())
}
