//! Certificate store server.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use safe_core::store::{CertStore, SafeSets, StoreConfig, DEFAULT_MAX_PAYLOAD};
use safe_core::time::SystemClock;
use safe_net::{init_logging, store_router};
use tracing::info;

#[derive(Parser)]
#[command(version, about = "SAFE certificate store")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve the store API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7070")]
        listen: SocketAddr,
        /// Directory for the append-only log. In-memory when omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Largest accepted certificate, in bytes.
        #[arg(long, default_value_t = DEFAULT_MAX_PAYLOAD)]
        max_payload: usize,
        /// Seconds between sweeps of expired sets (0 disables).
        #[arg(long, default_value_t = 60)]
        sweep_secs: u64,
    },
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    init_logging();
    let Cmd::Serve { listen, data_dir, max_payload, sweep_secs } = Cli::parse().cmd;
    let config = StoreConfig { max_payload, ..Default::default() };
    let store = Arc::new(match &data_dir {
        Some(d) => SafeSets::open(d, config, Arc::new(SystemClock)).with_context(|| format!("opening {}", d.display()))?,
        None => SafeSets::with_clock(config, Arc::new(SystemClock)),
    });
    info!(sets = store.len(), data_dir = ?data_dir, "store ready");
    if sweep_secs > 0 {
        let s = store.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(sweep_secs));
            loop {
                tick.tick().await;
                let s = s.clone();
                if let Ok(Ok(n)) = tokio::task::spawn_blocking(move || s.sweep_expired(safe_core::time::Clock::now(&SystemClock))).await {
                    if n > 0 {
                        info!(removed = n, "swept expired sets");
                    }
                }
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(listen).await.with_context(|| format!("binding {listen}"))?;
    info!(addr = %listener.local_addr()?, "listening");
    let store: Arc<dyn CertStore> = store;
    axum::serve(listener, store_router(store, max_payload)).await?;
    Ok(())
}
