//! Network front ends for safe-core: the certificate store over HTTP, a
//! blocking client for it, and the guard daemon.
//!
//! Store API:
//!
//! | method | path | body | result |
//! |---|---|---|---|
//! | `PUT` | `/sets/{token}` | encoded certificate | `201`, or an error object |
//! | `GET` | `/sets/{token}` | | certificate bytes, or `404` |
//! | `DELETE` | `/sets/{token}` | header `x-safe-delete: <scheme> <key> <ts> <sig>` | `204` |
//! | `GET` | `/health` | | `{"status":"ok"}` |
//!
//! Errors are `{"error": "<code>", "message": "..."}` with the codes of
//! [`safe_core::store::StoreError::code`].

pub mod guard;
pub mod remote;
pub mod store_service;

pub use guard::{guard_router, load_modules, GuardOptions, GuardState};
pub use remote::RemoteStore;
pub use store_service::store_router;

/// Header carrying a signed delete request.
pub const DELETE_HEADER: &str = "x-safe-delete";
/// Header carrying the guard's shared secret, when one is configured.
pub const SECRET_HEADER: &str = "x-safe-secret";

/// Installs a `tracing` subscriber honoring `RUST_LOG` (default `info`).
pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}
