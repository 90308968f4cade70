use std::time::Duration;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;

use crate::cert::{KeyHandle, Token};
use crate::time::Timestamp;

/// How far a delete request's timestamp may be from the store's clock.
pub const DELETE_WINDOW: Duration = Duration::from_secs(300);

/// An issuer's signed request to remove one of its sets early.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeleteRequest {
    pub timestamp: Timestamp,
    pub scheme: String,
    pub public_key: Vec<u8>,
    pub signature: Vec<u8>,
}

impl DeleteRequest {
    pub fn message(token: &Token, ts: Timestamp) -> Vec<u8> {
        format!("safe-delete\n{token}\n{ts}").into_bytes()
    }

    pub fn sign(token: &Token, now: Timestamp, key: &dyn KeyHandle) -> Self {
        DeleteRequest {
            timestamp: now,
            scheme: key.scheme().to_string(),
            public_key: key.public_key(),
            signature: key.sign(&Self::message(token, now)),
        }
    }

    /// Header form: `<scheme> <key> <timestamp> <signature>`, base64url fields.
    pub fn to_header(&self) -> String {
        format!(
            "{} {} {} {}",
            self.scheme,
            URL_SAFE_NO_PAD.encode(&self.public_key),
            self.timestamp,
            URL_SAFE_NO_PAD.encode(&self.signature)
        )
    }

    pub fn from_header(h: &str) -> Option<Self> {
        let mut it = h.split(' ');
        let scheme = it.next()?.to_string();
        let public_key = URL_SAFE_NO_PAD.decode(it.next()?).ok()?;
        let timestamp = Timestamp(it.next()?.parse().ok()?);
        let signature = URL_SAFE_NO_PAD.decode(it.next()?).ok()?;
        if it.next().is_some() {
            return None;
        }
        Some(DeleteRequest { timestamp, scheme, public_key, signature })
    }
}
