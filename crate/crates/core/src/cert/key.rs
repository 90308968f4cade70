//! Signing keys. Ed25519 is the only scheme shipped; the scheme name is
//! recorded in every certificate so others can be added alongside it.

use std::fmt;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::RngCore;
use thiserror::Error;

use crate::cert::id::{principal_id_from_key, PrincipalId};

pub const ED25519: &str = "ed25519";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("unknown signature scheme `{0}`")]
    UnknownScheme(String),
    #[error("malformed {0} key")]
    Malformed(&'static str),
    #[error("malformed key file: {0}")]
    File(String),
}

/// A capability to sign as one principal.
pub trait KeyHandle: Send + Sync {
    fn scheme(&self) -> &'static str;
    fn public_key(&self) -> Vec<u8>;
    fn sign(&self, msg: &[u8]) -> Vec<u8>;

    fn principal_id(&self) -> PrincipalId {
        principal_id_from_key(self.scheme(), &self.public_key())
    }
}

/// Checks `sig` over `msg` under `public_key` for the named scheme.
pub fn verify_signature(scheme: &str, public_key: &[u8], msg: &[u8], sig: &[u8]) -> Result<bool, KeyError> {
    match scheme {
        ED25519 => {
            let pk: [u8; 32] = public_key.try_into().map_err(|_| KeyError::Malformed(ED25519))?;
            let vk = VerifyingKey::from_bytes(&pk).map_err(|_| KeyError::Malformed(ED25519))?;
            let Ok(sig) = Signature::from_slice(sig) else { return Ok(false) };
            Ok(vk.verify(msg, &sig).is_ok())
        }
        other => Err(KeyError::UnknownScheme(other.to_string())),
    }
}

/// The principal ID for a public key, validating the key encoding first.
pub fn principal_id(scheme: &str, public_key: &[u8]) -> Result<PrincipalId, KeyError> {
    match scheme {
        ED25519 => {
            let pk: [u8; 32] = public_key.try_into().map_err(|_| KeyError::Malformed(ED25519))?;
            VerifyingKey::from_bytes(&pk).map_err(|_| KeyError::Malformed(ED25519))?;
            Ok(principal_id_from_key(scheme, public_key))
        }
        other => Err(KeyError::UnknownScheme(other.to_string())),
    }
}

#[derive(Clone)]
pub struct Ed25519Key {
    sk: SigningKey,
}

impl Ed25519Key {
    pub fn generate() -> Self {
        Self::generate_with(&mut rand::rng())
    }

    pub fn generate_with<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_seed(seed)
    }

    pub fn from_seed(seed: [u8; 32]) -> Self {
        Ed25519Key { sk: SigningKey::from_bytes(&seed) }
    }

    pub fn seed(&self) -> [u8; 32] {
        self.sk.to_bytes()
    }

    /// Text form used for key files.
    pub fn to_armor(&self) -> String {
        let body = format!("scheme {ED25519}\nseed {}\n", STANDARD.encode(self.seed()));
        armor("SAFE PRIVATE KEY", body.as_bytes())
    }

    pub fn from_armor(text: &str) -> Result<Self, KeyError> {
        let body = dearmor("SAFE PRIVATE KEY", text).map_err(KeyError::File)?;
        let body = String::from_utf8(body).map_err(|_| KeyError::File("not UTF-8".into()))?;
        let mut lines = body.lines();
        match lines.next() {
            Some(l) if l == format!("scheme {ED25519}") => {}
            Some(l) => return Err(KeyError::UnknownScheme(l.trim_start_matches("scheme ").to_string())),
            None => return Err(KeyError::File("empty key".into())),
        }
        let seed = lines
            .next()
            .and_then(|l| l.strip_prefix("seed "))
            .and_then(|s| STANDARD.decode(s).ok())
            .and_then(|v| <[u8; 32]>::try_from(v).ok())
            .ok_or(KeyError::Malformed(ED25519))?;
        Ok(Self::from_seed(seed))
    }
}

impl fmt::Debug for Ed25519Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ed25519Key({})", self.principal_id())
    }
}

impl KeyHandle for Ed25519Key {
    fn scheme(&self) -> &'static str {
        ED25519
    }

    fn public_key(&self) -> Vec<u8> {
        self.sk.verifying_key().to_bytes().to_vec()
    }

    fn sign(&self, msg: &[u8]) -> Vec<u8> {
        self.sk.sign(msg).to_bytes().to_vec()
    }
}

/// Wraps `data` in `-----BEGIN <kind>-----` lines with base64 body lines of 64.
pub fn armor(kind: &str, data: &[u8]) -> String {
    let b64 = STANDARD.encode(data);
    let mut out = format!("-----BEGIN {kind}-----\n");
    for chunk in b64.as_bytes().chunks(64) {
        out.push_str(std::str::from_utf8(chunk).expect("base64 is ASCII"));
        out.push('\n');
    }
    out.push_str(&format!("-----END {kind}-----\n"));
    out
}

pub fn dearmor(kind: &str, text: &str) -> Result<Vec<u8>, String> {
    let begin = format!("-----BEGIN {kind}-----");
    let end = format!("-----END {kind}-----");
    let start = text.find(&begin).ok_or_else(|| format!("missing `{begin}`"))?;
    let rest = &text[start + begin.len()..];
    let stop = rest.find(&end).ok_or_else(|| format!("missing `{end}`"))?;
    let b64: String = rest[..stop].split_whitespace().collect();
    STANDARD.decode(b64).map_err(|e| format!("bad base64: {e}"))
}
