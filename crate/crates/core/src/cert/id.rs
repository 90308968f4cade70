//! Principal IDs, tokens and self-certifying object identifiers.

use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;
use uuid::Uuid;

/// Longest label accepted by [`make_token`], in bytes.
pub const MAX_LABEL_LEN: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("`{0}` is not a 43-character base64url hash")]
    BadHash(String),
    #[error("`{0}` is not `<principalID>:<guid>`")]
    BadScid(String),
    #[error("label is {0} bytes, the limit is {MAX_LABEL_LEN}")]
    LabelTooLong(usize),
}

fn decode32(s: &str) -> Result<[u8; 32], IdError> {
    if s.len() != 43 {
        return Err(IdError::BadHash(s.to_string()));
    }
    let v = URL_SAFE_NO_PAD.decode(s).map_err(|_| IdError::BadHash(s.to_string()))?;
    let bytes: [u8; 32] = v.try_into().map_err(|_| IdError::BadHash(s.to_string()))?;
    // Reject texts whose trailing bits are non-zero, so each hash has one spelling.
    if URL_SAFE_NO_PAD.encode(bytes) != s {
        return Err(IdError::BadHash(s.to_string()));
    }
    Ok(bytes)
}

macro_rules! hash_id {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name([u8; 32]);

        impl $name {
            pub const fn from_bytes(b: [u8; 32]) -> Self {
                $name(b)
            }

            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&URL_SAFE_NO_PAD.encode(self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self)
            }
        }

        impl FromStr for $name {
            type Err = IdError;
            fn from_str(s: &str) -> Result<Self, IdError> {
                decode32(s).map($name)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hash_id!(
    /// SHA-256 of a principal's scheme-tagged public key.
    PrincipalId
);
hash_id!(
    /// Self-certifying name of a logic set: a hash of its issuer and label.
    Token
);

impl From<PrincipalId> for Token {
    fn from(p: PrincipalId) -> Self {
        Token(p.0)
    }
}

/// `SHA-256(scheme ‖ 0x00 ‖ key)`.
pub fn principal_id_from_key(scheme: &str, public_key: &[u8]) -> PrincipalId {
    let mut h = Sha256::new();
    h.update(scheme.as_bytes());
    h.update([0u8]);
    h.update(public_key);
    PrincipalId(h.finalize().into())
}

/// The token of the set `label` issued by `issuer`.
///
/// The empty label names the issuer's ID set, whose token is the principal ID
/// itself.
pub fn make_token(issuer: &PrincipalId, label: &str) -> Result<Token, IdError> {
    if label.len() > MAX_LABEL_LEN {
        return Err(IdError::LabelTooLong(label.len()));
    }
    if label.is_empty() {
        return Ok(Token(issuer.0));
    }
    let mut h = Sha256::new();
    h.update(issuer.0);
    h.update([0u8]);
    h.update(label.as_bytes());
    Ok(Token(h.finalize().into()))
}

/// A self-certifying object identifier: the controlling principal plus a GUID.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scid {
    authority: PrincipalId,
    guid: Uuid,
}

impl Scid {
    /// A fresh identifier with a random GUID.
    pub fn new(authority: PrincipalId) -> Self {
        Scid { authority, guid: Uuid::new_v4() }
    }

    pub fn from_parts(authority: PrincipalId, guid: Uuid) -> Self {
        Scid { authority, guid }
    }

    pub fn authority(&self) -> PrincipalId {
        self.authority
    }

    pub fn guid(&self) -> Uuid {
        self.guid
    }
}

pub fn new_scid(authority: PrincipalId) -> Scid {
    Scid::new(authority)
}

pub fn root_id(s: &Scid) -> PrincipalId {
    s.authority
}

impl fmt::Display for Scid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.authority, self.guid.hyphenated())
    }
}

impl fmt::Debug for Scid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scid({self})")
    }
}

impl FromStr for Scid {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, IdError> {
        let bad = || IdError::BadScid(s.to_string());
        let (a, g) = s.split_once(':').ok_or_else(bad)?;
        let authority = a.parse().map_err(|_| bad())?;
        if g.len() != 36 {
            return Err(bad());
        }
        let guid = Uuid::parse_str(g).map_err(|_| bad())?;
        if guid.hyphenated().to_string() != g {
            return Err(bad());
        }
        Ok(Scid { authority, guid })
    }
}
