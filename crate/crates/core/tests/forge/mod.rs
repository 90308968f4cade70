//! Forged certificate generator shared by the store tests and the
//! acceptance suite.

#![allow(dead_code)]

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use rand::Rng;
use safe_core::cert::{build_and_sign, encode, Certificate, Ed25519Key, KeyHandle, Token, Validity};
use safe_core::logic::parse_program;
use safe_core::time::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Forgery {
    /// Payload names one issuer but carries and is signed by another key.
    WrongKey,
    /// A payload byte changed after signing.
    MutatedPayload,
    /// A valid certificate posted under some other token.
    MismatchedToken,
    /// Signed by the issuer, but a statement speaks for someone else.
    ForeignSpeaker,
}

impl Forgery {
    pub const ALL: [Forgery; 4] = [Forgery::WrongKey, Forgery::MutatedPayload, Forgery::MismatchedToken, Forgery::ForeignSpeaker];

    pub fn expected_code(self) -> &'static str {
        match self {
            Forgery::WrongKey => "key_issuer_mismatch",
            Forgery::MutatedPayload => "bad_signature",
            Forgery::MismatchedToken => "token_mismatch",
            Forgery::ForeignSpeaker => "speaker_mismatch",
        }
    }
}

/// Frames a payload the same way the encoder does.
pub fn frame(payload: &[u8], sig: &[u8]) -> Vec<u8> {
    let mut out = format!("safe-cert 1\npayload {}\n", payload.len()).into_bytes();
    out.extend_from_slice(payload);
    out.extend_from_slice(format!("signature {}\n", URL_SAFE_NO_PAD.encode(sig)).as_bytes());
    out
}

pub fn genuine(key: &Ed25519Key, label: &str, n: usize) -> Certificate {
    let src: String = (0..n).map(|i| format!("member(u{i}, g{}).\n", i % 3)).collect();
    let v = Validity { issued: Timestamp(0), expiry: Timestamp(i64::MAX / 4) };
    build_and_sign(label, parse_program(&src).unwrap(), vec![], v, key).unwrap()
}

/// Returns the token to post under and the bytes to post.
pub fn forge(kind: Forgery, rng: &mut impl Rng) -> (Token, Vec<u8>) {
    let victim = Ed25519Key::from_seed(rng.random());
    let attacker = Ed25519Key::from_seed(rng.random());
    let label = format!("set{}", rng.random_range(0..1000u32));
    let cert = genuine(&victim, &label, rng.random_range(1..6));
    let token = cert.token();
    let payload = String::from_utf8(cert.payload.clone()).unwrap();
    match kind {
        Forgery::WrongKey => {
            let ours = URL_SAFE_NO_PAD.encode(attacker.public_key());
            let theirs = URL_SAFE_NO_PAD.encode(victim.public_key());
            let p = payload.replacen(&format!("key {theirs}\n"), &format!("key {ours}\n"), 1);
            (token, frame(p.as_bytes(), &attacker.sign(p.as_bytes())))
        }
        Forgery::MutatedPayload => {
            let mut p = cert.payload.clone();
            let i = rng.random_range(0..p.len());
            let old = p[i];
            while p[i] == old {
                p[i] = rng.random_range(0x20..0x7f);
            }
            (token, frame(&p, &cert.signature))
        }
        Forgery::MismatchedToken => {
            let other = genuine(&victim, &format!("{label}x"), 1).token();
            (other, encode(&cert))
        }
        Forgery::ForeignSpeaker => {
            let me = victim.principal_id().to_string();
            let them = attacker.principal_id().to_string();
            let lines: Vec<&str> = payload.lines().collect();
            let stmts: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].starts_with("stmt ")).collect();
            let pick = stmts[rng.random_range(0..stmts.len())];
            let mut out = String::new();
            for (i, l) in lines.iter().enumerate() {
                if i == pick {
                    out.push_str(&l.replacen(&me, &them, 1));
                } else {
                    out.push_str(l);
                }
                out.push('\n');
            }
            (token, frame(out.as_bytes(), &victim.sign(out.as_bytes())))
        }
    }
}
