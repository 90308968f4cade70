//! Logic sets, their signed certificate form, and validation.

use std::sync::Arc;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use thiserror::Error;

use crate::cert::id::{make_token, IdError, PrincipalId, Token};
use crate::cert::key::{self, KeyHandle};
use crate::logic::parse::{check_statement, parse_statement, ParseErrorKind};
use crate::logic::term::{quoted, Const, Origin, Statement, Term};
use crate::time::Timestamp;

pub const SET_VERSION: &str = "safe-set 1";
pub const CERT_VERSION: &str = "safe-cert 1";

/// A labeled set of statements with links, as issued by one principal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicSet {
    pub label: String,
    pub issuer: PrincipalId,
    pub statements: Vec<Statement>,
    pub links: Vec<Token>,
    pub issued: Timestamp,
    pub expiry: Timestamp,
}

impl LogicSet {
    pub fn token(&self) -> Token {
        make_token(&self.issuer, &self.label).expect("labels are length-checked when the set is built or decoded")
    }
}

/// A signed logic set. `payload` holds the exact bytes the signature covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub scheme: String,
    pub public_key: Vec<u8>,
    pub payload: Vec<u8>,
    pub signature: Vec<u8>,
    pub set: LogicSet,
}

impl Certificate {
    pub fn token(&self) -> Token {
        self.set.token()
    }
}

/// A certificate that passed [`verify_certificate`]. Its statements carry
/// their origin (token and expiry).
#[derive(Clone, Debug)]
pub struct ValidatedSet {
    pub token: Token,
    pub set: Arc<LogicSet>,
}

impl ValidatedSet {
    pub fn expiry(&self) -> Timestamp {
        self.set.expiry
    }

    pub fn links(&self) -> &[Token] {
        &self.set.links
    }

    pub fn statements(&self) -> &[Statement] {
        &self.set.statements
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Validity {
    pub issued: Timestamp,
    pub expiry: Timestamp,
}

impl Validity {
    pub fn starting(now: Timestamp, ttl: std::time::Duration) -> Self {
        Validity { issued: now, expiry: now.saturating_add(ttl) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Label(#[from] IdError),
    #[error("statement {index} speaks as {found}, but the issuer is {issuer}")]
    ForeignSpeaker { index: usize, found: String, issuer: PrincipalId },
    #[error("statement {index}: {kind}")]
    Invalid { index: usize, kind: ParseErrorKind },
    #[error("validity window is empty")]
    EmptyValidity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("input ends early")]
    Truncated,
    #[error("unknown format version `{0}`")]
    UnknownVersion(String),
    #[error("non-canonical encoding")]
    NonCanonical,
    #[error("malformed certificate: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("signature does not verify")]
    BadSignature,
    #[error("public key does not hash to the issuer")]
    KeyIssuerMismatch,
    #[error("statement {index} does not speak as the issuer")]
    SpeakerMismatch { index: usize },
    #[error("certificate expired at {0}")]
    Expired(Timestamp),
    #[error("certificate not valid before {0}")]
    NotYetValid(Timestamp),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

impl VerifyError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            VerifyError::BadSignature => "bad_signature",
            VerifyError::KeyIssuerMismatch => "key_issuer_mismatch",
            VerifyError::SpeakerMismatch { .. } => "speaker_mismatch",
            VerifyError::Expired(_) => "expired",
            VerifyError::NotYetValid(_) => "not_yet_valid",
            VerifyError::Decode(_) => "decode",
        }
    }
}

fn speaks_as(st: &Statement, issuer: &str) -> bool {
    matches!(&st.head.speaker, Term::Const(Const::Str(s)) if &**s == issuer)
}

/// Resolves `$Self` to the key's principal, checks every statement, encodes
/// the payload and signs it.
pub fn build_and_sign(
    label: &str,
    statements: Vec<Statement>,
    links: Vec<Token>,
    validity: Validity,
    key: &dyn KeyHandle,
) -> Result<Certificate, BuildError> {
    let issuer = key.principal_id();
    make_token(&issuer, label)?;
    if validity.issued >= validity.expiry {
        return Err(BuildError::EmptyValidity);
    }
    let me = Const::from(issuer.to_string());
    let mut out = Vec::with_capacity(statements.len());
    for (index, mut st) in statements.into_iter().enumerate() {
        st.resolve_self(&me);
        st.origin = None;
        check_statement(&st).map_err(|kind| BuildError::Invalid { index, kind })?;
        if !speaks_as(&st, me.as_str().unwrap_or_default()) {
            return Err(BuildError::ForeignSpeaker { index, found: st.head.speaker.to_string(), issuer });
        }
        out.push(st);
    }
    let set = LogicSet { label: label.to_string(), issuer, statements: out, links, issued: validity.issued, expiry: validity.expiry };
    let scheme = key.scheme().to_string();
    let public_key = key.public_key();
    let payload = encode_payload(&scheme, &public_key, &set).into_bytes();
    let signature = key.sign(&payload);
    Ok(Certificate { scheme, public_key, payload, signature, set })
}

/// Checks signature, key/issuer binding, speakers and the validity window.
pub fn verify_certificate(cert: &Certificate, now: Timestamp) -> Result<ValidatedSet, VerifyError> {
    let sig_ok = key::verify_signature(&cert.scheme, &cert.public_key, &cert.payload, &cert.signature).unwrap_or(false);
    if !sig_ok {
        return Err(VerifyError::BadSignature);
    }
    let pid = key::principal_id(&cert.scheme, &cert.public_key).map_err(|_| VerifyError::KeyIssuerMismatch)?;
    if pid != cert.set.issuer {
        return Err(VerifyError::KeyIssuerMismatch);
    }
    let issuer = pid.to_string();
    for (index, st) in cert.set.statements.iter().enumerate() {
        if !speaks_as(st, &issuer) {
            return Err(VerifyError::SpeakerMismatch { index });
        }
    }
    if now < cert.set.issued {
        return Err(VerifyError::NotYetValid(cert.set.issued));
    }
    if now >= cert.set.expiry {
        return Err(VerifyError::Expired(cert.set.expiry));
    }
    let token = cert.token();
    let origin = Arc::new(Origin { token, expiry: cert.set.expiry });
    let mut set = cert.set.clone();
    for st in &mut set.statements {
        st.origin = Some(origin.clone());
    }
    Ok(ValidatedSet { token, set: Arc::new(set) })
}

/// Decodes and verifies in one step. Every byte of the signed payload is
/// covered by the signature check before the payload is interpreted, so any
/// payload mutation reports [`VerifyError::BadSignature`].
pub fn verify_encoded(bytes: &[u8], now: Timestamp) -> Result<(Certificate, ValidatedSet), VerifyError> {
    let (payload, signature) = split_frame(bytes)?;
    let (scheme, public_key) = payload_key(payload).ok_or(VerifyError::BadSignature)?;
    if !key::verify_signature(&scheme, &public_key, payload, &signature).unwrap_or(false) {
        return Err(VerifyError::BadSignature);
    }
    let cert = decode(bytes)?;
    let v = verify_certificate(&cert, now)?;
    Ok((cert, v))
}

fn encode_payload(scheme: &str, public_key: &[u8], set: &LogicSet) -> String {
    let mut s = String::new();
    s.push_str(SET_VERSION);
    s.push('\n');
    s.push_str(&format!("scheme {scheme}\n"));
    s.push_str(&format!("key {}\n", URL_SAFE_NO_PAD.encode(public_key)));
    s.push_str(&format!("issuer {}\n", set.issuer));
    s.push_str(&format!("label {}\n", quoted(&set.label)));
    s.push_str(&format!("issued {}\n", set.issued));
    s.push_str(&format!("expiry {}\n", set.expiry));
    for l in &set.links {
        s.push_str(&format!("link {l}\n"));
    }
    for st in &set.statements {
        s.push_str(&format!("stmt {st}\n"));
    }
    s
}

pub fn encode(cert: &Certificate) -> Vec<u8> {
    let mut out = Vec::with_capacity(cert.payload.len() + 160);
    out.extend_from_slice(format!("{CERT_VERSION}\npayload {}\n", cert.payload.len()).as_bytes());
    out.extend_from_slice(&cert.payload);
    out.extend_from_slice(format!("signature {}\n", URL_SAFE_NO_PAD.encode(&cert.signature)).as_bytes());
    out
}

fn take_line<'a>(bytes: &mut &'a [u8]) -> Result<&'a str, DecodeError> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or(DecodeError::Truncated)?;
    let line = std::str::from_utf8(&bytes[..nl]).map_err(|_| DecodeError::Malformed("not UTF-8".into()))?;
    *bytes = &bytes[nl + 1..];
    Ok(line)
}

fn split_frame(mut bytes: &[u8]) -> Result<(&[u8], Vec<u8>), DecodeError> {
    let version = take_line(&mut bytes)?;
    if version != CERT_VERSION {
        return Err(if version.starts_with("safe-cert ") {
            DecodeError::UnknownVersion(version.to_string())
        } else {
            DecodeError::Malformed("missing certificate header".into())
        });
    }
    let len_line = take_line(&mut bytes)?;
    let len_text = len_line.strip_prefix("payload ").ok_or_else(|| DecodeError::Malformed("missing payload length".into()))?;
    let len: usize = len_text.parse().map_err(|_| DecodeError::Malformed("bad payload length".into()))?;
    if len.to_string() != len_text {
        return Err(DecodeError::NonCanonical);
    }
    if bytes.len() < len {
        return Err(DecodeError::Truncated);
    }
    let (payload, mut rest) = bytes.split_at(len);
    let sig_line = take_line(&mut rest)?;
    if !rest.is_empty() {
        return Err(DecodeError::Malformed("trailing bytes".into()));
    }
    let sig_text = sig_line.strip_prefix("signature ").ok_or_else(|| DecodeError::Malformed("missing signature".into()))?;
    let sig = URL_SAFE_NO_PAD.decode(sig_text).map_err(|_| DecodeError::Malformed("bad signature encoding".into()))?;
    Ok((payload, sig))
}

fn payload_key(mut payload: &[u8]) -> Option<(String, Vec<u8>)> {
    take_line(&mut payload).ok()?;
    let scheme = take_line(&mut payload).ok()?.strip_prefix("scheme ")?.to_string();
    let key = URL_SAFE_NO_PAD.decode(take_line(&mut payload).ok()?.strip_prefix("key ")?).ok()?;
    Some((scheme, key))
}

fn field<'a>(line: &'a str, name: &str) -> Result<&'a str, DecodeError> {
    line.strip_prefix(name)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| DecodeError::Malformed(format!("expected `{name}` field")))
}

fn parse_label(text: &str) -> Result<String, DecodeError> {
    // Reuse the logic lexer's string syntax so labels escape like terms.
    let st = parse_statement(&format!("x: l({text}).")).map_err(|_| DecodeError::Malformed("bad label".into()))?;
    match (st.head.args.as_slice(), text.starts_with('"')) {
        ([Term::Const(Const::Str(s))], true) => Ok(s.to_string()),
        _ => Err(DecodeError::Malformed("bad label".into())),
    }
}

/// Parses a certificate. Only the canonical encoding is accepted.
pub fn decode(bytes: &[u8]) -> Result<Certificate, DecodeError> {
    let (payload_bytes, signature) = split_frame(bytes)?;
    let mut p = payload_bytes;
    let version = take_line(&mut p)?;
    if version != SET_VERSION {
        return Err(if version.starts_with("safe-set ") {
            DecodeError::UnknownVersion(version.to_string())
        } else {
            DecodeError::Malformed("missing set header".into())
        });
    }
    let scheme = field(take_line(&mut p)?, "scheme")?.to_string();
    let public_key = URL_SAFE_NO_PAD
        .decode(field(take_line(&mut p)?, "key")?)
        .map_err(|_| DecodeError::Malformed("bad key encoding".into()))?;
    let issuer: PrincipalId =
        field(take_line(&mut p)?, "issuer")?.parse().map_err(|e: IdError| DecodeError::Malformed(e.to_string()))?;
    let label = parse_label(field(take_line(&mut p)?, "label")?)?;
    if make_token(&issuer, &label).is_err() {
        return Err(DecodeError::Malformed("label too long".into()));
    }
    let ts = |s: &str| s.parse::<i64>().map(Timestamp).map_err(|_| DecodeError::Malformed("bad timestamp".into()));
    let issued = ts(field(take_line(&mut p)?, "issued")?)?;
    let expiry = ts(field(take_line(&mut p)?, "expiry")?)?;
    let mut links = Vec::new();
    let mut statements = Vec::new();
    while !p.is_empty() {
        let line = take_line(&mut p)?;
        if let Some(t) = line.strip_prefix("link ") {
            if !statements.is_empty() {
                return Err(DecodeError::NonCanonical);
            }
            links.push(t.parse().map_err(|e: IdError| DecodeError::Malformed(e.to_string()))?);
        } else if let Some(s) = line.strip_prefix("stmt ") {
            let st = parse_statement(s).map_err(|e| DecodeError::Malformed(format!("statement: {e}")))?;
            if st.has_self_ref() {
                return Err(DecodeError::Malformed("unresolved $Self".into()));
            }
            statements.push(st);
        } else {
            return Err(DecodeError::Malformed(format!("unexpected line `{line}`")));
        }
    }
    let set = LogicSet { label, issuer, statements, links, issued, expiry };
    if encode_payload(&scheme, &public_key, &set).as_bytes() != payload_bytes {
        return Err(DecodeError::NonCanonical);
    }
    let cert = Certificate { scheme, public_key, payload: payload_bytes.to_vec(), signature, set };
    if encode(&cert) != bytes {
        return Err(DecodeError::NonCanonical);
    }
    Ok(cert)
}

pub fn to_armor(cert: &Certificate) -> String {
    key::armor("SAFE CERTIFICATE", &encode(cert))
}

pub fn from_armor(text: &str) -> Result<Certificate, DecodeError> {
    let bytes = key::dearmor("SAFE CERTIFICATE", text).map_err(DecodeError::Malformed)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::key::Ed25519Key;
    use crate::logic::parse::parse_program;

    fn key() -> Ed25519Key {
        Ed25519Key::from_seed([42; 32])
    }

    fn window() -> Validity {
        Validity { issued: Timestamp(1_000), expiry: Timestamp(10_000) }
    }

    fn subject_set() -> Certificate {
        let stmts = parse_program("member(alice, staff).\nrole(alice, \"admin\").").unwrap();
        build_and_sign("subject", stmts, vec![], window(), &key()).unwrap()
    }

    #[test]
    fn signed_set_verifies() {
        let c = subject_set();
        let v = verify_certificate(&c, Timestamp(5_000)).unwrap();
        assert_eq!(v.token, make_token(&key().principal_id(), "subject").unwrap());
        assert_eq!(v.statements().len(), 2);
        assert!(v.statements().iter().all(|s| s.origin.as_ref().unwrap().token == v.token));
    }

    #[test]
    fn links_survive_round_trip_in_order() {
        let links: Vec<Token> = (1..=3).map(|i| Token::from_bytes([i; 32])).collect();
        let c = build_and_sign("capset/slice1", vec![], links.clone(), window(), &key()).unwrap();
        let back = decode(&encode(&c)).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.set.links, links);
    }

    #[test]
    fn foreign_speaker_is_rejected() {
        let stmts = parse_program("someoneElse: f(a).").unwrap();
        let e = build_and_sign("x", stmts, vec![], window(), &key()).unwrap_err();
        assert!(matches!(e, BuildError::ForeignSpeaker { index: 0, .. }));
        // Foreign speakers in rule bodies are fine.
        let stmts = parse_program("f(?X) :- other: g(?X).").unwrap();
        assert!(build_and_sign("x", stmts, vec![], window(), &key()).is_ok());
    }

    #[test]
    fn validity_window_is_enforced() {
        let c = subject_set();
        assert_eq!(verify_certificate(&c, Timestamp(10_000)).unwrap_err().code(), "expired");
        assert_eq!(verify_certificate(&c, Timestamp(999)).unwrap_err().code(), "not_yet_valid");
        let e = build_and_sign("x", vec![], vec![], Validity { issued: Timestamp(5), expiry: Timestamp(5) }, &key());
        assert_eq!(e.unwrap_err(), BuildError::EmptyValidity);
    }

    #[test]
    fn encoding_is_deterministic_and_strict() {
        let c = subject_set();
        let bytes = encode(&c);
        assert_eq!(bytes, encode(&c));
        for cut in [0, 5, 20, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let text = String::from_utf8(bytes.clone()).unwrap();
        let v2 = text.replacen("safe-cert 1", "safe-cert 2", 1);
        assert!(matches!(decode(v2.as_bytes()), Err(DecodeError::UnknownVersion(_))));
        let spaced = text.replacen("member(", "member (", 1);
        assert!(decode(spaced.as_bytes()).is_err());
        let padded = text.replacen(&format!("payload {}", c.payload.len()), &format!("payload 0{}", c.payload.len()), 1);
        assert_eq!(decode(padded.as_bytes()), Err(DecodeError::NonCanonical));
    }

    #[test]
    fn unicode_label_round_trips() {
        let c = build_and_sign("name/café \"quoted\" $x", vec![], vec![], window(), &key()).unwrap();
        let back = decode(&encode(&c)).unwrap();
        assert_eq!(back.set.label, "name/café \"quoted\" $x");
        assert_eq!(from_armor(&to_armor(&c)).unwrap(), c);
    }

    #[test]
    fn re_signed_by_another_key_fails_issuer_binding() {
        let c = subject_set();
        let attacker = Ed25519Key::from_seed([7; 32]);
        let forged = Certificate {
            public_key: attacker.public_key(),
            payload: encode_payload("ed25519", &attacker.public_key(), &c.set).into_bytes(),
            ..c.clone()
        };
        let forged = Certificate { signature: attacker.sign(&forged.payload), ..forged };
        let e = verify_encoded(&encode(&forged), Timestamp(5_000)).unwrap_err();
        assert_eq!(e, VerifyError::KeyIssuerMismatch);
    }
}
