//! Access decided by attested image properties.
//!
//! A provider attests that a client runs an image; an endorser lists the
//! image's properties; the object's owner lists, in the object's ID set,
//! the properties its ACL admits. Access needs all three to line up.

use std::sync::Arc;

use safe_core::cert::{PrincipalId, Token};
use safe_core::logic::quoted;
use safe_core::slang::GuardResult;
use safe_core::store::CertStore;
use safe_core::time::Clock;

use crate::{statements, token_for, AppError, Driver, Guard, GuardConfig, Principal};

pub const SCRIPT: &str = include_str!("../scripts/attest.slang");

/// How the guard finds the client's attestation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    /// The client presents the attestation token; one context.
    Bearer,
    /// The guard synthesizes the token from the provider's ID; one context.
    Synthesized,
    /// Bearer token; the attestation and the ACL are checked in two contexts.
    MultiContext,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::Bearer, Pattern::Synthesized, Pattern::MultiContext];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Bearer => "bearer",
            Pattern::Synthesized => "synth",
            Pattern::MultiContext => "multi",
        }
    }
}

/// Why an access check was denied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Denial {
    /// No trusted attestation for the client was found.
    NotAttested,
    /// The client is attested but no image property is on the ACL.
    NoMatchingProperty,
}

#[derive(Debug)]
pub struct AccessDecision {
    pub result: GuardResult,
    pub denial: Option<Denial>,
}

impl AccessDecision {
    pub fn allowed(&self) -> bool {
        self.result.allowed
    }
}

pub fn attest_label(client: &PrincipalId) -> String {
    format!("attest/{client}")
}

pub fn image_label(image: &str) -> String {
    format!("image/{image}")
}

/// Issues endorsements, attestations and object ACLs.
pub struct Attest {
    driver: Driver,
}

impl Attest {
    pub fn new(store: Arc<dyn CertStore>, clock: Arc<dyn Clock>) -> Self {
        Attest { driver: Driver::new(SCRIPT, store, clock) }
    }

    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    /// `endorser` lists `image`'s properties.
    pub fn endorse_image<S: AsRef<str>>(&self, endorser: &Principal, image: &str, properties: &[S]) -> Result<Token, AppError> {
        let img = quoted(image);
        let src: String = properties.iter().map(|p| format!("endorse({img}, {}).\n", quoted(p.as_ref()))).collect();
        self.driver.issuer().issue(endorser, &image_label(image), statements(&src)?, vec![])
    }

    /// `provider` attests that `client` runs `image`. The returned token
    /// is the client's bearer token.
    pub fn attest(&self, provider: &mut Principal, client: &PrincipalId, image: &str, endorser: &PrincipalId) -> Result<Token, AppError> {
        let (c, e) = (client.to_string(), endorser.to_string());
        self.driver.defcon(provider, "attestClient", &[&c, image, &e])
    }

    /// Creates an object whose ACL admits `properties`. Returns the scid.
    pub fn new_object<S: AsRef<str>>(&self, owner: &mut Principal, properties: &[S]) -> Result<String, AppError> {
        let (_, scid) = self.driver.defcon_labelled(owner, "newObject", &[])?;
        self.set_acl(owner, &scid, properties)?;
        Ok(scid)
    }

    /// Replaces the property ACL in `object`'s ID set.
    pub fn set_acl<S: AsRef<str>>(&self, owner: &Principal, object: &str, properties: &[S]) -> Result<Token, AppError> {
        let (me, obj) = (quoted(&owner.id().to_string()), quoted(object));
        let mut src = format!("controls({me}, {obj}).\n");
        for p in properties {
            src.push_str(&format!("aclEntry({}, {obj}).\n", quoted(p.as_ref())));
        }
        self.driver.issuer().issue(owner, object, statements(&src)?, vec![])
    }
}

/// A guard checking attested access.
pub struct AttestGuard {
    guard: Guard,
    provider: PrincipalId,
}

impl AttestGuard {
    pub fn new(principal: Principal, provider: PrincipalId, store: Arc<dyn CertStore>, clock: Arc<dyn Clock>, config: GuardConfig) -> Self {
        let mut guard = Guard::new(principal, SCRIPT, store, clock, config);
        guard.principal().env().set("Provider", provider.to_string());
        AttestGuard { guard, provider }
    }

    pub fn post_policy(&mut self, endorser: &PrincipalId) -> Result<Token, AppError> {
        let (p, e) = (self.provider.to_string(), endorser.to_string());
        self.guard.defcon("attestPolicy", &[&p, &e])
    }

    pub fn guard(&mut self) -> &mut Guard {
        &mut self.guard
    }

    /// Bearer token the provider issued for `client`.
    pub fn attestation_token(&self, client: &PrincipalId) -> Token {
        token_for(&self.provider, &attest_label(client))
    }

    /// May `client` access `object`? `bearer` is required for the bearer
    /// patterns and ignored when synthesizing.
    pub fn check_access(&mut self, pattern: Pattern, client: &PrincipalId, object: &str, bearer: Option<&Token>) -> Result<AccessDecision, AppError> {
        let c = client.to_string();
        let fallback = self.attestation_token(client);
        let bearer = bearer.unwrap_or(&fallback);
        let result = match pattern {
            Pattern::Bearer => self.guard.check("accessBearer", &[&c, object], Some(bearer))?,
            Pattern::Synthesized => self.guard.check("accessSynth", &[&c, object], None)?,
            Pattern::MultiContext => self.guard.check("accessMulti", &[&c, object], Some(bearer))?,
        };
        let denial = if result.allowed {
            None
        } else {
            let attested = match pattern {
                Pattern::MultiContext => result.diagnostics.failed_block != Some(0),
                Pattern::Bearer => self.guard.check("attestedBearer", &[&c], Some(bearer))?.allowed,
                Pattern::Synthesized => self.guard.check("attestedSynth", &[&c], None)?.allowed,
            };
            Some(if attested { Denial::NoMatchingProperty } else { Denial::NotAttested })
        };
        Ok(AccessDecision { result, denial })
    }
}
