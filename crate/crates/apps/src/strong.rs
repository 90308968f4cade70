//! STRONG: capabilities, nested groups, and hierarchical names.
//!
//! Capabilities follow the recursive delegation rule: a subject holds a
//! capability if a delegator who holds it with the delegatable flag issued
//! it, or if the object's controlling principal issued it. Groups are
//! objects; membership is granted by the owner, by delegatable members, or
//! inherited through nested groups. Names live in naming domains: each
//! domain principal posts one entry set per component, linked up to its own
//! entry in the parent domain and to its ACL set.
//!
//! Every name entry carries the delegation twice, as
//! `nameDelegate(parent, child)` and `nameParent(child, parent)`, so walks
//! down the tree and walks up it both hit the first-argument index.

use std::collections::BTreeMap;
use std::sync::Arc;

use safe_core::cert::{PrincipalId, Scid, Token};
use safe_core::logic::{prove, quoted, Atom, Const, Literal, Term};
use safe_core::cache::AssembleError;
use safe_core::slang::{GuardResult, ScriptError};
use safe_core::store::ClosureError;
use safe_core::store::CertStore;
use safe_core::time::Clock;

use crate::fixture::NameTree;
use crate::{statements, token_for, AppError, Driver, Guard, GuardConfig, Principal};

pub const SCRIPT: &str = include_str!("../scripts/strong.slang");

/// How principals link received delegations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Linking {
    /// Received capabilities go in a per-object set `cap/<object>`; the
    /// subject set holds identity credentials only.
    #[default]
    Direct,
    /// Everything received is linked from the subject set.
    Coarse,
}

/// Which name predicate the prefix-ACL walk uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NameIndex {
    /// `nameDelegate(parent, child)`, keyed on the directory being walked.
    #[default]
    Dual,
    /// `nameParent(child, parent)` only, which the walk cannot key.
    Single,
}

/// Issuing side of STRONG.
pub struct Strong {
    driver: Driver,
    linking: Linking,
    precheck: Option<Guard>,
}

impl Strong {
    pub fn new(store: Arc<dyn CertStore>, clock: Arc<dyn Clock>, linking: Linking) -> Self {
        Strong { driver: Driver::new(SCRIPT, store, clock), linking, precheck: None }
    }

    /// Delegators check their own authority before issuing, using `guard`'s
    /// policy set.
    pub fn with_precheck(mut self, guard: Guard) -> Self {
        self.precheck = Some(guard);
        self
    }

    pub fn linking(&self) -> Linking {
        self.linking
    }

    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    /// Posts `p`'s subject set with no links if it has none yet.
    pub fn enroll(&self, p: &Principal) -> Result<Token, AppError> {
        match self.driver.issuer().current(&p.id(), "subject")? {
            Some(_) => Ok(p.token("subject")),
            None => self.driver.issuer().issue(p, "subject", vec![], vec![]),
        }
    }

    /// `registry` endorses `who` with an attribute; `who` links the
    /// endorsement from its subject set.
    pub fn endorse(&self, registry: &Principal, who: &Principal, attribute: &str) -> Result<Token, AppError> {
        let label = format!("endorse/{}", who.id());
        let st = statements(&format!("endorsed({}, {}).", quoted(&who.id().to_string()), quoted(attribute)))?;
        let t = self.driver.issuer().issue(registry, &label, st, vec![])?;
        self.driver.issuer().append_link(who, "subject", t)
    }

    /// Creates an object and posts its ID set. Returns the scid.
    pub fn new_object(&self, owner: &mut Principal) -> Result<String, AppError> {
        Ok(self.driver.defcon_labelled(owner, "newObject", &[])?.1)
    }

    /// Creates a group. The owner also posts its (empty) credential set for
    /// the group, which grants and nestings it issues link as support.
    pub fn new_group(&self, owner: &mut Principal) -> Result<String, AppError> {
        let g = self.new_object(owner)?;
        self.driver.issuer().issue(owner, &format!("group/{g}"), vec![], vec![])?;
        Ok(g)
    }

    /// Token a holder presents for requests on `object`.
    pub fn bearer(&self, holder: &PrincipalId, object: &str) -> Token {
        match self.linking {
            Linking::Direct => token_for(holder, &format!("cap/{object}")),
            Linking::Coarse => token_for(holder, "subject"),
        }
    }

    /// Issues a capability. The set links the delegator's support: its
    /// credentials for the object and its subject set. Returns the token
    /// to hand to the subject.
    pub fn delegate_capability(
        &self,
        delegator: &mut Principal,
        subject: &PrincipalId,
        object: &str,
        privilege: &str,
        delegatable: bool,
    ) -> Result<Token, AppError> {
        let owner = object.parse::<Scid>().map(|s| s.authority()).ok();
        let is_owner = owner == Some(delegator.id());
        if !is_owner {
            if let Some(g) = &self.precheck {
                let bearer = self.bearer(&delegator.id(), object);
                let who = delegator.id().to_string();
                // The precheck guard is shared; take a short-lived clone of its state.
                let r = guard_check(g, "canDelegate", &[&who, object, privilege], &bearer)?;
                if !r.allowed {
                    return Err(AppError::NotDelegatable { who: delegator.id(), object: object.into(), privilege: privilege.into() });
                }
            }
        }
        let entry = if is_owner || self.linking == Linking::Coarse { "delegateCapSubject" } else { "delegateCapDirect" };
        let s = subject.to_string();
        self.driver.defcon(delegator, entry, &[&s, object, privilege, bool_str(delegatable)])
    }

    /// The subject links a received capability so its bearer token covers
    /// it. Returns the bearer token.
    pub fn accept_capability(&self, subject: &Principal, object: &str, token: Token) -> Result<Token, AppError> {
        match self.linking {
            Linking::Direct => self.driver.issuer().append_link(subject, &format!("cap/{object}"), token),
            Linking::Coarse => self.driver.issuer().append_link(subject, "subject", token),
        }
    }

    /// Grants membership in `group`, linking the granter's own credentials
    /// for the group: for the owner, the nestings of `group` into others; for
    /// a member, its grant.
    pub fn grant_membership(&self, granter: &mut Principal, group: &str, who: &PrincipalId, delegatable: bool) -> Result<Token, AppError> {
        let w = who.to_string();
        self.driver.defcon(granter, "grantMember", &[group, &w, bool_str(delegatable)])
    }

    /// Nests `sub` inside `group`; issued by `group`'s owner.
    pub fn nest_group(&self, owner: &mut Principal, group: &str, sub: &str, delegatable: bool) -> Result<Token, AppError> {
        self.driver.defcon(owner, "nestGroup", &[group, sub, bool_str(delegatable)])
    }

    /// Links a received grant or nesting into `who`'s credentials for
    /// `group`. For a nesting, `who` is the owner of the nested group and
    /// `group` is the nested group. Returns the bearer token.
    pub fn accept_group(&self, who: &Principal, group: &str, token: Token) -> Result<Token, AppError> {
        self.driver.issuer().append_link(who, &format!("group/{group}"), token)
    }

    pub fn group_bearer(&self, who: &PrincipalId, group: &str) -> Token {
        token_for(who, &format!("group/{group}"))
    }

    /// Posts a name entry in `domain`'s naming domain. `up` is the domain's
    /// own entry in its parent; `None` for a root domain.
    pub fn name_entry(&self, domain: &mut Principal, component: &str, child: &str, up: Option<Token>) -> Result<Token, AppError> {
        match up {
            None => self.driver.defcon(domain, "rootNameEntry", &[component, child]),
            Some(u) => {
                let u = u.to_string();
                self.driver.defcon(domain, "nameEntry", &[component, child, &u])
            }
        }
    }

    /// Replaces `dir`'s ACL: members of each group get the privilege on
    /// everything under `dir`. An empty list still posts the set so entry
    /// links never dangle.
    pub fn set_acl(&self, dir: &Principal, entries: &[(&str, &str)]) -> Result<Token, AppError> {
        let me = quoted(&dir.id().to_string());
        let src: String = entries.iter().map(|(g, p)| format!("acl({me}, {}, {}).\n", quoted(g), quoted(p))).collect();
        self.driver.issuer().issue(dir, "acl", statements(&src)?, vec![])
    }
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn guard_check(g: &Guard, entry: &str, args: &[&str], bearer: &Token) -> Result<GuardResult, AppError> {
    let mut env = safe_core::slang::Env::new(g.principal.key().clone()).with("BearerRef", bearer.to_string());
    let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
    Ok(g.interp.invoke_defguard(&g.module, entry, &args, &mut env)?)
}

/// Checking side of STRONG.
pub struct StrongGuard {
    guard: Guard,
}

impl StrongGuard {
    pub fn new(principal: Principal, store: Arc<dyn CertStore>, clock: Arc<dyn Clock>, config: GuardConfig) -> Self {
        StrongGuard { guard: Guard::new(principal, SCRIPT, store, clock, config) }
    }

    /// Posts the policy set the guard's checks link.
    pub fn post_policy(&mut self) -> Result<Token, AppError> {
        self.guard.defcon("strongPolicy", &[])
    }

    pub fn guard(&mut self) -> &mut Guard {
        &mut self.guard
    }

    pub fn into_guard(self) -> Guard {
        self.guard
    }

    pub fn check_capability(&mut self, subject: &PrincipalId, object: &str, privilege: &str, bearer: &Token) -> Result<GuardResult, AppError> {
        let s = subject.to_string();
        self.guard.check("hasCap", &[&s, object, privilege], Some(bearer))
    }

    pub fn query_membership(&mut self, who: &PrincipalId, group: &str, bearer: &Token) -> Result<GuardResult, AppError> {
        let w = who.to_string();
        self.guard.check("isMember", &[&w, group], Some(bearer))
    }

    /// Is `object` (named by its entry set `entry`) somewhere under `root`?
    pub fn under_root(&mut self, object: &str, root: &PrincipalId, entry: &Token) -> Result<GuardResult, AppError> {
        let (r, e) = (root.to_string(), entry.to_string());
        self.guard.check("underRoot", &[object, &r, &e], None)
    }

    /// Prefix access: `subject` (via `bearer`) is in a group on the ACL of
    /// a directory above `object`, whose name entry is `entry`.
    pub fn check_prefix_access(
        &mut self,
        subject: &PrincipalId,
        object: &str,
        privilege: &str,
        bearer: &Token,
        entry: &Token,
        index: NameIndex,
    ) -> Result<GuardResult, AppError> {
        let (s, e) = (subject.to_string(), entry.to_string());
        let name = match index {
            NameIndex::Dual => "accessObject",
            NameIndex::Single => "accessObjectSingle",
        };
        self.guard.check(name, &[&s, object, privilege, &e], Some(bearer))
    }
}

/// One step of a resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hop {
    pub domain: String,
    pub component: String,
    pub entry: Token,
    pub child: String,
}

#[derive(Clone, Debug)]
pub struct Resolution {
    pub target: String,
    pub hops: Vec<Hop>,
    /// The end-to-end check over every fetched entry held.
    pub validated: bool,
    pub steps: u64,
}

/// Resolves pathnames by fetching one entry set per component, then
/// re-validates the whole path in one query over the sets fetched.
pub struct Resolver {
    guard: Guard,
}

impl Resolver {
    pub fn new(principal: Principal, store: Arc<dyn CertStore>, clock: Arc<dyn Clock>, config: GuardConfig) -> Self {
        Resolver { guard: Guard::new(principal, SCRIPT, store, clock, config) }
    }

    pub fn guard(&mut self) -> &mut Guard {
        &mut self.guard
    }

    /// `path` is `a/b/c`, relative to the naming root `root`.
    pub fn resolve(&mut self, root: &PrincipalId, path: &str) -> Result<Resolution, AppError> {
        let comps: Vec<&str> = path.split('/').collect();
        if comps.iter().any(|c| c.is_empty() || c.contains(':')) {
            return Err(AppError::BadPath(path.to_string()));
        }
        let mut domain = root.to_string();
        let mut hops = Vec::with_capacity(comps.len());
        let mut steps = 0;
        for (k, comp) in comps.iter().enumerate() {
            let missing = || AppError::MissingName { hop: k, component: comp.to_string() };
            let r = match self.guard.check("nameHop", &[&domain, comp], None) {
                Err(AppError::Script(ScriptError::Assemble(AssembleError::Closure(ClosureError::AllRootsMissing(_))))) => return Err(missing()),
                r => r?,
            };
            steps += r.diagnostics.steps;
            let child = r
                .bindings
                .first()
                .and_then(|b| b.iter().find(|(v, _)| v.name() == "Child"))
                .and_then(|(_, c)| c.as_str().map(str::to_string));
            let Some(child) = child.filter(|_| r.allowed) else {
                return Err(missing());
            };
            let d: PrincipalId = domain.parse().map_err(|_| AppError::BadPath(path.to_string()))?;
            hops.push(Hop { domain: domain.clone(), component: comp.to_string(), entry: token_for(&d, &format!("name/{comp}")), child: child.clone() });
            domain = child;
        }
        let (validated, s) = self.certify(root, &hops)?;
        Ok(Resolution { target: domain, hops, validated, steps: steps + s })
    }

    /// Proves `root: nameEntry(c1, ?X1), ?X1: nameEntry(c2, ?X2), ...` over
    /// the closure of the last entry, which links every entry above it.
    fn certify(&mut self, root: &PrincipalId, hops: &[Hop]) -> Result<(bool, u64), AppError> {
        let Some(last) = hops.last() else { return Ok((false, 0)) };
        let now = self.guard.interpreter().clock().now();
        let ctx = self.guard.interpreter().cache().assemble(&[last.entry], now).map_err(safe_core::slang::ScriptError::from)?;
        let mut query = Vec::with_capacity(hops.len() + 1);
        let mut speaker = Term::Const(Const::str(&root.to_string()));
        for (i, h) in hops.iter().enumerate() {
            let next = Term::var(&format!("X{i}"));
            query.push(Literal::Atom(Atom::new(speaker, "nameEntry", vec![Term::str(&h.component), next.clone()])));
            speaker = next;
        }
        let target = Term::var(&format!("X{}", hops.len() - 1));
        query.push(Literal::Builtin(safe_core::logic::BuiltinCall { name: "eq".into(), args: vec![target, Term::str(&last.child)] }));
        let proof = prove(&ctx.context, &query, &self.guard.interpreter().config().solve).map_err(safe_core::slang::ScriptError::from)?;
        Ok((proof.holds, proof.stats.steps))
    }
}

/// A posted naming tree: one domain principal per directory, one object
/// per leaf.
pub struct Namespace {
    pub root: Principal,
    /// Directory path to its domain principal.
    pub dirs: BTreeMap<String, Principal>,
    /// Leaf path to (object scid, the leaf's entry token).
    pub leaves: BTreeMap<String, (String, Token)>,
}

impl Namespace {
    /// Posts every directory's ACL set (empty) and name entries, parents
    /// first. Principals derive from `seed`.
    pub fn build(strong: &Strong, tree: &NameTree, seed: u64) -> Result<Self, AppError> {
        let mut next = seed.wrapping_mul(7_919);
        let mut fresh = || {
            next = next.wrapping_add(1);
            Principal::from_seed(next)
        };
        let root = fresh();
        strong.set_acl(&root, &[])?;
        let mut ns = Namespace { root, dirs: BTreeMap::new(), leaves: BTreeMap::new() };
        for d in tree.directories() {
            let p = fresh();
            strong.set_acl(&p, &[])?;
            let id = p.id().to_string();
            ns.post_entry(strong, &d, &id)?;
            ns.dirs.insert(d, p);
        }
        for l in &tree.leaves {
            let (parent, _) = split_last(l);
            let obj = match parent {
                Some(dir) => strong.new_object(ns.dirs.get_mut(dir).expect("parents posted first"))?,
                None => strong.new_object(&mut ns.root)?,
            };
            let entry = ns.post_entry(strong, l, &obj)?;
            ns.leaves.insert(l.clone(), (obj, entry));
        }
        Ok(ns)
    }

    fn post_entry(&mut self, strong: &Strong, path: &str, child: &str) -> Result<Token, AppError> {
        let (parent, comp) = split_last(path);
        match parent {
            None => strong.name_entry(&mut self.root, comp, child, None),
            Some(dir) => {
                let up = self.entry_token(dir);
                let domain = self.dirs.get_mut(dir).expect("parents posted first");
                strong.name_entry(domain, comp, child, Some(up))
            }
        }
    }

    /// The domain principal for a directory path; `""` is the root.
    pub fn domain(&self, dir: &str) -> &Principal {
        if dir.is_empty() {
            &self.root
        } else {
            &self.dirs[dir]
        }
    }

    /// Token of the entry that names `path` in its parent's domain.
    pub fn entry_token(&self, path: &str) -> Token {
        let (parent, comp) = split_last(path);
        self.domain(parent.unwrap_or("")).token(&format!("name/{comp}"))
    }
}

fn split_last(path: &str) -> (Option<&str>, &str) {
    match path.rsplit_once('/') {
        Some((p, c)) => (Some(p), c),
        None => (None, path),
    }
}

/// Nested groups `G0 ⊃ G1 ⊃ ... ⊃ Gn` with one member in `Gn`.
pub struct GroupChain {
    pub owners: Vec<Principal>,
    pub groups: Vec<String>,
    pub member: Principal,
    /// The member's credential set for `Gn`.
    pub bearer: Token,
}

impl GroupChain {
    /// Each group has its own owner. Every nesting is linked into the inner
    /// owner's group set, so the member's bearer closure is the chain.
    pub fn build(strong: &Strong, n: usize, seed: u64) -> Result<Self, AppError> {
        let base = seed.wrapping_mul(104_729);
        let mut owners: Vec<Principal> = (0..=n as u64).map(|i| Principal::from_seed(base.wrapping_add(i))).collect();
        let mut groups = Vec::with_capacity(n + 1);
        for o in owners.iter_mut() {
            strong.enroll(o)?;
            groups.push(strong.new_group(o)?);
        }
        for i in 0..n {
            let t = strong.nest_group(&mut owners[i], &groups[i], &groups[i + 1], false)?;
            strong.accept_group(&owners[i + 1], &groups[i + 1], t)?;
        }
        let member = Principal::from_seed(base.wrapping_add(n as u64 + 1));
        strong.enroll(&member)?;
        let t = strong.grant_membership(&mut owners[n], &groups[n], &member.id(), false)?;
        let bearer = strong.accept_group(&member, &groups[n], t)?;
        Ok(GroupChain { owners, groups, member, bearer })
    }
}
