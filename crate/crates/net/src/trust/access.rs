//! Key-locator roles and the access-control decision table.

use std::fmt;

use geoicn_core::Name;

use super::TrustError;

pub const CERT: &str = "CERT";
const GPS_ID: &[u8] = b"GPS-ID";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Permission {
    Read,
    ReadWrite,
}

impl Permission {
    pub fn as_str(self) -> &'static str {
        match self {
            Permission::Read => "r",
            Permission::ReadWrite => "rw",
        }
    }

    pub fn parse(s: &str) -> Option<Permission> {
        match s {
            "r" => Some(Permission::Read),
            "rw" => Some(Permission::ReadWrite),
            _ => None,
        }
    }
}

/// Data-set id: an OGB tenant and collection, rendered `tid:cid`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Did {
    pub tid: String,
    pub cid: String,
}

impl Did {
    pub fn new(tid: impl Into<String>, cid: impl Into<String>) -> Did {
        Did { tid: tid.into(), cid: cid.into() }
    }

    pub fn parse(s: &str) -> Option<Did> {
        let (tid, cid) = s.split_once(':')?;
        (!tid.is_empty() && !cid.is_empty() && !cid.contains(':')).then(|| Did::new(tid, cid))
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tid, self.cid)
    }
}

/// What a certificate name says about its holder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Role {
    /// `/CERT/ANCHOR`: the system administrator.
    Anchor,
    /// `/CERT/TENANT/{tid}`.
    Tenant(String),
    /// `/CERT/NODE/{id}`: engines and service nodes.
    Node(String),
    /// `/CERT/{tid:cid}/{uid}/{r|rw}`.
    User { did: Did, uid: String, perm: Permission },
}

impl Role {
    pub fn name(&self) -> Name {
        let n = Name::new().child(CERT);
        match self {
            Role::Anchor => n.child("ANCHOR"),
            Role::Tenant(t) => n.child("TENANT").child(t),
            Role::Node(id) => n.child("NODE").child(id),
            Role::User { did, uid, perm } => n.child(did.to_string()).child(uid).child(perm.as_str()),
        }
    }

    pub fn parse(name: &Name) -> Result<Role, TrustError> {
        let bad = || TrustError::BadKeyLocator(name.clone());
        let c: Vec<&str> = (0..name.len()).map(|i| name.get_str(i).ok_or_else(bad)).collect::<Result<_, _>>()?;
        match c.as_slice() {
            [CERT, "ANCHOR"] => Ok(Role::Anchor),
            [CERT, "TENANT", t] if !t.is_empty() => Ok(Role::Tenant(t.to_string())),
            [CERT, "NODE", id] if !id.is_empty() => Ok(Role::Node(id.to_string())),
            [CERT, did, uid, perm] => Ok(Role::User {
                did: Did::parse(did).ok_or_else(bad)?,
                uid: uid.to_string(),
                perm: Permission::parse(perm).ok_or_else(bad)?,
            }),
            _ => Err(bad()),
        }
    }

    /// Role that must have issued a certificate of this role.
    pub fn expected_issuer(&self) -> Role {
        match self {
            Role::Anchor | Role::Tenant(_) | Role::Node(_) => Role::Anchor,
            Role::User { did, .. } => Role::Tenant(did.tid.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Insert,
    Query,
    Delete,
}

/// The data-set and (for object names) owner addressed by a target name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub did: Did,
    pub uid: Option<String>,
}

/// Parses an object name (`.../GPS-ID/DATA/tid/cid/uid/oid`), tile-query name
/// (`.../GPS-ID/TILE/tid/cid[/...]`) or delete name (object name + `/DELETE`),
/// according to the operation.
pub fn parse_target(op: Operation, name: &Name) -> Result<Target, TrustError> {
    let bad = || TrustError::BadTarget(name.clone());
    let g = name.components().position(|c| c == GPS_ID).ok_or_else(bad)?;
    let s = |i: usize| name.get_str(g + i).filter(|s| !s.is_empty()).ok_or_else(bad);
    let did = || -> Result<Did, TrustError> { Ok(Did::new(s(2)?, s(3)?)) };
    match op {
        Operation::Query => {
            if s(1)? != "TILE" {
                return Err(bad());
            }
            Ok(Target { did: did()?, uid: None })
        }
        Operation::Insert | Operation::Delete => {
            if s(1)? != "DATA" {
                return Err(bad());
            }
            let uid = s(4)?.to_string();
            s(5)?;
            let tail = name.len() - (g + 6);
            let ok = match op {
                Operation::Insert => tail == 0,
                _ => tail >= 1 && s(6)? == "DELETE",
            };
            if !ok {
                return Err(bad());
            }
            Ok(Target { did: did()?, uid: Some(uid) })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessDecision {
    pub op: Operation,
    pub allow: bool,
    pub reason: &'static str,
}

/// The decision table as a pure function of its inputs.
pub fn decide(op: Operation, target: &Target, did: &Did, uid: &str, perm: Permission) -> AccessDecision {
    let deny = |reason| AccessDecision { op, allow: false, reason };
    if &target.did != did {
        return deny("data-set mismatch");
    }
    match op {
        Operation::Query => AccessDecision { op, allow: true, reason: "read granted" },
        Operation::Insert | Operation::Delete => {
            if target.uid.as_deref() != Some(uid) {
                deny("owner mismatch")
            } else if perm != Permission::ReadWrite {
                deny("write permission required")
            } else {
                AccessDecision { op, allow: true, reason: "write granted" }
            }
        }
    }
}

/// Access decision for a signer named `kl` acting on `target`.
pub fn check_access(op: Operation, target: &Name, kl: &Name) -> Result<AccessDecision, TrustError> {
    let t = parse_target(op, target)?;
    match Role::parse(kl)? {
        Role::User { did, uid, perm } => Ok(decide(op, &t, &did, &uid, perm)),
        _ => Ok(AccessDecision { op, allow: false, reason: "not a user key" }),
    }
}

/// Whether an object name is signed by its owner with write permission.
pub fn check_provenance(object: &Name, kl: &Name) -> bool {
    check_access(Operation::Insert, object, kl).is_ok_and(|d| d.allow)
}
