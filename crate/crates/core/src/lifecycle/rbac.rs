use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::yaml::{self, MapReader, SchemaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Admin,
    Tenant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub name: String,
    pub role: Role,
    /// Instance ids a tenant may act on. Ignored for admins.
    #[serde(default)]
    pub permitted: BTreeSet<String>,
}

impl Actor {
    pub fn admin(name: impl Into<String>) -> Self {
        Actor {
            name: name.into(),
            role: Role::Admin,
            permitted: BTreeSet::new(),
        }
    }

    pub fn tenant<I: IntoIterator<Item = S>, S: Into<String>>(
        name: impl Into<String>,
        permitted: I,
    ) -> Self {
        Actor {
            name: name.into(),
            role: Role::Tenant,
            permitted: permitted.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ActorsError {
    #[error(transparent)]
    Syntax(#[from] yaml::SyntaxError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Reads an actors file:
///
/// ```yaml
/// actors:
///   - {name: alice, role: admin}
///   - {name: tenant1, role: tenant, instances: [ns-1]}
/// ```
pub fn actors_from_yaml(text: &str) -> Result<Vec<Actor>, ActorsError> {
    let root = yaml::parse(text)?;
    let mut r = MapReader::new(&root, "")?;
    let mut out = Vec::new();
    for (path, item) in r.opt_seq("actors")? {
        let mut m = MapReader::new(item, &path)?;
        let name = m.req_str("name")?;
        let role_path = m.key_path("role");
        let role = match m.req_str("role")?.as_str() {
            "admin" => Role::Admin,
            "tenant" => Role::Tenant,
            other => {
                return Err(SchemaError::new(role_path, format!("unknown role `{other}`")).into())
            }
        };
        let mut permitted = BTreeSet::new();
        for (ipath, i) in m.opt_seq("instances")? {
            permitted.insert(yaml::as_str(i, &ipath)?.to_string());
        }
        m.finish()?;
        out.push(Actor {
            name,
            role,
            permitted,
        });
    }
    r.finish()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Onboard,
    NsCreate,
    NsAction,
    NsShow,
    NsDelete,
    SliceCreate,
    Kpi,
    Bench,
}

impl Operation {
    pub const ALL: [Operation; 8] = [
        Operation::Onboard,
        Operation::NsCreate,
        Operation::NsAction,
        Operation::NsShow,
        Operation::NsDelete,
        Operation::SliceCreate,
        Operation::Kpi,
        Operation::Bench,
    ];
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operation::Onboard => "onboard",
            Operation::NsCreate => "ns-create",
            Operation::NsAction => "ns-action",
            Operation::NsShow => "ns-show",
            Operation::NsDelete => "ns-delete",
            Operation::SliceCreate => "slice-create",
            Operation::Kpi => "kpi",
            Operation::Bench => "bench",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allow,
    Deny,
}

/// Admins may do everything. Tenants may only run Day-2 actions on, and
/// inspect, the instances they were granted.
pub fn authorize(actor: &Actor, op: Operation, instance: Option<&str>) -> Decision {
    let ok = match actor.role {
        Role::Admin => true,
        Role::Tenant => {
            matches!(op, Operation::NsAction | Operation::NsShow)
                && instance.is_some_and(|i| actor.permitted.contains(i))
        }
    };
    if ok {
        Decision::Allow
    } else {
        Decision::Deny
    }
}
