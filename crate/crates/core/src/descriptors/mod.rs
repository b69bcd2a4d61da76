//! VNF, network-service, and network-slice descriptors.
//!
//! Descriptors are YAML documents with a top-level `kind: vnfd | nsd | nst`
//! and `schema-version: 1`. Parsing is strict: unknown keys, missing
//! required fields, and dangling intra-document references are schema
//! errors. Cross-document references are checked by [`validate_catalog`].

mod model;
mod parse;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::*;
pub use parse::{
    nsd_to_yaml, nst_to_yaml, parse_descriptor, parse_nsd, parse_nst, parse_vnfd, to_yaml,
    vnfd_to_yaml,
};
pub use validate::{validate_catalog, Issue, Severity, ValidationReport};

use crate::yaml::{SchemaError, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptorError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl DescriptorError {
    /// The schema path, when this is a schema error.
    pub fn path(&self) -> Option<&str> {
        match self {
            DescriptorError::Schema(s) => Some(&s.path),
            DescriptorError::Syntax(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("duplicate id: {kind} `{id}` is already onboarded with different content")]
    DuplicateId { kind: DescriptorKind, id: String },
}

/// Onboarded descriptors keyed by kind and id. Entries are immutable once
/// inserted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    entries: BTreeMap<String, Descriptor>,
}

fn key(kind: DescriptorKind, id: &str) -> String {
    format!("{kind}:{id}")
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a descriptor. Re-inserting identical content is a no-op.
    pub fn insert(&mut self, d: Descriptor) -> Result<(), CatalogError> {
        let k = key(d.kind(), d.id());
        match self.entries.get(&k) {
            Some(existing) if *existing == d => Ok(()),
            Some(_) => Err(CatalogError::DuplicateId {
                kind: d.kind(),
                id: d.id().to_string(),
            }),
            None => {
                self.entries.insert(k, d);
                Ok(())
            }
        }
    }

    pub fn get(&self, kind: DescriptorKind, id: &str) -> Option<&Descriptor> {
        self.entries.get(&key(kind, id))
    }

    pub fn vnfd(&self, id: &str) -> Option<&VnfDescriptor> {
        match self.get(DescriptorKind::Vnfd, id) {
            Some(Descriptor::Vnfd(v)) => Some(v),
            _ => None,
        }
    }

    pub fn nsd(&self, id: &str) -> Option<&NsDescriptor> {
        match self.get(DescriptorKind::Nsd, id) {
            Some(Descriptor::Nsd(n)) => Some(n),
            _ => None,
        }
    }

    pub fn nst(&self, id: &str) -> Option<&NstDescriptor> {
        match self.get(DescriptorKind::Nst, id) {
            Some(Descriptor::Nst(t)) => Some(t),
            _ => None,
        }
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &Descriptor> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> ValidationReport {
        let all: Vec<Descriptor> = self.entries.values().cloned().collect();
        validate_catalog(&all)
    }

    /// Validation restricted to one descriptor and everything it references.
    /// Missing referenced descriptors surface as unresolved-ref errors.
    pub fn validate_closure(&self, kind: DescriptorKind, id: &str) -> ValidationReport {
        let mut set: Vec<Descriptor> = Vec::new();
        let push_nsd = |set: &mut Vec<Descriptor>, nsd: &NsDescriptor| {
            for m in &nsd.vnf_members {
                if let Some(v) = self.vnfd(&m.vnfd_id) {
                    let d = Descriptor::Vnfd(v.clone());
                    if !set.contains(&d) {
                        set.push(d);
                    }
                }
            }
            set.push(Descriptor::Nsd(nsd.clone()));
        };
        match self.get(kind, id) {
            None => {}
            Some(Descriptor::Vnfd(v)) => set.push(Descriptor::Vnfd(v.clone())),
            Some(Descriptor::Nsd(n)) => push_nsd(&mut set, n),
            Some(Descriptor::Nst(t)) => {
                for m in &t.ns_members {
                    if let Some(n) = self.nsd(m) {
                        push_nsd(&mut set, n);
                    }
                }
                set.push(Descriptor::Nst(t.clone()));
            }
        }
        validate_catalog(&set)
    }
}

#[cfg(test)]
mod tests;
