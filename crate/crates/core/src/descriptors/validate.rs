use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::model::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    /// `<kind>:<id>` followed by a field path.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.severity, self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn from_issues(issues: Vec<Issue>) -> Self {
        let ok = !issues.iter().any(|i| i.severity == Severity::Error);
        ValidationReport { ok, issues }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "valid: {}", self.ok)?;
        for i in &self.issues {
            writeln!(f, "{i}")?;
        }
        Ok(())
    }
}

struct Collector(Vec<Issue>);

impl Collector {
    fn error(&mut self, path: String, message: impl Into<String>) {
        self.0.push(Issue {
            severity: Severity::Error,
            path,
            message: message.into(),
        });
    }
}

/// Checks cross-references and id uniqueness over a set of descriptors.
///
/// Per-descriptor structure is already enforced by the parsers; this pass
/// covers what a single document cannot know: NSD→VNFD and NST→NSD
/// references, interface existence, attachment coverage, and the exposure
/// of connection points used by slice links.
pub fn validate_catalog(descriptors: &[Descriptor]) -> ValidationReport {
    let mut c = Collector(Vec::new());
    let mut vnfds: BTreeMap<&str, &VnfDescriptor> = BTreeMap::new();
    let mut nsds: BTreeMap<&str, &NsDescriptor> = BTreeMap::new();
    let mut seen: BTreeSet<(DescriptorKind, &str)> = BTreeSet::new();

    for d in descriptors {
        if !seen.insert((d.kind(), d.id())) {
            c.error(format!("{}:{}", d.kind(), d.id()), "duplicate id");
            continue;
        }
        match d {
            Descriptor::Vnfd(v) => {
                vnfds.insert(&v.id, v);
            }
            Descriptor::Nsd(n) => {
                nsds.insert(&n.id, n);
            }
            Descriptor::Nst(_) => {}
        }
    }

    for d in descriptors {
        match d {
            Descriptor::Vnfd(_) => {}
            Descriptor::Nsd(n) => check_nsd(&mut c, n, &vnfds),
            Descriptor::Nst(t) => check_nst(&mut c, t, &nsds, &vnfds),
        }
    }
    ValidationReport::from_issues(c.0)
}

fn check_nsd(c: &mut Collector, n: &NsDescriptor, vnfds: &BTreeMap<&str, &VnfDescriptor>) {
    let base = format!("nsd:{}", n.id);
    let mut resolved: BTreeMap<MemberIndex, &VnfDescriptor> = BTreeMap::new();
    for (i, m) in n.vnf_members.iter().enumerate() {
        match vnfds.get(m.vnfd_id.as_str()) {
            Some(v) => {
                resolved.insert(m.index, v);
            }
            None => c.error(
                format!("{base}/vnf-members/{i}/vnfd-id"),
                format!("unresolved vnfd ref `{}`", m.vnfd_id),
            ),
        }
    }

    let mut attached: BTreeMap<(MemberIndex, &str), &str> = BTreeMap::new();
    for (i, vl) in n.virtual_links.iter().enumerate() {
        for (j, a) in vl.attachments.iter().enumerate() {
            let path = format!("{base}/virtual-links/{i}/attachments/{j}");
            let Some(vnfd) = resolved.get(&a.member) else {
                continue;
            };
            match vnfd.interfaces().find(|(_, f)| f.name == a.interface) {
                None => c.error(
                    path,
                    format!("unknown interface `{}` on member {}", a.interface, a.member),
                ),
                Some(_) => {
                    if let Some(prev) = attached.insert((a.member, &a.interface), &vl.name) {
                        c.error(
                            path,
                            format!(
                                "interface `{}` of member {} already attached to `{prev}`",
                                a.interface, a.member
                            ),
                        );
                    }
                }
            }
        }
    }

    for (member, vnfd) in &resolved {
        for (_, f) in vnfd.interfaces() {
            if !attached.contains_key(&(*member, f.name.as_str())) {
                c.error(
                    format!("{base}/virtual-links"),
                    format!("unattached interface `{}` on member {member}", f.name),
                );
            }
        }
    }

    for (i, cp) in n.connection_points.iter().enumerate() {
        let path = format!("{base}/connection-points/{i}");
        if resolved.contains_key(&cp.member) && n.link_for(cp.member, &cp.interface).is_none() {
            c.error(
                path,
                format!(
                    "connection point `{}` exposes interface `{}` of member {} which is not on any virtual link",
                    cp.name, cp.interface, cp.member
                ),
            );
        }
    }
}

fn check_nst(
    c: &mut Collector,
    t: &NstDescriptor,
    nsds: &BTreeMap<&str, &NsDescriptor>,
    vnfds: &BTreeMap<&str, &VnfDescriptor>,
) {
    let base = format!("nst:{}", t.id);
    for (i, m) in t.ns_members.iter().enumerate() {
        if !nsds.contains_key(m.as_str()) {
            c.error(
                format!("{base}/ns-members/{i}"),
                format!("unresolved nsd ref `{m}`"),
            );
        }
    }
    let mut used: BTreeSet<(&str, &str)> = BTreeSet::new();
    for (i, link) in t.slice_links.iter().enumerate() {
        let mut cidr = None;
        for (j, ep) in link.endpoints.iter().enumerate() {
            let path = format!("{base}/slice-links/{i}/endpoints/{j}");
            let Some(nsd) = nsds.get(ep.nsd_id.as_str()) else {
                continue;
            };
            let Some(cp) = nsd.connection_point(&ep.connection_point) else {
                c.error(
                    path,
                    format!(
                        "unexposed connection point `{}` on nsd `{}`",
                        ep.connection_point, ep.nsd_id
                    ),
                );
                continue;
            };
            if !used.insert((&ep.nsd_id, &ep.connection_point)) {
                c.error(
                    path,
                    format!(
                        "connection point `{}` used by more than one slice link",
                        cp.name
                    ),
                );
                continue;
            }
            // Only meaningful once the member NSD itself resolves.
            let member_ok = nsd
                .member(cp.member)
                .is_some_and(|m| vnfds.contains_key(m.vnfd_id.as_str()));
            if let (true, Some(vl)) = (member_ok, nsd.link_for(cp.member, &cp.interface)) {
                match cidr {
                    None => cidr = Some(vl.cidr),
                    Some(first) if first != vl.cidr => c.error(
                        path,
                        format!(
                            "cidr mismatch: `{}` joins {} but link uses {first}",
                            cp.name, vl.cidr
                        ),
                    ),
                    Some(_) => {}
                }
            }
        }
    }
}
