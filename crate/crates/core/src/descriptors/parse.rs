use std::collections::BTreeSet;

use ipnet::Ipv4Net;

use super::model::*;
use super::DescriptorError;
use crate::yaml::{self, as_str, MapReader, Node, SchemaError};

const SCHEMA_VERSION: &str = "1";

/// Parses any descriptor, dispatching on its top-level `kind`.
pub fn parse_descriptor(text: &str) -> Result<Descriptor, DescriptorError> {
    let root = yaml::parse(text)?;
    let mut r = MapReader::new(&root, "")?;
    let kind = r.req_str("kind")?;
    match kind.as_str() {
        "vnfd" => Ok(Descriptor::Vnfd(vnfd_body(r)?)),
        "nsd" => Ok(Descriptor::Nsd(nsd_body(r)?)),
        "nst" => Ok(Descriptor::Nst(nst_body(r)?)),
        other => {
            Err(SchemaError::new("/kind", format!("unknown descriptor kind `{other}`")).into())
        }
    }
}

pub fn parse_vnfd(text: &str) -> Result<VnfDescriptor, DescriptorError> {
    let root = yaml::parse(text)?;
    let r = header(&root, DescriptorKind::Vnfd)?;
    Ok(vnfd_body(r)?)
}

pub fn parse_nsd(text: &str) -> Result<NsDescriptor, DescriptorError> {
    let root = yaml::parse(text)?;
    let r = header(&root, DescriptorKind::Nsd)?;
    Ok(nsd_body(r)?)
}

pub fn parse_nst(text: &str) -> Result<NstDescriptor, DescriptorError> {
    let root = yaml::parse(text)?;
    let r = header(&root, DescriptorKind::Nst)?;
    Ok(nst_body(r)?)
}

fn header(root: &Node, want: DescriptorKind) -> Result<MapReader<'_>, SchemaError> {
    let mut r = MapReader::new(root, "")?;
    let kind = r.req_str("kind")?;
    if kind != want.as_str() {
        return Err(SchemaError::new(
            "/kind",
            format!("expected `{want}`, found `{kind}`"),
        ));
    }
    Ok(r)
}

fn check_version(r: &mut MapReader<'_>) -> Result<(), SchemaError> {
    let v = r.req_str("schema-version")?;
    if v != SCHEMA_VERSION {
        return Err(SchemaError::new(
            "/schema-version",
            format!("unsupported schema version `{v}`"),
        ));
    }
    Ok(())
}

fn unique<'a>(
    names: impl Iterator<Item = (String, &'a str)>,
    what: &str,
) -> Result<(), SchemaError> {
    let mut seen = BTreeSet::new();
    for (path, name) in names {
        if !seen.insert(name) {
            return Err(SchemaError::new(path, format!("duplicate {what} `{name}`")));
        }
    }
    Ok(())
}

fn vnfd_body(mut r: MapReader<'_>) -> Result<VnfDescriptor, SchemaError> {
    check_version(&mut r)?;
    let id = r.req_str("id")?;
    let name = r.req_str("name")?;
    let mgmt_interface = r.req_str("mgmt-interface")?;

    let mut vdus = Vec::new();
    for (path, node) in r.req_seq("vdus")? {
        vdus.push(vdu(node, &path)?);
    }
    if vdus.is_empty() {
        return Err(SchemaError::new("/vdus", "at least one VDU is required"));
    }
    let mut initial_config_primitives = Vec::new();
    for (path, node) in r.opt_seq("initial-config-primitives")? {
        initial_config_primitives.push(primitive(node, &path)?);
    }
    let mut config_primitives = Vec::new();
    for (path, node) in r.opt_seq("config-primitives")? {
        config_primitives.push(primitive(node, &path)?);
    }
    r.finish()?;

    unique(
        vdus.iter()
            .enumerate()
            .map(|(i, v)| (format!("/vdus/{i}/name"), v.name.as_str())),
        "VDU name",
    )?;
    // Interfaces are addressed by (member, interface) from the NSD, so their
    // names must be unique across the whole VNF, not only within one VDU.
    unique(
        vdus.iter().enumerate().flat_map(|(i, v)| {
            v.interfaces
                .iter()
                .enumerate()
                .map(move |(j, f)| (format!("/vdus/{i}/interfaces/{j}/name"), f.name.as_str()))
        }),
        "interface name",
    )?;
    let initial = initial_config_primitives.iter().enumerate().map(|(i, p)| {
        (
            format!("/initial-config-primitives/{i}/name"),
            p.name.as_str(),
        )
    });
    let day2 = config_primitives
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("/config-primitives/{i}/name"), p.name.as_str()));
    // Initial primitives invoke charm actions, so a name may appear in both
    // lists (e.g. start-wg), but not twice in one list.
    unique(initial, "primitive name")?;
    unique(day2, "primitive name")?;

    let d = VnfDescriptor {
        id,
        name,
        vdus,
        mgmt_interface,
        initial_config_primitives,
        config_primitives,
    };
    if d.vdu_for_interface(&d.mgmt_interface).is_none() {
        return Err(SchemaError::new(
            "/mgmt-interface",
            format!("`{}` does not name a declared interface", d.mgmt_interface),
        ));
    }
    Ok(d)
}

fn vdu(node: &Node, path: &str) -> Result<VduSpec, SchemaError> {
    let mut r = MapReader::new(node, path)?;
    let name = r.req_str("name")?;
    let image = r.req_str("image")?;
    let mut cloud_init_packages = Vec::new();
    for (p, n) in r.opt_seq("cloud-init-packages")? {
        cloud_init_packages.push(as_str(n, &p)?.to_string());
    }
    let mut interfaces = Vec::new();
    for (p, n) in r.req_seq("interfaces")? {
        let mut ir = MapReader::new(n, &p)?;
        let iface = InterfaceSpec {
            name: ir.req_str("name")?,
            network: ir.req_str("network")?,
        };
        ir.finish()?;
        interfaces.push(iface);
    }
    let requires_forwarding = r.opt_bool("requires-forwarding")?.unwrap_or(false);
    r.finish()?;
    Ok(VduSpec {
        name,
        image,
        cloud_init_packages,
        interfaces,
        requires_forwarding,
    })
}

fn primitive(node: &Node, path: &str) -> Result<PrimitiveSpec, SchemaError> {
    let mut r = MapReader::new(node, path)?;
    let name = r.req_str("name")?;
    let description = r.opt_str("description")?.unwrap_or_default();
    let mut params = Vec::new();
    for (p, n) in r.opt_seq("params")? {
        let mut pr = MapReader::new(n, &p)?;
        let pname = pr.req_str("name")?;
        let kind: ParamType = pr.req_parse("type", "one of string|int|ipaddr|cidr|endpoint")?;
        let default = pr.opt_str("default")?;
        let optional = pr.opt_bool("optional")?.unwrap_or(false);
        pr.finish()?;
        params.push(ParamSpec {
            name: pname,
            kind,
            default,
            optional,
        });
    }
    r.finish()?;
    unique(
        params
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("{path}/params/{i}/name"), p.name.as_str())),
        "parameter name",
    )?;
    Ok(PrimitiveSpec {
        name,
        params,
        description,
    })
}

fn member_index(r: &mut MapReader<'_>) -> Result<MemberIndex, SchemaError> {
    r.req_parse("member-index", "non-negative integer")
}

fn nsd_body(mut r: MapReader<'_>) -> Result<NsDescriptor, SchemaError> {
    check_version(&mut r)?;
    let id = r.req_str("id")?;
    let name = r.req_str("name")?;

    let mut vnf_members = Vec::new();
    for (p, n) in r.req_seq("vnf-members")? {
        let mut mr = MapReader::new(n, &p)?;
        let index = member_index(&mut mr)?;
        let vnfd_id = mr.req_str("vnfd-id")?;
        mr.finish()?;
        if vnf_members.iter().any(|m: &VnfMember| m.index == index) {
            return Err(SchemaError::new(
                format!("{p}/member-index"),
                format!("duplicate member index {index}"),
            ));
        }
        vnf_members.push(VnfMember { index, vnfd_id });
    }
    let declared = |idx: MemberIndex| vnf_members.iter().any(|m| m.index == idx);

    let mut virtual_links = Vec::new();
    for (p, n) in r.opt_seq("virtual-links")? {
        let mut vr = MapReader::new(n, &p)?;
        let vl_name = vr.req_str("name")?;
        let cidr_path = vr.key_path("cidr");
        let cidr = parse_cidr(&vr.req_str("cidr")?, &cidr_path)?;
        let mut attachments = Vec::new();
        for (ap, an) in vr.opt_seq("attachments")? {
            let mut ar = MapReader::new(an, &ap)?;
            let member = member_index(&mut ar)?;
            let interface = ar.req_str("interface")?;
            ar.finish()?;
            if !declared(member) {
                return Err(SchemaError::new(
                    format!("{ap}/member-index"),
                    format!("undeclared member index {member}"),
                ));
            }
            attachments.push(Attachment { member, interface });
        }
        vr.finish()?;
        virtual_links.push(VirtualLinkSpec {
            name: vl_name,
            cidr,
            attachments,
        });
    }

    let mut connection_points = Vec::new();
    for (p, n) in r.opt_seq("connection-points")? {
        let mut cr = MapReader::new(n, &p)?;
        let cp_name = cr.req_str("name")?;
        let member = member_index(&mut cr)?;
        let interface = cr.req_str("interface")?;
        cr.finish()?;
        if !declared(member) {
            return Err(SchemaError::new(
                format!("{p}/member-index"),
                format!("undeclared member index {member}"),
            ));
        }
        connection_points.push(ConnectionPoint {
            name: cp_name,
            member,
            interface,
        });
    }
    r.finish()?;

    unique(
        virtual_links
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("/virtual-links/{i}/name"), v.name.as_str())),
        "virtual link name",
    )?;
    unique(
        connection_points
            .iter()
            .enumerate()
            .map(|(i, c)| (format!("/connection-points/{i}/name"), c.name.as_str())),
        "connection point name",
    )?;
    Ok(NsDescriptor {
        id,
        name,
        vnf_members,
        virtual_links,
        connection_points,
    })
}

fn parse_cidr(s: &str, path: &str) -> Result<Ipv4Net, SchemaError> {
    let net: Ipv4Net = s
        .parse()
        .map_err(|_| SchemaError::new(path, format!("invalid IPv4 prefix `{s}`")))?;
    if net.trunc() != net {
        return Err(SchemaError::new(path, format!("`{s}` has host bits set")));
    }
    Ok(net)
}

fn nst_body(mut r: MapReader<'_>) -> Result<NstDescriptor, SchemaError> {
    check_version(&mut r)?;
    let id = r.req_str("id")?;
    let name = r.req_str("name")?;
    let mut ns_members = Vec::new();
    for (p, n) in r.req_seq("ns-members")? {
        let nsd = as_str(n, &p)?.to_string();
        if ns_members.contains(&nsd) {
            return Err(SchemaError::new(p, format!("duplicate ns member `{nsd}`")));
        }
        ns_members.push(nsd);
    }
    if ns_members.is_empty() {
        return Err(SchemaError::new(
            "/ns-members",
            "a slice needs at least one member",
        ));
    }
    let mut slice_links = Vec::new();
    for (p, n) in r.opt_seq("slice-links")? {
        let mut lr = MapReader::new(n, &p)?;
        let link_name = lr.req_str("name")?;
        let mut endpoints = Vec::new();
        for (ep, en) in lr.req_seq("endpoints")? {
            let mut er = MapReader::new(en, &ep)?;
            let nsd_id = er.req_str("nsd-id")?;
            let connection_point = er.req_str("connection-point")?;
            er.finish()?;
            if !ns_members.contains(&nsd_id) {
                return Err(SchemaError::new(
                    format!("{ep}/nsd-id"),
                    format!("`{nsd_id}` is not a slice member"),
                ));
            }
            endpoints.push(SliceEndpoint {
                nsd_id,
                connection_point,
            });
        }
        lr.finish()?;
        if endpoints.is_empty() {
            return Err(SchemaError::new(
                format!("{p}/endpoints"),
                "a slice link needs at least one endpoint",
            ));
        }
        slice_links.push(SliceLink {
            name: link_name,
            endpoints,
        });
    }
    r.finish()?;
    unique(
        slice_links
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("/slice-links/{i}/name"), l.name.as_str())),
        "slice link name",
    )?;
    Ok(NstDescriptor {
        id,
        name,
        ns_members,
        slice_links,
    })
}

// Serialization. Field order is fixed so serialized output is canonical.

fn s(v: impl ToString) -> Node {
    Node::scalar(v.to_string())
}

fn head(kind: DescriptorKind, id: &str, name: &str) -> Vec<(&'static str, Node)> {
    vec![
        ("kind", s(kind)),
        ("schema-version", s(SCHEMA_VERSION)),
        ("id", s(id)),
        ("name", s(name)),
    ]
}

fn primitive_node(p: &PrimitiveSpec) -> Node {
    let mut e = vec![("name", s(&p.name))];
    if !p.description.is_empty() {
        e.push(("description", s(&p.description)));
    }
    if !p.params.is_empty() {
        let params = p
            .params
            .iter()
            .map(|q| {
                let mut pe = vec![("name", s(&q.name)), ("type", s(q.kind))];
                if let Some(d) = &q.default {
                    pe.push(("default", s(d)));
                }
                if q.optional {
                    pe.push(("optional", s("true")));
                }
                Node::map(pe)
            })
            .collect();
        e.push(("params", Node::seq(params)));
    }
    Node::map(e)
}

pub fn vnfd_to_yaml(d: &VnfDescriptor) -> String {
    let mut e = head(DescriptorKind::Vnfd, &d.id, &d.name);
    e.push(("mgmt-interface", s(&d.mgmt_interface)));
    let vdus = d
        .vdus
        .iter()
        .map(|v| {
            Node::map(vec![
                ("name", s(&v.name)),
                ("image", s(&v.image)),
                (
                    "cloud-init-packages",
                    Node::seq(v.cloud_init_packages.iter().map(s).collect()),
                ),
                ("requires-forwarding", s(v.requires_forwarding)),
                (
                    "interfaces",
                    Node::seq(
                        v.interfaces
                            .iter()
                            .map(|i| {
                                Node::map(vec![("name", s(&i.name)), ("network", s(&i.network))])
                            })
                            .collect(),
                    ),
                ),
            ])
        })
        .collect();
    e.push(("vdus", Node::seq(vdus)));
    e.push((
        "initial-config-primitives",
        Node::seq(
            d.initial_config_primitives
                .iter()
                .map(primitive_node)
                .collect(),
        ),
    ));
    e.push((
        "config-primitives",
        Node::seq(d.config_primitives.iter().map(primitive_node).collect()),
    ));
    yaml::emit(&Node::map(e))
}

pub fn nsd_to_yaml(d: &NsDescriptor) -> String {
    let mut e = head(DescriptorKind::Nsd, &d.id, &d.name);
    e.push((
        "vnf-members",
        Node::seq(
            d.vnf_members
                .iter()
                .map(|m| {
                    Node::map(vec![
                        ("member-index", s(m.index)),
                        ("vnfd-id", s(&m.vnfd_id)),
                    ])
                })
                .collect(),
        ),
    ));
    e.push((
        "virtual-links",
        Node::seq(
            d.virtual_links
                .iter()
                .map(|vl| {
                    Node::map(vec![
                        ("name", s(&vl.name)),
                        ("cidr", s(vl.cidr)),
                        (
                            "attachments",
                            Node::seq(
                                vl.attachments
                                    .iter()
                                    .map(|a| {
                                        Node::map(vec![
                                            ("member-index", s(a.member)),
                                            ("interface", s(&a.interface)),
                                        ])
                                    })
                                    .collect(),
                            ),
                        ),
                    ])
                })
                .collect(),
        ),
    ));
    e.push((
        "connection-points",
        Node::seq(
            d.connection_points
                .iter()
                .map(|c| {
                    Node::map(vec![
                        ("name", s(&c.name)),
                        ("member-index", s(c.member)),
                        ("interface", s(&c.interface)),
                    ])
                })
                .collect(),
        ),
    ));
    yaml::emit(&Node::map(e))
}

pub fn nst_to_yaml(d: &NstDescriptor) -> String {
    let mut e = head(DescriptorKind::Nst, &d.id, &d.name);
    e.push((
        "ns-members",
        Node::seq(d.ns_members.iter().map(s).collect()),
    ));
    e.push((
        "slice-links",
        Node::seq(
            d.slice_links
                .iter()
                .map(|l| {
                    Node::map(vec![
                        ("name", s(&l.name)),
                        (
                            "endpoints",
                            Node::seq(
                                l.endpoints
                                    .iter()
                                    .map(|ep| {
                                        Node::map(vec![
                                            ("nsd-id", s(&ep.nsd_id)),
                                            ("connection-point", s(&ep.connection_point)),
                                        ])
                                    })
                                    .collect(),
                            ),
                        ),
                    ])
                })
                .collect(),
        ),
    ));
    yaml::emit(&Node::map(e))
}

pub fn to_yaml(d: &Descriptor) -> String {
    match d {
        Descriptor::Vnfd(v) => vnfd_to_yaml(v),
        Descriptor::Nsd(n) => nsd_to_yaml(n),
        Descriptor::Nst(t) => nst_to_yaml(t),
    }
}
