use std::fmt;
use std::str::FromStr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnfDescriptor {
    pub id: String,
    pub name: String,
    pub vdus: Vec<VduSpec>,
    pub mgmt_interface: String,
    pub initial_config_primitives: Vec<PrimitiveSpec>,
    pub config_primitives: Vec<PrimitiveSpec>,
}

impl VnfDescriptor {
    pub fn vdu_for_interface(&self, iface: &str) -> Option<&VduSpec> {
        self.vdus
            .iter()
            .find(|v| v.interfaces.iter().any(|i| i.name == iface))
    }

    pub fn interfaces(&self) -> impl Iterator<Item = (&VduSpec, &InterfaceSpec)> {
        self.vdus
            .iter()
            .flat_map(|v| v.interfaces.iter().map(move |i| (v, i)))
    }

    pub fn initial_primitive(&self, name: &str) -> Option<&PrimitiveSpec> {
        self.initial_config_primitives
            .iter()
            .find(|p| p.name == name)
    }

    pub fn day2_primitive(&self, name: &str) -> Option<&PrimitiveSpec> {
        self.config_primitives.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VduSpec {
    pub name: String,
    pub image: String,
    pub cloud_init_packages: Vec<String>,
    pub interfaces: Vec<InterfaceSpec>,
    pub requires_forwarding: bool,
}

/// A VDU network interface. `network` is the virtual-link name the interface
/// is expected to join; the NSD attachment is authoritative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub name: String,
    pub network: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub description: String,
}

impl PrimitiveSpec {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// A primitive parameter. `default` may contain `<member-index>`,
/// `<mgmt-ip>` and `<ns-id>` placeholders, substituted at execution time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamType,
    pub default: Option<String>,
    pub optional: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    String,
    Int,
    IpAddr,
    /// One or more comma-separated IPv4 prefixes.
    Cidr,
    Endpoint,
}

impl ParamType {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::String => "string",
            ParamType::Int => "int",
            ParamType::IpAddr => "ipaddr",
            ParamType::Cidr => "cidr",
            ParamType::Endpoint => "endpoint",
        }
    }
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamType {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "string" => ParamType::String,
            "int" => ParamType::Int,
            "ipaddr" => ParamType::IpAddr,
            "cidr" => ParamType::Cidr,
            "endpoint" => ParamType::Endpoint,
            _ => return Err(()),
        })
    }
}

pub type MemberIndex = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NsDescriptor {
    pub id: String,
    pub name: String,
    pub vnf_members: Vec<VnfMember>,
    pub virtual_links: Vec<VirtualLinkSpec>,
    pub connection_points: Vec<ConnectionPoint>,
}

impl NsDescriptor {
    pub fn member(&self, index: MemberIndex) -> Option<&VnfMember> {
        self.vnf_members.iter().find(|m| m.index == index)
    }

    pub fn link_for(&self, member: MemberIndex, iface: &str) -> Option<&VirtualLinkSpec> {
        self.virtual_links.iter().find(|vl| {
            vl.attachments
                .iter()
                .any(|a| a.member == member && a.interface == iface)
        })
    }

    pub fn connection_point(&self, name: &str) -> Option<&ConnectionPoint> {
        self.connection_points.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnfMember {
    pub index: MemberIndex,
    pub vnfd_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualLinkSpec {
    pub name: String,
    pub cidr: Ipv4Net,
    pub attachments: Vec<Attachment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub member: MemberIndex,
    pub interface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionPoint {
    pub name: String,
    pub member: MemberIndex,
    pub interface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NstDescriptor {
    pub id: String,
    pub name: String,
    pub ns_members: Vec<String>,
    pub slice_links: Vec<SliceLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceLink {
    pub name: String,
    pub endpoints: Vec<SliceEndpoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceEndpoint {
    pub nsd_id: String,
    pub connection_point: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Vnfd,
    Nsd,
    Nst,
}

impl DescriptorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DescriptorKind::Vnfd => "vnfd",
            DescriptorKind::Nsd => "nsd",
            DescriptorKind::Nst => "nst",
        }
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Descriptor {
    Vnfd(VnfDescriptor),
    Nsd(NsDescriptor),
    Nst(NstDescriptor),
}

impl Descriptor {
    pub fn id(&self) -> &str {
        match self {
            Descriptor::Vnfd(d) => &d.id,
            Descriptor::Nsd(d) => &d.id,
            Descriptor::Nst(d) => &d.id,
        }
    }

    pub fn kind(&self) -> DescriptorKind {
        match self {
            Descriptor::Vnfd(_) => DescriptorKind::Vnfd,
            Descriptor::Nsd(_) => DescriptorKind::Nsd,
            Descriptor::Nst(_) => DescriptorKind::Nst,
        }
    }
}

impl From<VnfDescriptor> for Descriptor {
    fn from(d: VnfDescriptor) -> Self {
        Descriptor::Vnfd(d)
    }
}

impl From<NsDescriptor> for Descriptor {
    fn from(d: NsDescriptor) -> Self {
        Descriptor::Nsd(d)
    }
}

impl From<NstDescriptor> for Descriptor {
    fn from(d: NstDescriptor) -> Self {
        Descriptor::Nst(d)
    }
}
