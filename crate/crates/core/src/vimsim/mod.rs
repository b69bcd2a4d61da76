//! Simulated virtualized infrastructure manager.
//!
//! Networks hand out the lowest free host address; VDU boots charge
//! `base_boot + Σ non-preinstalled package installs` to the simulated clock.

mod profile;

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{serde_clock, SimClock, SimDuration, SimTime};
use crate::descriptors::VduSpec;

pub use profile::{ProfileError, TimingProfile};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VimError {
    #[error("network `{0}` already exists")]
    DuplicateNetwork(String),
    #[error("invalid cidr `{0}`: {1}")]
    InvalidCidr(String, &'static str),
    #[error("unknown network `{0}`")]
    UnknownNetwork(String),
    #[error("network `{0}` has no free addresses")]
    NetworkExhausted(String),
    #[error("network `{0}` still has attached interfaces")]
    NetworkInUse(String),
    #[error("unknown package `{0}` (no install duration in the timing profile)")]
    UnknownPackage(String),
    #[error("interface `{iface}` of VDU `{vdu}` is not attached to any network")]
    UnattachedInterface { vdu: String, iface: String },
    #[error("VDU `{0}` already exists")]
    DuplicateVdu(String),
    #[error("unknown VDU `{0}`")]
    UnknownVdu(String),
    #[error("VDU `{0}` is already terminated")]
    AlreadyTerminated(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualNetwork {
    pub name: String,
    pub cidr: Ipv4Net,
    /// `vdu-id/interface` → address.
    pub allocations: BTreeMap<String, Ipv4Addr>,
}

impl VirtualNetwork {
    fn host_range(&self) -> (u32, u32) {
        let net = u32::from(self.cidr.network());
        let bcast = u32::from(self.cidr.broadcast());
        (net + 1, bcast - 1)
    }

    fn free_count(&self) -> u64 {
        let (lo, hi) = self.host_range();
        (hi - lo + 1) as u64 - self.allocations.len() as u64
    }

    fn lowest_free(&self) -> Option<Ipv4Addr> {
        let used: BTreeSet<u32> = self.allocations.values().map(|a| u32::from(*a)).collect();
        let (lo, hi) = self.host_range();
        (lo..=hi).find(|a| !used.contains(a)).map(Ipv4Addr::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VduState {
    Booting,
    Ready,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VduInterface {
    pub name: String,
    pub network: String,
    pub ip: Ipv4Addr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VduInstance {
    pub id: String,
    pub image: String,
    pub state: VduState,
    pub interfaces: Vec<VduInterface>,
    pub installed_packages: BTreeSet<String>,
    pub boot_started_at: SimTime,
    pub ready_at: Option<SimTime>,
    pub forwarding_enabled: bool,
}

impl VduInstance {
    pub fn interface(&self, name: &str) -> Option<&VduInterface> {
        self.interfaces.iter().find(|i| i.name == name)
    }
}

/// One VDU to boot: its spec and where each interface attaches.
#[derive(Debug, Clone)]
pub struct BootRequest<'a> {
    pub id: String,
    pub spec: &'a VduSpec,
    /// interface name → network name
    pub attachments: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkView {
    pub name: String,
    pub cidr: Ipv4Net,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VduView {
    pub id: String,
    pub image: String,
    pub forwarding_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentView {
    pub vdu: String,
    pub interface: String,
    pub network: String,
    pub ip: Ipv4Addr,
}

/// Immutable snapshot of live networks, VDUs, and their attachments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub networks: Vec<NetworkView>,
    pub vdus: Vec<VduView>,
    pub attachments: Vec<AttachmentView>,
}

impl Topology {
    pub fn is_empty(&self) -> bool {
        self.networks.is_empty() && self.vdus.is_empty()
    }

    /// Every attachment names a listed VDU and a listed network, and its
    /// address lies inside that network.
    pub fn is_referentially_closed(&self) -> bool {
        self.attachments.iter().all(|a| {
            self.vdus.iter().any(|v| v.id == a.vdu)
                && self
                    .networks
                    .iter()
                    .any(|n| n.name == a.network && n.cidr.contains(&a.ip))
        })
    }

    pub fn attached_to<'a>(&'a self, network: &'a str) -> impl Iterator<Item = &'a AttachmentView> {
        self.attachments
            .iter()
            .filter(move |a| a.network == network)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Vim {
    #[serde(with = "serde_clock")]
    clock: SimClock,
    networks: BTreeMap<String, VirtualNetwork>,
    vdus: BTreeMap<String, VduInstance>,
}

impl Vim {
    pub fn new(clock: SimClock) -> Self {
        Vim {
            clock,
            ..Default::default()
        }
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn create_network(
        &mut self,
        name: &str,
        cidr: Ipv4Net,
    ) -> Result<&VirtualNetwork, VimError> {
        if self.networks.contains_key(name) {
            return Err(VimError::DuplicateNetwork(name.to_string()));
        }
        if cidr.prefix_len() > 30 {
            return Err(VimError::InvalidCidr(
                cidr.to_string(),
                "prefix longer than /30",
            ));
        }
        if cidr.trunc() != cidr {
            return Err(VimError::InvalidCidr(cidr.to_string(), "host bits set"));
        }
        let net = VirtualNetwork {
            name: name.to_string(),
            cidr,
            allocations: BTreeMap::new(),
        };
        Ok(self.networks.entry(name.to_string()).or_insert(net))
    }

    pub fn delete_network(&mut self, name: &str) -> Result<(), VimError> {
        let net = self
            .networks
            .get(name)
            .ok_or_else(|| VimError::UnknownNetwork(name.to_string()))?;
        if !net.allocations.is_empty() {
            return Err(VimError::NetworkInUse(name.to_string()));
        }
        self.networks.remove(name);
        Ok(())
    }

    pub fn network(&self, name: &str) -> Option<&VirtualNetwork> {
        self.networks.get(name)
    }

    pub fn vdu(&self, id: &str) -> Option<&VduInstance> {
        self.vdus.get(id)
    }

    /// Boots one VDU starting now and advances the clock to its ready time.
    pub fn boot_vdu(
        &mut self,
        req: &BootRequest<'_>,
        profile: &TimingProfile,
    ) -> Result<VduInstance, VimError> {
        let start = self.clock.now();
        let vdu = self.boot_at(req, profile, start)?;
        if let Some(t) = vdu.ready_at {
            self.clock.advance_to(t);
        }
        Ok(vdu)
    }

    /// Boots VDUs in parallel: all start at the current instant and the
    /// clock advances to the latest ready time. On failure, VDUs booted
    /// before the failing request stay up.
    pub fn boot_concurrent(
        &mut self,
        reqs: &[BootRequest<'_>],
        profile: &TimingProfile,
    ) -> Result<Vec<VduInstance>, VimError> {
        let start = self.clock.now();
        let mut out = Vec::with_capacity(reqs.len());
        let mut latest = start;
        let mut result = Ok(());
        for req in reqs {
            match self.boot_at(req, profile, start) {
                Ok(v) => {
                    latest = latest.max(v.ready_at.unwrap_or(start));
                    out.push(v);
                }
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        self.clock.advance_to(latest);
        result.map(|_| out)
    }

    fn boot_at(
        &mut self,
        req: &BootRequest<'_>,
        profile: &TimingProfile,
        start: SimTime,
    ) -> Result<VduInstance, VimError> {
        if self
            .vdus
            .get(&req.id)
            .is_some_and(|v| v.state != VduState::Terminated)
        {
            return Err(VimError::DuplicateVdu(req.id.clone()));
        }
        let boot = profile.boot_duration(&req.spec.cloud_init_packages)?;

        // Check capacity for every interface before allocating anything.
        let mut need: BTreeMap<&str, u64> = BTreeMap::new();
        for iface in &req.spec.interfaces {
            let net =
                req.attachments
                    .get(&iface.name)
                    .ok_or_else(|| VimError::UnattachedInterface {
                        vdu: req.id.clone(),
                        iface: iface.name.clone(),
                    })?;
            *need.entry(net.as_str()).or_default() += 1;
        }
        for (net, n) in &need {
            let vn = self
                .networks
                .get(*net)
                .ok_or_else(|| VimError::UnknownNetwork(net.to_string()))?;
            if vn.free_count() < *n {
                return Err(VimError::NetworkExhausted(net.to_string()));
            }
        }

        let mut interfaces = Vec::new();
        for iface in &req.spec.interfaces {
            let net_name = &req.attachments[&iface.name];
            let net = self.networks.get_mut(net_name).expect("checked above");
            let ip = net.lowest_free().expect("capacity checked");
            net.allocations
                .insert(format!("{}/{}", req.id, iface.name), ip);
            interfaces.push(VduInterface {
                name: iface.name.clone(),
                network: net_name.clone(),
                ip,
            });
        }
        let vdu = VduInstance {
            id: req.id.clone(),
            image: req.spec.image.clone(),
            state: VduState::Ready,
            interfaces,
            installed_packages: req.spec.cloud_init_packages.iter().cloned().collect(),
            boot_started_at: start,
            ready_at: Some(start + boot),
            forwarding_enabled: req.spec.requires_forwarding,
        };
        self.vdus.insert(vdu.id.clone(), vdu.clone());
        Ok(vdu)
    }

    pub fn set_forwarding(&mut self, id: &str, enabled: bool) -> Result<(), VimError> {
        match self.vdus.get_mut(id) {
            Some(v) if v.state != VduState::Terminated => {
                v.forwarding_enabled = enabled;
                Ok(())
            }
            Some(_) => Err(VimError::AlreadyTerminated(id.to_string())),
            None => Err(VimError::UnknownVdu(id.to_string())),
        }
    }

    pub fn terminate_vdu(&mut self, id: &str) -> Result<(), VimError> {
        let vdu = self
            .vdus
            .get_mut(id)
            .ok_or_else(|| VimError::UnknownVdu(id.to_string()))?;
        if vdu.state == VduState::Terminated {
            return Err(VimError::AlreadyTerminated(id.to_string()));
        }
        vdu.state = VduState::Terminated;
        for iface in &vdu.interfaces {
            if let Some(net) = self.networks.get_mut(&iface.network) {
                net.allocations.remove(&format!("{id}/{}", iface.name));
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> Topology {
        let live = self
            .vdus
            .values()
            .filter(|v| v.state != VduState::Terminated);
        let mut t = Topology {
            networks: self
                .networks
                .values()
                .map(|n| NetworkView {
                    name: n.name.clone(),
                    cidr: n.cidr,
                })
                .collect(),
            ..Default::default()
        };
        for v in live {
            t.vdus.push(VduView {
                id: v.id.clone(),
                image: v.image.clone(),
                forwarding_enabled: v.forwarding_enabled,
            });
            for i in &v.interfaces {
                t.attachments.push(AttachmentView {
                    vdu: v.id.clone(),
                    interface: i.name.clone(),
                    network: i.network.clone(),
                    ip: i.ip,
                });
            }
        }
        t
    }

    /// Advances the clock; used by configuration work executed on VDUs.
    pub fn charge(&self, d: SimDuration) -> SimTime {
        self.clock.advance(d)
    }
}
