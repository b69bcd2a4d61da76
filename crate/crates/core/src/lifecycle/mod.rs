//! The orchestrator: Day-0 onboarding, Day-1 instantiation with initial
//! configuration primitives, Day-2 actions, RBAC, and the per-instance
//! event log.
//!
//! An instance moves `Created → DeployingInfra → ConfiguringDay1 → Running
//! → Terminated`, and may fall into `Failed` from any non-terminal state.
//! The RO phase creates networks and boots all VDUs in parallel; the VCA
//! phase then runs each member's initial primitives in order, members in
//! parallel. All durations come from the instance's timing profile and are
//! charged to the VIM's simulated clock.

mod datapath;
mod events;
mod orchestrator;
mod params;
mod rbac;

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::clock::{SimDuration, SimTime};
use crate::cryptokey::{CryptokeyRoutingTable, PublicKey};
use crate::descriptors::{
    CatalogError, DescriptorError, DescriptorKind, Issue, MemberIndex, ValidationReport,
};
use crate::transport::TransportError;
use crate::vimsim::TimingProfile;

pub use datapath::Datapath;
pub use events::{Day, Event, EventKind, EventSource};
pub use orchestrator::{OnboardReceipt, Orchestrator};
pub use params::{
    redact, resolve, BadParam, InstantiationParams, ParamValue, ParamsError, Placeholders, REDACTED,
};
pub use rbac::{actors_from_yaml, authorize, Actor, ActorsError, Decision, Operation, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NsState {
    Created,
    DeployingInfra,
    ConfiguringDay1,
    Running,
    Terminated,
    Failed,
}

impl NsState {
    pub fn is_terminal(self) -> bool {
        matches!(self, NsState::Terminated | NsState::Failed)
    }
}

impl fmt::Display for NsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status", content = "message")]
pub enum ActionStatus {
    Ok,
    Error(String),
}

impl ActionStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, ActionStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub action: String,
    pub status: ActionStatus,
    pub output: BTreeMap<String, String>,
    pub duration: SimDuration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutedPrimitive {
    pub name: String,
    pub day: Day,
    /// Resolved arguments, secrets redacted.
    pub params: BTreeMap<String, String>,
    pub started_at: SimTime,
    pub finished_at: SimTime,
    pub status: ActionStatus,
    pub output: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordInterface {
    pub vdu: String,
    pub name: String,
    /// Virtual-link name from the NSD.
    pub link: String,
    /// VIM network realizing the link.
    pub network: String,
    pub ip: Ipv4Addr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnfRecord {
    pub member: MemberIndex,
    pub vnfd_id: String,
    pub vdu_ids: Vec<String>,
    pub mgmt_interface: String,
    pub mgmt_ip: Option<Ipv4Addr>,
    pub interfaces: Vec<RecordInterface>,
    /// Present once generate-keys has run.
    pub table: Option<CryptokeyRoutingTable>,
    pub wg_running: bool,
    pub executed_primitives: Vec<ExecutedPrimitive>,
}

impl VnfRecord {
    pub fn public_key(&self) -> Option<PublicKey> {
        self.table.as_ref().map(|t| t.public_key())
    }

    pub fn mgmt(&self) -> Option<&RecordInterface> {
        self.interfaces
            .iter()
            .find(|i| i.name == self.mgmt_interface)
    }

    /// Interfaces other than the management one.
    pub fn data_interfaces(&self) -> impl Iterator<Item = &RecordInterface> {
        self.interfaces
            .iter()
            .filter(|i| i.name != self.mgmt_interface)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkServiceInstance {
    pub id: String,
    pub nsd_id: String,
    pub slice: Option<String>,
    pub state: NsState,
    /// Instantiation parameters as logged, secrets redacted.
    pub params: InstantiationParams,
    pub profile: TimingProfile,
    pub vnf_records: Vec<VnfRecord>,
    pub events: Vec<Event>,
    /// Virtual-link name → VIM network name.
    pub networks: BTreeMap<String, String>,
    /// VIM networks created for (and deleted with) this instance.
    pub owned_networks: Vec<String>,
    #[serde(skip)]
    pending_params: InstantiationParams,
}

impl NetworkServiceInstance {
    pub fn record(&self, member: MemberIndex) -> Option<&VnfRecord> {
        self.vnf_records.iter().find(|r| r.member == member)
    }

    pub fn event_lines(&self) -> Vec<String> {
        self.events.iter().map(Event::to_line).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceInstance {
    pub id: String,
    pub nst_id: String,
    pub state: NsState,
    pub ns_instances: Vec<String>,
    /// Slice-link name → shared VIM network.
    pub shared_networks: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum LifecycleError {
    #[error("authorization denied: {actor} may not {operation}{}", .instance.as_ref().map(|i| format!(" on {i}")).unwrap_or_default())]
    AuthorizationDenied {
        actor: String,
        operation: Operation,
        instance: Option<String>,
    },
    #[error("instance not found: {0}")]
    InstanceNotFound(String),
    #[error("slice not found: {0}")]
    SliceNotFound(String),
    #[error("{kind} not found: {id}")]
    DescriptorNotFound { kind: DescriptorKind, id: String },
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("validation failed: {}", first_error(.0))]
    Validation(ValidationReport),
    #[error("invalid instantiation parameters: {0}")]
    InvalidConfig(String),
    #[error("instance {instance} is {state}, not Running")]
    NotRunning { instance: String, state: NsState },
    #[error("instance {instance} has no member {member}")]
    UnknownMember {
        instance: String,
        member: MemberIndex,
    },
    #[error("action `{action}` is not declared by member {member} ({vnfd})")]
    UndeclaredAction {
        member: MemberIndex,
        vnfd: String,
        action: String,
    },
    #[error(transparent)]
    BadParam(#[from] BadParam),
    #[error("deployment of {instance} failed: {reason}")]
    DeployFailed { instance: String, reason: String },
    #[error("{instance} member {member} initial primitive {name} failed: {reason}")]
    PrimitiveFailed {
        instance: String,
        member: MemberIndex,
        name: String,
        reason: String,
    },
    #[error("instance {0} is already terminated")]
    AlreadyTerminated(String),
    #[error("instance {instance} cannot advance from {state}")]
    CannotStep { instance: String, state: NsState },
    #[error("member {member} of {instance} is not a running gateway")]
    NotAGateway {
        instance: String,
        member: MemberIndex,
    },
    #[error(transparent)]
    Transport(#[from] TransportError),
}

fn first_error(r: &ValidationReport) -> String {
    r.errors()
        .next()
        .map(Issue::to_string)
        .unwrap_or_else(|| "unknown error".into())
}
