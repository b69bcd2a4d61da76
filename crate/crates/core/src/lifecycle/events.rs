use std::fmt;
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::clock::{SimDuration, SimTime};
use crate::descriptors::MemberIndex;

/// Which orchestrator component emitted an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventSource {
    #[serde(rename = "NBI")]
    Nbi,
    #[serde(rename = "RO")]
    Ro,
    #[serde(rename = "VCA")]
    Vca,
}

impl fmt::Display for EventSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventSource::Nbi => "NBI",
            EventSource::Ro => "RO",
            EventSource::Vca => "VCA",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Day {
    Day1,
    Day2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum EventKind {
    NsCreate {
        nsd: String,
    },
    /// Instantiation parameters as recorded, secrets redacted.
    ParamsLogged {
        params: String,
    },
    DeployStart,
    NetworkCreated {
        network: String,
        cidr: Ipv4Net,
    },
    VduReady {
        member: MemberIndex,
        vdu: String,
        addresses: Vec<Ipv4Addr>,
    },
    DeployComplete,
    DeployFailed {
        reason: String,
    },
    ActionRequested {
        member: MemberIndex,
        action: String,
    },
    PrimitiveStarted {
        member: MemberIndex,
        name: String,
        day: Day,
    },
    PrimitiveFinished {
        member: MemberIndex,
        name: String,
        day: Day,
        ok: bool,
        duration: SimDuration,
        detail: String,
    },
    Running,
    Failed {
        reason: String,
    },
    Terminated,
}

impl EventKind {
    pub fn source(&self) -> EventSource {
        use EventKind::*;
        match self {
            NsCreate { .. }
            | ParamsLogged { .. }
            | ActionRequested { .. }
            | Running
            | Failed { .. }
            | Terminated => EventSource::Nbi,
            DeployStart
            | NetworkCreated { .. }
            | VduReady { .. }
            | DeployComplete
            | DeployFailed { .. } => EventSource::Ro,
            PrimitiveStarted { .. } | PrimitiveFinished { .. } => EventSource::Vca,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use EventKind::*;
        match self {
            NsCreate { nsd } => write!(f, "ns-create nsd={nsd}"),
            ParamsLogged { params } => write!(f, "instantiation-params {params}"),
            DeployStart => f.write_str("deploy-start"),
            NetworkCreated { network, cidr } => write!(f, "network-created {network} {cidr}"),
            VduReady {
                member,
                vdu,
                addresses,
            } => {
                write!(f, "vdu-ready member={member} {vdu}")?;
                for a in addresses {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
            DeployComplete => f.write_str("deploy-complete"),
            DeployFailed { reason } => write!(f, "deploy-failed {reason}"),
            ActionRequested { member, action } => write!(f, "ns-action member={member} {action}"),
            PrimitiveStarted { member, name, day } => {
                write!(f, "{} member={member} {name} started", day_label(*day))
            }
            PrimitiveFinished {
                member,
                name,
                day,
                ok,
                duration,
                detail,
            } => {
                let status = if *ok { "ok" } else { "error" };
                write!(
                    f,
                    "{} member={member} {name} {status} ({duration} s)",
                    day_label(*day)
                )?;
                if !detail.is_empty() {
                    write!(f, " {detail}")?;
                }
                Ok(())
            }
            Running => f.write_str("state Running"),
            Failed { reason } => write!(f, "state Failed: {reason}"),
            Terminated => f.write_str("state Terminated"),
        }
    }
}

fn day_label(d: Day) -> &'static str {
    match d {
        Day::Day1 => "initial-primitive",
        Day::Day2 => "action",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub at: SimTime,
    pub instance: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn source(&self) -> EventSource {
        self.kind.source()
    }

    /// `<sim-ts> <source> <instance> <message>`
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {}",
            self.at,
            self.source(),
            self.instance,
            self.kind
        )
    }
}
