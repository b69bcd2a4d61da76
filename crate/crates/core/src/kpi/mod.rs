//! Service-creation KPIs derived from instance event logs, and throughput
//! and latency benchmarks through a live tunnel.
//!
//! OPD is the RO span from `deploy-start` to `deploy-complete`. DPD is the
//! Day-1 span (members configure in parallel, so it is the slowest
//! member's sum of initial-primitive durations) plus the first successful
//! `add-peer` span.

mod bench;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clock::{SimDuration, SimTime};
use crate::lifecycle::{Day, EventKind, NetworkServiceInstance};

pub use bench::{
    run_latency, run_throughput, BenchError, BenchKind, BenchResult, LatencyStats, TunnelPair,
};
pub use report::{bench_report, kpi_report, Report};

pub const PEERING_ACTION: &str = "add-peer";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpiRecord {
    pub instance: String,
    #[serde(rename = "opd_s", with = "secs")]
    pub opd: SimDuration,
    #[serde(rename = "dpd_s", with = "secs")]
    pub dpd: SimDuration,
    #[serde(rename = "total_s", with = "secs")]
    pub total: SimDuration,
    /// Initial-configuration part of DPD.
    #[serde(rename = "day1_s", with = "secs")]
    pub day1: SimDuration,
    /// Peering part of DPD; zero until an add-peer has succeeded.
    #[serde(rename = "peering_s", with = "secs")]
    pub peering: SimDuration,
    /// Duration of the first successful run of each Day-2 action.
    #[serde(rename = "per_action_s", with = "secs_map")]
    pub per_action: BTreeMap<String, SimDuration>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KpiError {
    #[error("instance {0} has no events")]
    NoEvents(String),
}

pub fn measure_kpis(inst: &NetworkServiceInstance) -> Result<KpiRecord, KpiError> {
    if inst.events.is_empty() {
        return Err(KpiError::NoEvents(inst.id.clone()));
    }
    let mut deploy_start = None;
    let mut deploy_end = None;
    let mut last_ro = None;
    let mut day1_start: Option<SimTime> = None;
    let mut day1_end: Option<SimTime> = None;
    let mut first_peering: BTreeMap<_, SimDuration> = BTreeMap::new();
    let mut per_action = BTreeMap::new();

    for e in &inst.events {
        match &e.kind {
            EventKind::DeployStart => {
                deploy_start.get_or_insert(e.at);
            }
            EventKind::DeployComplete | EventKind::DeployFailed { .. } => {
                deploy_end.get_or_insert(e.at);
            }
            EventKind::PrimitiveStarted { day: Day::Day1, .. } => {
                day1_start = Some(day1_start.map_or(e.at, |t| t.min(e.at)));
            }
            EventKind::PrimitiveFinished { day: Day::Day1, .. } => {
                day1_end = Some(day1_end.map_or(e.at, |t| t.max(e.at)));
            }
            EventKind::PrimitiveFinished {
                member,
                name,
                day: Day::Day2,
                ok: true,
                duration,
                ..
            } => {
                per_action.entry(name.clone()).or_insert(*duration);
                if name == PEERING_ACTION {
                    first_peering.entry(*member).or_insert(*duration);
                }
            }
            _ => {}
        }
        if e.kind.source() == crate::lifecycle::EventSource::Ro {
            last_ro = Some(e.at);
        }
    }

    let opd = match (deploy_start, deploy_end.or(last_ro)) {
        (Some(a), Some(b)) => b.since(a),
        _ => SimDuration::ZERO,
    };
    let day1 = match (day1_start, day1_end) {
        (Some(a), Some(b)) => b.since(a),
        _ => SimDuration::ZERO,
    };
    // Each gateway's first add-peer; the two sides configure independently.
    let peering = first_peering.values().copied().max().unwrap_or_default();
    let dpd = day1 + peering;
    Ok(KpiRecord {
        instance: inst.id.clone(),
        opd,
        dpd,
        total: opd + dpd,
        day1,
        peering,
        per_action,
    })
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::clock::SimDuration;

    pub fn serialize<S: Serializer>(d: &SimDuration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SimDuration, D::Error> {
        let v = f64::deserialize(d)?;
        SimDuration::from_secs_f64(v).ok_or_else(|| serde::de::Error::custom("invalid duration"))
    }
}

mod secs_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::clock::SimDuration;

    pub fn serialize<S: Serializer>(
        m: &BTreeMap<String, SimDuration>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &v.as_secs_f64())?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<String, SimDuration>, D::Error> {
        BTreeMap::<String, f64>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                SimDuration::from_secs_f64(v)
                    .map(|d| (k, d))
                    .ok_or_else(|| serde::de::Error::custom("invalid duration"))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests;
