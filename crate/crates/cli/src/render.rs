use std::collections::BTreeSet;
use std::fmt::Write;

use serde_json::{json, Value};
use slicevpn_core::cryptokey::CryptokeyRoutingTable;
use slicevpn_core::lifecycle::{ActionResult, ActionStatus, NetworkServiceInstance};
use slicevpn_core::vimsim::Topology;

pub fn action(r: &ActionResult) -> String {
    let mut t = String::new();
    match &r.status {
        ActionStatus::Ok => {
            let _ = writeln!(t, "{}: ok ({} s)", r.action, r.duration);
        }
        ActionStatus::Error(m) => {
            let _ = writeln!(t, "{}: error ({} s): {m}", r.action, r.duration);
        }
    }
    for (k, v) in &r.output {
        let _ = writeln!(t, "{k}: {v}");
    }
    t
}

/// The parts of the topology belonging to `inst`.
fn own_topology(inst: &NetworkServiceInstance, topo: &Topology) -> Topology {
    let nets: BTreeSet<&str> = inst.networks.values().map(String::as_str).collect();
    let vdus: BTreeSet<&str> = inst
        .vnf_records
        .iter()
        .flat_map(|r| r.vdu_ids.iter().map(String::as_str))
        .collect();
    Topology {
        networks: topo
            .networks
            .iter()
            .filter(|n| nets.contains(n.name.as_str()))
            .cloned()
            .collect(),
        vdus: topo
            .vdus
            .iter()
            .filter(|v| vdus.contains(v.id.as_str()))
            .cloned()
            .collect(),
        attachments: topo
            .attachments
            .iter()
            .filter(|a| vdus.contains(a.vdu.as_str()))
            .cloned()
            .collect(),
    }
}

fn table_json(t: &CryptokeyRoutingTable) -> Value {
    json!({
        "interface": t.interface_name(),
        "public-key": t.public_key().to_string(),
        "listen-endpoint": t.listen_endpoint().map(|e| e.to_string()),
        "tunnel-address": t.tunnel_address(),
        "local-prefixes": t.local_prefixes(),
        "peers": t.peers().map(|p| json!({
            "public-key": p.public_key.to_string(),
            "allowed-ips": p.allowed_ips,
            "endpoint": p.endpoint.map(|e| e.to_string()),
        })).collect::<Vec<_>>(),
    })
}

/// Never includes private keys.
pub fn show_json(inst: &NetworkServiceInstance, topo: &Topology) -> Value {
    let members: Vec<Value> = inst
        .vnf_records
        .iter()
        .map(|r| {
            json!({
                "member": r.member,
                "vnfd": r.vnfd_id,
                "mgmt-ip": r.mgmt_ip,
                "interfaces": r.interfaces,
                "wg-running": r.wg_running,
                "wireguard": r.table.as_ref().map(table_json),
                "executed-primitives": r.executed_primitives,
            })
        })
        .collect();
    json!({
        "id": inst.id,
        "nsd": inst.nsd_id,
        "slice": inst.slice,
        "state": inst.state,
        "params": inst.params,
        "members": members,
        "events": inst.events,
        "topology": own_topology(inst, topo),
    })
}

pub fn show_text(inst: &NetworkServiceInstance, topo: &Topology) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "instance: {}", inst.id);
    let _ = writeln!(t, "nsd: {}", inst.nsd_id);
    if let Some(s) = &inst.slice {
        let _ = writeln!(t, "slice: {s}");
    }
    let _ = writeln!(t, "state: {}", inst.state);
    let _ = writeln!(t, "members:");
    for r in &inst.vnf_records {
        let mgmt = r
            .mgmt_ip
            .map(|a| a.to_string())
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(t, "  {} {} mgmt={mgmt}", r.member, r.vnfd_id);
        for i in &r.interfaces {
            let _ = writeln!(t, "    {} {} {} ({})", i.vdu, i.name, i.ip, i.link);
        }
        if let Some(tb) = &r.table {
            let listen = tb
                .listen_endpoint()
                .map(|e| e.to_string())
                .unwrap_or_else(|| "-".into());
            let tun = tb
                .tunnel_address()
                .map(|a| a.to_string())
                .unwrap_or_else(|| "-".into());
            let state = if r.wg_running { "up" } else { "down" };
            let _ = writeln!(
                t,
                "    {} {state} key={} listen={listen} address={tun}",
                tb.interface_name(),
                tb.public_key()
            );
            for p in tb.peers() {
                let ips: Vec<String> = p.allowed_ips.iter().map(|n| n.to_string()).collect();
                let ep = p
                    .endpoint
                    .map(|e| e.to_string())
                    .unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    t,
                    "      peer {} allowed-ips={} endpoint={ep}",
                    p.public_key,
                    ips.join(",")
                );
            }
        }
    }
    let _ = writeln!(t, "events:");
    for l in inst.event_lines() {
        let _ = writeln!(t, "  {l}");
    }
    let own = own_topology(inst, topo);
    let _ = writeln!(t, "topology:");
    for n in &own.networks {
        let _ = writeln!(t, "  network {} {}", n.name, n.cidr);
        for a in own.attached_to(&n.name) {
            let _ = writeln!(t, "    {} {} {}", a.vdu, a.interface, a.ip);
        }
    }
    t
}
