//! The two-gateway VPN scenario driven through the public API only: two
//! gateways and two test hosts over three networks, with traffic between
//! the hosts carried by the encrypted tunnel.

use std::collections::BTreeMap;
use std::time::Duration;

use slicevpn_core::cryptokey::PlainPacket;
use slicevpn_core::fixtures;
use slicevpn_core::kpi::{measure_kpis, run_latency, TunnelPair};
use slicevpn_core::lifecycle::{Actor, InstantiationParams, NsState, Orchestrator};
use slicevpn_core::transport::{BackendKind, MemConfig};
use slicevpn_core::vimsim::TimingProfile;

fn admin() -> Actor {
    Actor::admin("admin")
}

fn running(backend: BackendKind) -> (Orchestrator, String) {
    let mut o = Orchestrator::with_backend(backend);
    for text in [
        fixtures::WG_GATEWAY_VNFD,
        fixtures::TEST_HOST_VNFD,
        fixtures::TWO_GATEWAY_NSD,
    ] {
        let receipt = o.onboard(&admin(), text).unwrap();
        assert!(receipt.warnings.is_empty(), "{:?}", receipt.warnings);
    }
    let params = InstantiationParams::from_yaml(fixtures::WG_PAIR_CONFIG).unwrap();
    let id = o
        .ns_create(&admin(), "wg-pair", &params, &TimingProfile::default())
        .unwrap();
    (o, id)
}

fn peer_gateways(o: &mut Orchestrator, id: &str) {
    let args = |o: &Orchestrator, m| -> BTreeMap<String, String> {
        let t = o
            .instance(id)
            .unwrap()
            .record(m)
            .unwrap()
            .table
            .clone()
            .unwrap();
        [
            ("public-key", t.public_key().to_string()),
            (
                "allowed-ips",
                format!(
                    "{}/32,{}",
                    t.tunnel_address().unwrap(),
                    t.local_prefixes()[0]
                ),
            ),
            ("endpoint", t.listen_endpoint().unwrap().to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    };
    let (w, e) = (args(o, 1), args(o, 2));
    assert!(o
        .ns_action(&admin(), id, 1, "add-peer", &e)
        .unwrap()
        .status
        .is_ok());
    assert!(o
        .ns_action(&admin(), id, 2, "add-peer", &w)
        .unwrap()
        .status
        .is_ok());
}

#[test]
fn deploys_two_gateways_and_two_hosts_over_three_networks() {
    let (o, id) = running(BackendKind::Mem(MemConfig::default()));
    let inst = o.instance(&id).unwrap();
    assert_eq!(inst.state, NsState::Running);
    let topo = o.vim().topology();
    assert_eq!(topo.networks.len(), 3);
    assert_eq!(topo.vdus.len(), 4);
    assert!(topo.is_referentially_closed());

    let gateways: Vec<_> = topo.vdus.iter().filter(|v| v.forwarding_enabled).collect();
    assert_eq!(gateways.len(), 2);
    for g in gateways {
        // Tunnel network plus its own data network.
        assert_eq!(topo.attachments.iter().filter(|a| a.vdu == g.id).count(), 2);
    }
    // The tunnel network carries only the gateways.
    let tunnel = &inst.networks["tunnel"];
    assert_eq!(topo.attached_to(tunnel).count(), 2);
}

#[test]
fn hosts_reach_each_other_only_once_peered() {
    let (mut o, id) = running(BackendKind::Mem(MemConfig::default()));
    let (hw, he) = (
        o.host_behind(&id, 1).unwrap(),
        o.host_behind(&id, 2).unwrap(),
    );
    let mut w = o.take_gateway(&id, 1).unwrap();
    assert!(w
        .send_packet(&PlainPacket::new(hw, he, b"early".to_vec()))
        .is_err());
    o.restore_gateway(&id, 1, w).unwrap();

    peer_gateways(&mut o, &id);
    let mut w = o.take_gateway(&id, 1).unwrap();
    let mut e = o.take_gateway(&id, 2).unwrap();
    w.send_packet(&PlainPacket::new(hw, he, b"request".to_vec()))
        .unwrap();
    let got = e.recv_packet(Duration::from_secs(1)).unwrap().unwrap();
    assert_eq!(
        (got.src_ip, got.dst_ip, &got.payload[..]),
        (hw, he, &b"request"[..])
    );
    e.send_packet(&PlainPacket::new(he, hw, b"reply".to_vec()))
        .unwrap();
    assert_eq!(
        w.recv_packet(Duration::from_secs(1))
            .unwrap()
            .unwrap()
            .payload,
        b"reply"
    );
    o.restore_gateway(&id, 1, w).unwrap();
    o.restore_gateway(&id, 2, e).unwrap();
}

#[test]
fn full_session_over_udp_then_teardown() {
    let (mut o, id) = running(BackendKind::Udp);
    peer_gateways(&mut o, &id);
    let k = measure_kpis(o.instance(&id).unwrap()).unwrap();
    assert_eq!(k.total.as_secs_f64(), 266.0);

    let (mut pair, members) = TunnelPair::checkout(&mut o, &id).unwrap();
    let r = run_latency(&mut pair, 50, Duration::from_secs(1)).unwrap();
    assert_eq!((r.latency.count, r.timeouts, r.rejected), (50, 0, 0));
    pair.restore(&mut o, &id, members).unwrap();

    o.ns_delete(&admin(), &id).unwrap();
    assert_eq!(o.instance(&id).unwrap().state, NsState::Terminated);
    assert!(o.vim().topology().is_empty());
}
