use std::collections::BTreeMap;
use std::time::Duration;

use proptest::prelude::*;

use super::*;
use crate::descriptors::parse_vnfd;
use crate::fixtures;
use crate::lifecycle::{Actor, InstantiationParams, Orchestrator};
use crate::transport::{BackendKind, MemConfig};
use crate::vimsim::TimingProfile;

fn admin() -> Actor {
    Actor::admin("admin")
}

fn deploy(profile: &TimingProfile, backend: BackendKind) -> (Orchestrator, String) {
    let mut o = Orchestrator::with_backend(backend);
    for d in fixtures::pair_catalog() {
        o.onboard_descriptor(&admin(), d).unwrap();
    }
    let params = InstantiationParams::from_yaml(fixtures::WG_PAIR_CONFIG).unwrap();
    let id = o.ns_create(&admin(), "wg-pair", &params, profile).unwrap();
    (o, id)
}

fn peer(o: &mut Orchestrator, id: &str) {
    let inst = o.instance(id).unwrap();
    let args = |m| {
        let t = inst.record(m).unwrap().table.clone().unwrap();
        let kv: BTreeMap<String, String> = [
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
        .collect();
        kv
    };
    let (w, e) = (args(1), args(2));
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

/// Independent oracle: slowest VDU boot; slowest gateway's sum of initial
/// primitives plus one add-peer.
fn expected(profile: &TimingProfile) -> (SimDuration, SimDuration) {
    let gw = parse_vnfd(fixtures::WG_GATEWAY_VNFD).unwrap();
    let host = parse_vnfd(fixtures::TEST_HOST_VNFD).unwrap();
    let boot = [&gw, &host]
        .iter()
        .flat_map(|v| v.vdus.iter())
        .map(|vdu| profile.boot_duration(&vdu.cloud_init_packages).unwrap())
        .max()
        .unwrap();
    let day1: SimDuration = gw
        .initial_config_primitives
        .iter()
        .map(|p| profile.primitive_duration(&p.name))
        .sum();
    (boot, day1 + profile.primitive_duration("add-peer"))
}

#[test]
fn default_profile_gives_reference_kpis() {
    let (mut o, id) = deploy(
        &TimingProfile::default(),
        BackendKind::Mem(MemConfig::default()),
    );
    peer(&mut o, &id);
    let k = measure_kpis(o.instance(&id).unwrap()).unwrap();
    assert_eq!(k.opd, SimDuration::from_secs(159));
    assert_eq!(k.dpd, SimDuration::from_secs(107));
    assert_eq!(k.total, SimDuration::from_secs(266));
    assert_eq!(k.day1, SimDuration::from_secs(47));
    assert_eq!(k.per_action["add-peer"], SimDuration::from_secs(60));
    assert_eq!((k.opd, k.dpd), expected(&TimingProfile::default()));
}

#[test]
fn preinstalled_and_zeroed_profiles() {
    let (mut o, id) = deploy(
        &TimingProfile::preinstalled(),
        BackendKind::Mem(MemConfig::default()),
    );
    peer(&mut o, &id);
    let k = measure_kpis(o.instance(&id).unwrap()).unwrap();
    assert_eq!(k.opd, SimDuration::from_secs(57));
    assert_eq!(k.total, SimDuration::from_secs(164));
    assert!(kpi_report(&k).text.contains("(2 min 44 s)"));

    let (mut o, id) = deploy(
        &TimingProfile::zeroed(),
        BackendKind::Mem(MemConfig::default()),
    );
    peer(&mut o, &id);
    let k = measure_kpis(o.instance(&id).unwrap()).unwrap();
    assert_eq!((k.opd, k.dpd), (SimDuration::ZERO, SimDuration::ZERO));
}

#[test]
fn dpd_before_peering_is_initial_config_only() {
    let (o, id) = deploy(
        &TimingProfile::default(),
        BackendKind::Mem(MemConfig::default()),
    );
    let k = measure_kpis(o.instance(&id).unwrap()).unwrap();
    assert_eq!(k.dpd, SimDuration::from_secs(47));
    assert!(k.per_action.is_empty());
}

#[test]
fn empty_log_is_an_error() {
    let (o, id) = deploy(
        &TimingProfile::default(),
        BackendKind::Mem(MemConfig::default()),
    );
    let mut inst = o.instance(&id).unwrap().clone();
    inst.events.clear();
    assert_eq!(measure_kpis(&inst), Err(KpiError::NoEvents(id)));
}

#[test]
fn kpi_report_is_stable() {
    let (mut o, id) = deploy(
        &TimingProfile::default(),
        BackendKind::Mem(MemConfig::default()),
    );
    peer(&mut o, &id);
    let k = measure_kpis(o.instance(&id).unwrap()).unwrap();
    let r = kpi_report(&k);
    assert_eq!(
        r.text,
        "instance: ns-1\nOPD: 159 s\nDPD: 107 s (initial config 47 s + peering 60 s)\n\
         total: 266 s (4 min 26 s)\naction add-peer: 60 s\n"
    );
    assert_eq!(
        r.machine(),
        "kind=kpi\ninstance=ns-1\nopd_s=159\ndpd_s=107\ntotal_s=266\nday1_s=47\npeering_s=60\naction.add-peer_s=60\n"
    );
    assert_eq!(kpi_report(&k), r);
    let json = serde_json::to_string(&k).unwrap();
    assert!(json.contains("\"opd_s\":159.0"), "{json}");
    assert_eq!(serde_json::from_str::<KpiRecord>(&json).unwrap(), k);
}

fn pair(backend: BackendKind) -> (Orchestrator, String, TunnelPair, [u32; 2]) {
    let (mut o, id) = deploy(&TimingProfile::zeroed(), backend);
    peer(&mut o, &id);
    let (p, m) = TunnelPair::checkout(&mut o, &id).unwrap();
    (o, id, p, m)
}

#[test]
fn latency_over_mem_is_deterministic() {
    let run = || {
        let (_o, _id, mut p, _) = pair(BackendKind::Mem(MemConfig::default()));
        run_latency(&mut p, 50, Duration::from_secs(1)).unwrap()
    };
    let a = run();
    assert_eq!((a.latency.count, a.timeouts, a.requested), (50, 0, 50));
    assert!(a.latency.min_ms <= a.latency.mean_ms && a.latency.mean_ms <= a.latency.max_ms);
    // Two one-way hops of 0.5 ms plus serialization.
    assert!(
        a.latency.min_ms >= 1.0 && a.latency.max_ms < 1.1,
        "{:?}",
        a.latency
    );
    assert_eq!(a, run());
}

#[test]
fn latency_over_udp() {
    let (mut o, id, mut p, m) = pair(BackendKind::Udp);
    let r = run_latency(&mut p, 100, Duration::from_secs(1)).unwrap();
    assert_eq!((r.latency.count, r.timeouts), (100, 0));
    assert_eq!(r.backend, "udp");
    p.restore(&mut o, &id, m).unwrap();
    // Counters persisted, so a second run is not treated as a replay.
    let (mut p, _) = TunnelPair::checkout(&mut o, &id).unwrap();
    assert_eq!(
        run_latency(&mut p, 10, Duration::from_secs(1))
            .unwrap()
            .timeouts,
        0
    );
}

#[test]
fn zero_requests_is_an_empty_result() {
    let (_o, _id, mut p, _) = pair(BackendKind::Mem(MemConfig::default()));
    let r = run_latency(&mut p, 0, Duration::from_secs(1)).unwrap();
    assert_eq!(r.latency.count, 0);
    assert!(bench_report(&r).text.contains("samples: 0"));
}

#[test]
fn unpeered_tunnel_is_not_established() {
    let (mut o, id) = deploy(
        &TimingProfile::zeroed(),
        BackendKind::Mem(MemConfig::default()),
    );
    let (mut p, _) = TunnelPair::checkout(&mut o, &id).unwrap();
    let e = run_throughput(&mut p, Duration::from_millis(10), 1000).unwrap_err();
    assert_eq!(e.to_string(), "tunnel not established");
    assert!(matches!(
        run_latency(&mut p, 3, Duration::from_secs(1)),
        Err(BenchError::TunnelNotEstablished)
    ));
}

#[test]
fn throughput_over_mem_reports_simulated_goodput() {
    let (_o, _id, mut p, _) = pair(BackendKind::Mem(MemConfig::default()));
    let r = run_throughput(&mut p, Duration::from_millis(100), 1400).unwrap();
    assert!(r.bytes_transferred > 0);
    assert_eq!(r.bytes_transferred, r.packets * 1400);
    assert_eq!(
        r.throughput_bps,
        8.0 * r.bytes_transferred as f64 / r.duration_s
    );
    // Bounded by the 1 Gbit/s link less per-datagram overhead.
    assert!(
        r.throughput_bps < 1e9 && r.throughput_bps > 0.9e9,
        "{}",
        r.throughput_bps
    );
    assert_eq!(r.rejected, 0);
    assert!(matches!(
        run_throughput(&mut p, Duration::from_millis(1), 4),
        Err(BenchError::PayloadSize(4))
    ));
}

#[test]
fn throughput_over_udp() {
    let (_o, _id, mut p, _) = pair(BackendKind::Udp);
    let r = run_throughput(&mut p, Duration::from_millis(300), 1400).unwrap();
    assert!(r.bytes_transferred > 0);
    assert_eq!(r.bytes_transferred, r.packets * 1400);
    assert!(r.duration_s >= 0.3);
    assert!(bench_report(&r).text.contains("throughput: "));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kpis_match_profile_oracle(
        boot in 0u64..200, install in 0u64..200,
        gk in 0u64..60, sw in 0u64..60, ef in 0u64..60, ap in 0u64..90,
        pre in any::<bool>(),
    ) {
        let mut prof = TimingProfile::default();
        let s = SimDuration::from_secs;
        prof.base_boot = s(boot);
        prof.package_install.insert("wireguard".into(), s(install));
        for (k, v) in [("generate-keys", gk), ("start-wg", sw), ("enable-forwarding", ef), ("add-peer", ap)] {
            prof.primitive_exec.insert(k.into(), s(v));
        }
        if pre {
            prof.preinstalled_packages.insert("wireguard".into());
        }
        let (mut o, id) = deploy(&prof, BackendKind::Mem(MemConfig::ideal()));
        peer(&mut o, &id);
        let k = measure_kpis(o.instance(&id).unwrap()).unwrap();
        prop_assert_eq!(k.total, k.opd + k.dpd);
        prop_assert_eq!((k.opd, k.dpd), expected(&prof));
    }
}
