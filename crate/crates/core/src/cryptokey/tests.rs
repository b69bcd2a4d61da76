use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use proptest::prelude::*;

use super::*;
use crate::transport::Endpoint;

fn net(s: &str) -> Ipv4Net {
    s.parse().unwrap()
}

fn ip(s: &str) -> Ipv4Addr {
    s.parse().unwrap()
}

fn ep(s: &str) -> Endpoint {
    s.parse().unwrap()
}

fn table(seed: u8) -> CryptokeyRoutingTable {
    CryptokeyRoutingTable::new("wg0", generate_keypair(Some([seed; 32])))
}

/// Oracle: longest prefix over a flat list of (prefix, owner).
fn linear(routes: &[(Ipv4Net, PublicKey)], dst: Ipv4Addr) -> Option<PublicKey> {
    routes
        .iter()
        .filter(|(n, _)| n.contains(&dst))
        .max_by_key(|(n, _)| n.prefix_len())
        .map(|(_, k)| *k)
}

/// gN65 (10.192.122.3, LAN 10.1.1.0/24) and HIgo (10.192.122.4, LAN
/// 10.2.2.0/24), peered both ways. HIgo listens at 192.95.5.69:41414 and
/// gN65 was last seen at 192.95.5.70:9000.
fn peered() -> (CryptokeyRoutingTable, CryptokeyRoutingTable) {
    let mut g = table(1);
    let mut h = table(2);
    g.set_tunnel_address(Some(ip("10.192.122.3")));
    g.set_local_prefixes(vec![net("10.1.1.0/24")]);
    h.set_tunnel_address(Some(ip("10.192.122.4")));
    h.set_local_prefixes(vec![net("10.2.2.0/24")]);
    g.add_peer(
        h.public_key(),
        &[net("10.192.122.4/32"), net("10.2.2.0/24")],
        Some(ep("192.95.5.69:41414")),
    )
    .unwrap();
    h.add_peer(
        g.public_key(),
        &[net("10.192.122.3/32"), net("10.1.1.0/24")],
        Some(ep("192.95.5.70:9000")),
    )
    .unwrap();
    (g, h)
}

#[test]
fn routes_destination_to_peer_key() {
    let mut t = table(1);
    let trmv = generate_keypair(Some([3; 32])).public();
    t.add_peer(trmv, &[net("10.192.122.4/32")], None).unwrap();
    assert_eq!(t.lookup_by_ip(ip("10.192.122.4")), Ok(trmv));
    assert_eq!(
        t.lookup_by_ip(ip("10.192.122.5")),
        Err(CryptokeyError::NoPeer(ip("10.192.122.5")))
    );
}

#[test]
fn self_peering_and_empty_prefixes_rejected() {
    let mut t = table(1);
    let me = t.public_key();
    assert_eq!(
        t.add_peer(me, &[net("10.0.0.0/8")], None),
        Err(CryptokeyError::SelfPeer)
    );
    let other = table(2).public_key();
    assert_eq!(
        t.add_peer(other, &[], None),
        Err(CryptokeyError::EmptyAllowedIps)
    );
    assert_eq!(
        t.add_peer(PublicKey::from_bytes([0; 32]), &[net("10.0.0.0/8")], None),
        Err(CryptokeyError::WeakPublicKey)
    );
}

#[test]
fn exact_prefix_moves_to_new_peer() {
    let mut t = table(1);
    let (a, b) = (table(2).public_key(), table(3).public_key());
    t.add_peer(a, &[net("10.0.0.0/24"), net("10.9.0.0/16")], None)
        .unwrap();
    t.add_peer(b, &[net("10.0.0.0/24")], None).unwrap();
    assert_eq!(t.lookup_by_ip(ip("10.0.0.1")), Ok(b));
    assert_eq!(t.peer(&a).unwrap().allowed_ips, vec![net("10.9.0.0/16")]);
    let routes = t.routes();
    for probe in ["10.0.0.1", "10.9.1.1", "10.8.0.1"] {
        assert_eq!(t.lookup_by_ip(ip(probe)).ok(), linear(&routes, ip(probe)));
    }
}

#[test]
fn update_unions_prefixes_and_keeps_endpoint() {
    let mut t = table(1);
    let a = table(2).public_key();
    t.add_peer(a, &[net("10.0.0.0/24")], Some(ep("1.1.1.1:1")))
        .unwrap();
    t.add_peer(a, &[net("10.0.1.0/24")], None).unwrap();
    let p = t.peer(&a).unwrap();
    assert_eq!(p.allowed_ips, vec![net("10.0.0.0/24"), net("10.0.1.0/24")]);
    assert_eq!(p.endpoint, Some(ep("1.1.1.1:1")));
    t.add_peer(a, &[net("10.0.1.0/24")], Some(ep("2.2.2.2:2")))
        .unwrap();
    assert_eq!(t.endpoint_of(&a), Ok(Some(ep("2.2.2.2:2"))));
}

#[test]
fn del_peer_removes_routes_only_for_that_peer() {
    let mut t = table(1);
    let (a, b) = (table(2).public_key(), table(3).public_key());
    t.add_peer(a, &[net("10.0.0.0/8")], None).unwrap();
    t.add_peer(b, &[net("10.1.0.0/16")], None).unwrap();
    assert_eq!(t.lookup_by_ip(ip("10.1.2.3")), Ok(b));
    assert_eq!(t.lookup_by_ip(ip("10.2.0.1")), Ok(a));
    t.del_peer(&b).unwrap();
    assert_eq!(t.lookup_by_ip(ip("10.1.2.3")), Ok(a));
    assert_eq!(t.del_peer(&b), Err(CryptokeyError::UnknownPeer(b)));
    t.del_peer(&a).unwrap();
    assert!(matches!(
        t.lookup_by_ip(ip("10.1.2.3")),
        Err(CryptokeyError::NoPeer(_))
    ));
    assert_eq!(t.endpoint_of(&a), Err(CryptokeyError::UnknownPeer(a)));
}

#[test]
fn send_targets_configured_endpoint_with_increasing_counters() {
    let (mut g, h) = peered();
    let p = PlainPacket::new(ip("10.192.122.3"), ip("10.192.122.4"), b"ping".to_vec());
    let (e1, dst) = g.send(&p).unwrap();
    assert_eq!(dst, ep("192.95.5.69:41414"));
    let (e2, _) = g.send(&p).unwrap();
    assert_eq!(e2.counter, e1.counter + 1);
    assert_eq!(e1.ciphertext.len(), PACKET_OVERHEAD + 4 + TAG_LEN);
    assert_eq!(e1.receiver_key_id, h.public_key().key_id());
}

#[test]
fn send_errors() {
    let (mut g, h) = peered();
    let unroutable = PlainPacket::new(ip("10.192.122.3"), ip("8.8.8.8"), vec![]);
    assert_eq!(
        g.send(&unroutable).unwrap_err(),
        CryptokeyError::NoPeer(ip("8.8.8.8"))
    );
    let spoofed = PlainPacket::new(ip("10.2.2.9"), ip("10.192.122.4"), vec![]);
    assert!(matches!(
        g.send(&spoofed),
        Err(CryptokeyError::SourceNotLocal(_))
    ));
    let big = PlainPacket::new(
        ip("10.192.122.3"),
        ip("10.192.122.4"),
        vec![0; MAX_PAYLOAD + 1],
    );
    assert!(matches!(
        g.send(&big),
        Err(CryptokeyError::PayloadTooLarge(_))
    ));
    let mut t = table(5);
    t.set_tunnel_address(Some(ip("10.0.0.1")));
    t.add_peer(h.public_key(), &[net("10.0.0.2/32")], None)
        .unwrap();
    let p = PlainPacket::new(ip("10.0.0.1"), ip("10.0.0.2"), vec![]);
    assert_eq!(
        t.send(&p).unwrap_err(),
        CryptokeyError::NoEndpoint(h.public_key())
    );
    assert_eq!(t.tx_counter(&h.public_key()), Some(0));
}

#[test]
fn roaming_updates_endpoint_and_reply_follows() {
    let (mut g, mut h) = peered();
    let p = PlainPacket::new(ip("10.1.1.5"), ip("10.2.2.7"), b"hello".to_vec());
    let (env, _) = g.send(&p).unwrap();
    let roamed = ep("192.95.5.64:21841");
    assert_eq!(h.receive(&env, roamed).unwrap(), p);
    assert_eq!(h.endpoint_of(&g.public_key()), Ok(Some(roamed)));
    let reply = PlainPacket::new(ip("10.2.2.7"), ip("10.1.1.5"), b"back".to_vec());
    let (renv, dst) = h.send(&reply).unwrap();
    assert_eq!(dst, roamed);
    assert_eq!(g.receive(&renv, ep("192.95.5.69:41414")).unwrap(), reply);
}

#[test]
fn tamper_is_auth_failure_and_changes_nothing() {
    let (mut g, mut h) = peered();
    let p = PlainPacket::new(ip("10.192.122.3"), ip("10.192.122.4"), b"x".to_vec());
    let (mut env, _) = g.send(&p).unwrap();
    env.ciphertext[0] ^= 1;
    let before = h.clone();
    assert_eq!(
        h.receive(&env, ep("6.6.6.6:6")),
        Err(CryptokeyError::AuthFailure)
    );
    assert_eq!(h, before);
    let mut bytes = g.send(&p).unwrap().0.to_bytes();
    bytes[45] ^= 0x80; // counter is authenticated as associated data
    assert_eq!(
        h.receive_bytes(&bytes, ep("6.6.6.6:6")),
        Err(CryptokeyError::AuthFailure)
    );
    assert!(matches!(
        h.receive_bytes(&[1, 2, 3], ep("6.6.6.6:6")),
        Err(CryptokeyError::Malformed(_))
    ));
    assert_eq!(h, before);
}

#[test]
fn replay_is_rejected() {
    let (mut g, mut h) = peered();
    let p = PlainPacket::new(ip("10.192.122.3"), ip("10.192.122.4"), vec![]);
    let (e1, _) = g.send(&p).unwrap();
    let (e2, _) = g.send(&p).unwrap();
    let from = ep("192.95.5.70:9000");
    h.receive(&e2, from).unwrap();
    assert_eq!(
        h.receive(&e2, from),
        Err(CryptokeyError::ReplayRejected {
            counter: 2,
            watermark: 2
        })
    );
    assert!(matches!(
        h.receive(&e1, from),
        Err(CryptokeyError::ReplayRejected { .. })
    ));
}

#[test]
fn forged_inner_source_is_a_source_violation() {
    let (mut g, mut h) = peered();
    // 10.3.3.0/24 is local to gN65 but HIgo never assigned it to gN65.
    g.set_local_prefixes(vec![net("10.1.1.0/24"), net("10.3.3.0/24")]);
    let p = PlainPacket::new(ip("10.3.3.3"), ip("10.192.122.4"), vec![1]);
    let (env, _) = g.send(&p).unwrap();
    let before = h.clone();
    let err = h.receive(&env, ep("9.9.9.9:9")).unwrap_err();
    assert_eq!(err, CryptokeyError::SourceAddressViolation(ip("10.3.3.3")));
    assert_ne!(linear(&h.routes(), ip("10.3.3.3")), Some(g.public_key()));
    assert_eq!(h, before);
}

#[test]
fn unknown_sender_is_unknown_peer() {
    let (_, mut h) = peered();
    let mut c = table(9);
    c.set_tunnel_address(Some(ip("10.192.122.3")));
    c.add_peer(
        h.public_key(),
        &[net("10.192.122.4/32")],
        Some(ep("1.1.1.1:1")),
    )
    .unwrap();
    let (env, _) = c
        .send(&PlainPacket::new(
            ip("10.192.122.3"),
            ip("10.192.122.4"),
            vec![],
        ))
        .unwrap();
    assert_eq!(
        h.receive(&env, ep("1.1.1.1:1")),
        Err(CryptokeyError::UnknownPeer(c.public_key()))
    );
}

#[test]
fn serde_preserves_routing_and_sessions_rebuild() {
    let (mut g, h) = peered();
    let restored: CryptokeyRoutingTable =
        serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
    assert_eq!(restored, h);
    assert_eq!(restored.routes(), h.routes());
    let mut h = restored;
    let p = PlainPacket::new(ip("10.192.122.3"), ip("10.192.122.4"), vec![7]);
    let (env, _) = g.send(&p).unwrap();
    assert_eq!(h.receive(&env, ep("1.1.1.1:1")).unwrap(), p);
}

fn arb_payload() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(any::<u8>(), 0..512)
}

proptest! {
    #[test]
    fn round_trip(payloads in prop::collection::vec(arb_payload(), 1..8), host in 1u8..255) {
        let (mut g, mut h) = peered();
        for payload in payloads {
            let p = PlainPacket::new(ip("10.1.1.1"), Ipv4Addr::new(10, 2, 2, host), payload);
            let (env, _) = g.send(&p).unwrap();
            let bytes = env.to_bytes();
            prop_assert_eq!(h.receive_bytes(&bytes, ep("192.95.5.70:9000")).unwrap(), p);
        }
    }

    #[test]
    fn third_party_forgeries_fail(
        seed in any::<[u8; 32]>(),
        counter in any::<u64>(),
        ct in prop::collection::vec(any::<u8>(), TAG_LEN..TAG_LEN + 64),
        claim_g in any::<bool>(),
    ) {
        let (g, mut h) = peered();
        let c = generate_keypair(Some(seed));
        prop_assume!(c.public() != g.public_key() && c.public() != h.public_key());
        let before = h.clone();
        // C either claims to be gN65 (no key to seal with) or seals honestly
        // under its own key, which HIgo does not know.
        let env = EncryptedEnvelope {
            receiver_key_id: h.public_key().key_id(),
            sender_public_key: if claim_g { g.public_key() } else { c.public() },
            counter,
            ciphertext: ct,
        };
        let r = h.receive(&env, ep("6.6.6.6:6"));
        prop_assert!(matches!(r, Err(CryptokeyError::AuthFailure) | Err(CryptokeyError::UnknownPeer(_))), "{:?}", r);
        prop_assert_eq!(h, before);
    }

    #[test]
    fn endpoint_tracks_latest_authenticated_receive(
        steps in prop::collection::vec((1u16..u16::MAX, any::<bool>()), 1..20)
    ) {
        let (mut g, mut h) = peered();
        let mut expect = Some(ep("192.95.5.70:9000"));
        for (port, tamper) in steps {
            let from = Endpoint::new(ip("203.0.113.1"), port).unwrap();
            let (mut env, _) = g
                .send(&PlainPacket::new(ip("10.192.122.3"), ip("10.192.122.4"), vec![]))
                .unwrap();
            if tamper {
                env.ciphertext[0] ^= 0xff;
                prop_assert!(h.receive(&env, from).is_err());
            } else {
                h.receive(&env, from).unwrap();
                expect = Some(from);
            }
            prop_assert_eq!(h.endpoint_of(&g.public_key()).unwrap(), expect);
        }
    }

    #[test]
    fn table_lookup_matches_oracle(
        prefixes in prop::collection::vec((any::<u32>(), 0u8..=32, 0usize..4), 1..64),
        probes in prop::collection::vec(any::<u32>(), 1..64),
    ) {
        let mut t = table(1);
        let keys: Vec<PublicKey> = (10..14).map(|s| table(s).public_key()).collect();
        let mut oracle: Vec<(Ipv4Net, PublicKey)> = Vec::new();
        for (addr, len, who) in prefixes {
            let n = Ipv4Net::new(addr.into(), len).unwrap().trunc();
            t.add_peer(keys[who], &[n], None).unwrap();
            oracle.retain(|(m, _)| *m != n);
            oracle.push((n, keys[who]));
        }
        for (n, k) in &oracle {
            // Probe every prefix's own network address as well as random ones.
            prop_assert_eq!(t.lookup_by_ip(n.network()).ok(), linear(&oracle, n.network()));
            prop_assert!(t.peer(k).unwrap().allowed_ips.contains(n));
        }
        for p in probes {
            let a = Ipv4Addr::from(p);
            prop_assert_eq!(t.lookup_by_ip(a).ok(), linear(&oracle, a));
        }
    }
}
