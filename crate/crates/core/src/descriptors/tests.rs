use proptest::prelude::*;

use super::*;
use crate::fixtures;

const MINIMAL_GW: &str = r#"
kind: vnfd
schema-version: 1
id: wg-min
name: minimal gateway
mgmt-interface: eth0
vdus:
  - name: gw
    image: ubuntu
    cloud-init-packages: [wireguard]
    interfaces:
      - name: eth0
        network: tunnel
initial-config-primitives:
  - name: generate-keys
  - name: start-wg
config-primitives:
  - name: add-peer
    params:
      - {name: public-key, type: string}
      - {name: allowed-ips, type: cidr}
      - {name: endpoint, type: endpoint, optional: true}
  - name: del-peer
    params:
      - {name: public-key, type: string}
  - name: get-public-key
"#;

#[test]
fn minimal_gateway_counts_and_round_trip() {
    let d = parse_vnfd(MINIMAL_GW).unwrap();
    assert_eq!(d.initial_config_primitives.len(), 2);
    assert_eq!(d.config_primitives.len(), 3);
    assert_eq!(parse_vnfd(&vnfd_to_yaml(&d)).unwrap(), d);
}

#[test]
fn missing_id_is_schema_error_at_id() {
    let text = MINIMAL_GW.replace("id: wg-min\n", "");
    let err = parse_vnfd(&text).unwrap_err();
    assert_eq!(err.path(), Some("/id"));
}

#[test]
fn dangling_mgmt_interface() {
    let text = MINIMAL_GW.replace("mgmt-interface: eth0", "mgmt-interface: eth9");
    let err = parse_vnfd(&text).unwrap_err();
    assert_eq!(err.path(), Some("/mgmt-interface"));
}

#[test]
fn unknown_field_is_rejected() {
    let text = MINIMAL_GW.replace(
        "name: minimal gateway",
        "name: minimal gateway\nflavor: m1.small",
    );
    let err = parse_vnfd(&text).unwrap_err();
    assert_eq!(err.path(), Some("/flavor"));
    assert!(err.to_string().contains("unknown field"));
}

#[test]
fn syntax_error_carries_position() {
    let err = parse_vnfd("kind: vnfd\nvdus: [a, b\n").unwrap_err();
    match err {
        DescriptorError::Syntax(s) => assert!(s.pos.line >= 1),
        other => panic!("expected syntax error, got {other}"),
    }
}

#[test]
fn wrong_kind_is_rejected() {
    let err = parse_nsd(MINIMAL_GW).unwrap_err();
    assert_eq!(err.path(), Some("/kind"));
}

#[test]
fn duplicate_param_name() {
    let text = MINIMAL_GW.replace(
        "{name: allowed-ips, type: cidr}",
        "{name: public-key, type: cidr}",
    );
    let err = parse_vnfd(&text).unwrap_err();
    assert!(err.to_string().contains("duplicate parameter name"));
}

#[test]
fn two_gateway_nsd_has_three_links() {
    let n = parse_nsd(fixtures::TWO_GATEWAY_NSD).unwrap();
    let names: Vec<_> = n.virtual_links.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, ["data-west", "tunnel", "data-east"]);
    let tunnel = &n.virtual_links[1];
    let members: Vec<_> = tunnel.attachments.iter().map(|a| a.member).collect();
    assert_eq!(members, [1, 2]);
}

#[test]
fn nsd_attachment_to_undeclared_member() {
    let text = fixtures::TWO_GATEWAY_NSD.replace(
        "{member-index: 4, interface: eth0}",
        "{member-index: 9, interface: eth0}",
    );
    let err = parse_nsd(&text).unwrap_err();
    assert!(
        err.to_string().contains("undeclared member index 9"),
        "{err}"
    );
}

#[test]
fn nst_fixture_validates_with_members() {
    let t = parse_nst(fixtures::VPN_SLICE_NST).unwrap();
    assert_eq!(t.slice_links.len(), 1);
    let report = validate_catalog(&fixtures::slice_catalog());
    assert!(report.ok, "{report}");
}

#[test]
fn nst_unexposed_connection_point() {
    let text =
        fixtures::VPN_SLICE_NST.replace("connection-point: east-lan", "connection-point: tunnel");
    let t = parse_nst(&text).unwrap();
    let mut all = fixtures::slice_catalog();
    all.retain(|d| d.kind() != DescriptorKind::Nst);
    all.push(t.into());
    let report = validate_catalog(&all);
    assert!(!report.ok);
    assert!(report
        .errors()
        .any(|i| i.message.contains("unexposed connection point")));
}

#[test]
fn nst_link_to_non_member_is_schema_error() {
    let text = fixtures::VPN_SLICE_NST.replace(
        "{nsd-id: edge-app, connection-point: lan}",
        "{nsd-id: other, connection-point: lan}",
    );
    assert!(parse_nst(&text).is_err());
}

#[test]
fn nst_without_members() {
    let text = fixtures::VPN_SLICE_NST.replace("ns-members: [wg-pair, edge-app]", "ns-members: []");
    let err = parse_nst(&text).unwrap_err();
    assert_eq!(err.path(), Some("/ns-members"));
}

#[test]
fn catalog_with_gateway_and_pair_is_ok() {
    let report = validate_catalog(&fixtures::pair_catalog());
    assert!(report.ok, "{report}");
    assert!(report.issues.is_empty());
}

#[test]
fn unresolved_vnfd_ref() {
    let mut all = fixtures::pair_catalog();
    all.retain(|d| d.id() != "wg-gw");
    let report = validate_catalog(&all);
    assert!(!report.ok);
    assert!(report
        .errors()
        .any(|i| i.message.contains("unresolved vnfd ref")));
}

#[test]
fn duplicate_vnfd_id() {
    let mut all = fixtures::pair_catalog();
    let mut twin = parse_vnfd(fixtures::TEST_HOST_VNFD).unwrap();
    twin.id = "wg-gw".into();
    all.push(twin.into());
    let report = validate_catalog(&all);
    assert!(report.errors().any(|i| i.message == "duplicate id"));
}

#[test]
fn unattached_interface_is_an_error() {
    let text =
        fixtures::TWO_GATEWAY_NSD.replace("      - {member-index: 3, interface: eth0}\n", "");
    let mut all = fixtures::pair_catalog();
    all.retain(|d| d.kind() != DescriptorKind::Nsd);
    all.push(parse_nsd(&text).unwrap().into());
    let report = validate_catalog(&all);
    assert!(report.errors().any(|i| i
        .message
        .contains("unattached interface `eth0` on member 3")));
}

#[test]
fn catalog_insert_is_immutable() {
    let mut c = Catalog::new();
    let v = parse_vnfd(fixtures::WG_GATEWAY_VNFD).unwrap();
    c.insert(v.clone().into()).unwrap();
    c.insert(v.clone().into()).unwrap();
    let mut changed = v;
    changed.name = "other".into();
    assert!(matches!(
        c.insert(changed.into()),
        Err(CatalogError::DuplicateId { .. })
    ));
}

#[test]
fn key_order_does_not_matter() {
    let a = "kind: nst\nschema-version: 1\nid: s\nname: n\nns-members: [x]\n";
    let b = "ns-members: [x]\nname: n\nid: s\nschema-version: 1\nkind: nst\n";
    assert_eq!(parse_nst(a).unwrap(), parse_nst(b).unwrap());
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,8}"
}

fn text() -> impl Strategy<Value = String> {
    // Includes characters that force quoting.
    "[ -~]{0,16}"
}

prop_compose! {
    fn arb_nsd()(
        id in ident(),
        name in text(),
        members in prop::collection::btree_map(0u32..50, ident(), 1..5),
        links in prop::collection::vec((ident(), any::<u32>(), 8u8..=30), 0..4),
        cps in prop::collection::vec(ident(), 0..3),
    ) -> NsDescriptor {
        let vnf_members: Vec<VnfMember> = members
            .into_iter()
            .map(|(index, vnfd_id)| VnfMember { index, vnfd_id })
            .collect();
        let mut seen = std::collections::BTreeSet::new();
        let virtual_links = links
            .into_iter()
            .filter(|(n, ..)| seen.insert(n.clone()))
            .enumerate()
            .map(|(i, (n, addr, len))| VirtualLinkSpec {
                name: n,
                cidr: ipnet::Ipv4Net::new(addr.into(), len).unwrap().trunc(),
                attachments: vec![Attachment {
                    member: vnf_members[i % vnf_members.len()].index,
                    interface: format!("eth{i}"),
                }],
            })
            .collect();
        let mut seen = std::collections::BTreeSet::new();
        let connection_points = cps
            .into_iter()
            .filter(|n| seen.insert(n.clone()))
            .map(|n| ConnectionPoint { name: n, member: vnf_members[0].index, interface: "eth0".into() })
            .collect();
        NsDescriptor { id, name, vnf_members, virtual_links, connection_points }
    }
}

prop_compose! {
    fn arb_vnfd()(
        id in ident(),
        name in text(),
        image in text(),
        packages in prop::collection::vec(ident(), 0..3),
        fwd in any::<bool>(),
        prims in prop::collection::btree_set(ident(), 0..4),
        desc in text(),
        default in proptest::option::of(text()),
    ) -> VnfDescriptor {
        let params = vec![ParamSpec { name: "p".into(), kind: ParamType::Cidr, default, optional: fwd }];
        let config_primitives = prims
            .into_iter()
            .map(|n| PrimitiveSpec { name: n, params: params.clone(), description: desc.clone() })
            .collect();
        VnfDescriptor {
            id,
            name,
            vdus: vec![VduSpec {
                name: "vdu".into(),
                image,
                cloud_init_packages: packages,
                interfaces: vec![InterfaceSpec { name: "eth0".into(), network: "net".into() }],
                requires_forwarding: fwd,
            }],
            mgmt_interface: "eth0".into(),
            initial_config_primitives: vec![],
            config_primitives,
        }
    }
}

proptest! {
    #[test]
    fn nsd_round_trip(d in arb_nsd()) {
        let text = nsd_to_yaml(&d);
        prop_assert_eq!(parse_nsd(&text).unwrap(), d);
    }

    #[test]
    fn vnfd_round_trip(d in arb_vnfd()) {
        let text = vnfd_to_yaml(&d);
        prop_assert_eq!(parse_vnfd(&text).unwrap(), d);
    }
}
