//! Reference descriptors, profiles, and instantiation parameters for the
//! two-gateway VPN service and the slice built around it.

use crate::descriptors::{parse_descriptor, Descriptor};

pub const WG_GATEWAY_VNFD: &str = include_str!("../fixtures/wg-gateway.vnfd.yaml");
pub const TEST_HOST_VNFD: &str = include_str!("../fixtures/test-host.vnfd.yaml");
pub const TWO_GATEWAY_NSD: &str = include_str!("../fixtures/two-gateway.nsd.yaml");
pub const EDGE_APP_NSD: &str = include_str!("../fixtures/edge-app.nsd.yaml");
pub const VPN_SLICE_NST: &str = include_str!("../fixtures/vpn-slice.nst.yaml");
pub const DEFAULT_PROFILE: &str = include_str!("../fixtures/default.profile.yaml");
pub const PREINSTALLED_PROFILE: &str = include_str!("../fixtures/preinstalled.profile.yaml");
pub const WG_PAIR_CONFIG: &str = include_str!("../fixtures/wg-pair.config.yaml");

fn parse_all(texts: &[&str]) -> Vec<Descriptor> {
    texts
        .iter()
        .map(|t| parse_descriptor(t).expect("fixture parses"))
        .collect()
}

/// Gateway VNFD, test-host VNFD, and the two-gateway NSD.
pub fn pair_catalog() -> Vec<Descriptor> {
    parse_all(&[WG_GATEWAY_VNFD, TEST_HOST_VNFD, TWO_GATEWAY_NSD])
}

/// [`pair_catalog`] plus the edge-app NSD and the slice template joining them.
pub fn slice_catalog() -> Vec<Descriptor> {
    parse_all(&[
        WG_GATEWAY_VNFD,
        TEST_HOST_VNFD,
        TWO_GATEWAY_NSD,
        EDGE_APP_NSD,
        VPN_SLICE_NST,
    ])
}
