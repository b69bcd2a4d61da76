//! Descriptor-driven VPN-as-a-Service orchestration simulator.
//!
//! An orchestrator ([`lifecycle`]) onboards VNF/NS/slice descriptors
//! ([`descriptors`]), deploys them onto a deterministic simulated VIM
//! ([`vimsim`]), and configures WireGuard-style gateways whose datapath
//! ([`cryptokey`], [`tunnel`]) runs over an in-memory or UDP datagram
//! transport ([`transport`]). [`kpi`] derives service-creation delays from
//! instance event logs and benchmarks the live tunnel.

pub mod clock;
pub mod cryptokey;
pub mod descriptors;
pub mod fixtures;
pub mod kpi;
pub mod lifecycle;
pub mod transport;
pub mod tunnel;
pub mod vimsim;
pub mod yaml;
