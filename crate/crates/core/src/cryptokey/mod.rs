//! Cryptokey routing: static X25519 keys, an allowed-IPs table mapping inner
//! prefixes to peer keys, and an AEAD envelope for the datapath.
//!
//! Sessions use the static-static Diffie-Hellman secret directly (through
//! HKDF); there is no handshake, no ephemeral key, and no rekeying. The
//! envelope is not wire-compatible with WireGuard.

mod envelope;
mod keys;
mod table;
mod trie;

use std::net::Ipv4Addr;

pub use envelope::{
    DecodeError, EncryptedEnvelope, PlainPacket, HEADER_LEN, MAX_DATAGRAM, MAX_PAYLOAD,
    PACKET_OVERHEAD, TAG_LEN,
};
pub use keys::{generate_keypair, KeyPair, KeyParseError, PublicKey, KEY_LEN};
pub use table::{CryptokeyRoutingTable, PeerEntry};
pub use trie::AllowedIps;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptokeyError {
    #[error("cannot peer with own public key")]
    SelfPeer,
    #[error("allowed-ips must not be empty")]
    EmptyAllowedIps,
    #[error("public key yields an all-zero shared secret")]
    WeakPublicKey,
    #[error("unknown peer {0}")]
    UnknownPeer(PublicKey),
    #[error("no peer routes {0}")]
    NoPeer(Ipv4Addr),
    #[error("peer {0} has no known endpoint")]
    NoEndpoint(PublicKey),
    #[error("source {0} is not a local address of this gateway")]
    SourceNotLocal(Ipv4Addr),
    #[error("payload of {0} bytes exceeds {MAX_PAYLOAD}")]
    PayloadTooLarge(usize),
    #[error("malformed envelope: {0}")]
    Malformed(#[from] DecodeError),
    #[error("authentication failed")]
    AuthFailure,
    #[error("replayed counter {counter} (watermark {watermark})")]
    ReplayRejected { counter: u64, watermark: u64 },
    #[error("inner source {0} does not route to the sending peer")]
    SourceAddressViolation(Ipv4Addr),
    #[error("send counter exhausted")]
    CounterExhausted,
}

#[cfg(test)]
mod tests;
