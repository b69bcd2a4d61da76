use std::net::Ipv4Addr;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use sha2::Sha256;

use super::keys::{KeyPair, PublicKey, KEY_LEN};

pub const MAGIC: u16 = 0x5747;
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 2 + 1 + 8 + KEY_LEN + 8;
pub const TAG_LEN: usize = 16;
/// Largest datagram either transport will carry.
pub const MAX_DATAGRAM: usize = 65_507;
/// Serialized inner packet: src ‖ dst ‖ payload.
pub const PACKET_OVERHEAD: usize = 8;
pub const MAX_PAYLOAD: usize = MAX_DATAGRAM - HEADER_LEN - TAG_LEN - PACKET_OVERHEAD;

const SALT: &[u8] = b"slicevpn cryptokey v1";
const INIT_TO_RESP: &[u8] = b"init->resp";
const RESP_TO_INIT: &[u8] = b"resp->init";

/// An inner (overlay) IPv4 packet, reduced to addresses and payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainPacket {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub payload: Vec<u8>,
}

impl PlainPacket {
    pub fn new(src_ip: Ipv4Addr, dst_ip: Ipv4Addr, payload: impl Into<Vec<u8>>) -> Self {
        PlainPacket {
            src_ip,
            dst_ip,
            payload: payload.into(),
        }
    }

    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PACKET_OVERHEAD + self.payload.len());
        out.extend_from_slice(&self.src_ip.octets());
        out.extend_from_slice(&self.dst_ip.octets());
        out.extend_from_slice(&self.payload);
        out
    }

    pub(crate) fn decode(b: &[u8]) -> Option<Self> {
        if b.len() < PACKET_OVERHEAD {
            return None;
        }
        let ip = |s: &[u8]| Ipv4Addr::new(s[0], s[1], s[2], s[3]);
        Some(PlainPacket {
            src_ip: ip(&b[0..4]),
            dst_ip: ip(&b[4..8]),
            payload: b[8..].to_vec(),
        })
    }
}

/// Wire message: `magic ‖ version ‖ receiver_key_id ‖ sender ‖ counter ‖ ciphertext`,
/// big-endian. The first 51 bytes are authenticated as associated data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedEnvelope {
    pub receiver_key_id: [u8; 8],
    pub sender_public_key: PublicKey,
    pub counter: u64,
    pub ciphertext: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("datagram shorter than envelope header and tag")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
}

impl EncryptedEnvelope {
    pub fn header(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..2].copy_from_slice(&MAGIC.to_be_bytes());
        h[2] = VERSION;
        h[3..11].copy_from_slice(&self.receiver_key_id);
        h[11..43].copy_from_slice(self.sender_public_key.as_bytes());
        h[43..51].copy_from_slice(&self.counter.to_be_bytes());
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, DecodeError> {
        if b.len() < HEADER_LEN + TAG_LEN {
            return Err(DecodeError::Truncated);
        }
        if u16::from_be_bytes([b[0], b[1]]) != MAGIC {
            return Err(DecodeError::BadMagic);
        }
        if b[2] != VERSION {
            return Err(DecodeError::BadVersion(b[2]));
        }
        Ok(EncryptedEnvelope {
            receiver_key_id: b[3..11].try_into().expect("8 bytes"),
            sender_public_key: PublicKey::from_bytes(b[11..43].try_into().expect("32 bytes")),
            counter: u64::from_be_bytes(b[43..51].try_into().expect("8 bytes")),
            ciphertext: b[HEADER_LEN..].to_vec(),
        })
    }
}

/// Directional AEAD keys shared by one pair of static keys.
///
/// Derived from the static-static X25519 secret with HKDF-SHA256; the info
/// string binds the direction label and both public keys in ascending
/// order. The lower key is the initiator. There is no ephemeral exchange,
/// so sessions are not forward-secret.
pub(crate) struct Session {
    send: ChaCha20Poly1305,
    recv: ChaCha20Poly1305,
}

impl Session {
    /// `None` when the shared secret is all zero (low-order peer key).
    pub(crate) fn derive(local: &KeyPair, peer: &PublicKey) -> Option<Session> {
        let shared = local.dh(peer);
        if shared.iter().all(|&b| b == 0) {
            return None;
        }
        let me = local.public();
        let (lo, hi) = if me < *peer { (me, *peer) } else { (*peer, me) };
        let hk = Hkdf::<Sha256>::new(Some(SALT), &shared);
        let key = |label: &[u8]| {
            let mut info = Vec::with_capacity(label.len() + 2 * KEY_LEN);
            info.extend_from_slice(label);
            info.extend_from_slice(lo.as_bytes());
            info.extend_from_slice(hi.as_bytes());
            let mut k = [0u8; 32];
            hk.expand(&info, &mut k)
                .expect("32 bytes is a valid HKDF length");
            ChaCha20Poly1305::new(Key::from_slice(&k))
        };
        let (i2r, r2i) = (key(INIT_TO_RESP), key(RESP_TO_INIT));
        Some(if me == lo {
            Session {
                send: i2r,
                recv: r2i,
            }
        } else {
            Session {
                send: r2i,
                recv: i2r,
            }
        })
    }

    pub(crate) fn seal(&self, header: &[u8], counter: u64, plain: &[u8]) -> Vec<u8> {
        self.send
            .encrypt(
                &nonce(counter),
                Payload {
                    msg: plain,
                    aad: header,
                },
            )
            .expect("ChaCha20-Poly1305 encryption cannot fail for in-bound lengths")
    }

    pub(crate) fn open(&self, header: &[u8], counter: u64, ct: &[u8]) -> Option<Vec<u8>> {
        self.recv
            .decrypt(
                &nonce(counter),
                Payload {
                    msg: ct,
                    aad: header,
                },
            )
            .ok()
    }
}

fn nonce(counter: u64) -> Nonce {
    let mut n = [0u8; 12];
    n[4..].copy_from_slice(&counter.to_be_bytes());
    *Nonce::from_slice(&n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cryptokey::generate_keypair;

    #[test]
    fn max_payload_fills_one_datagram() {
        assert_eq!(HEADER_LEN, 51);
        assert_eq!(
            HEADER_LEN + TAG_LEN + PACKET_OVERHEAD + MAX_PAYLOAD,
            MAX_DATAGRAM
        );
    }

    #[test]
    fn envelope_bytes_round_trip() {
        let k = generate_keypair(Some([1; 32]));
        let e = EncryptedEnvelope {
            receiver_key_id: [9; 8],
            sender_public_key: k.public(),
            counter: 0x0102030405060708,
            ciphertext: vec![0xaa; 20],
        };
        let b = e.to_bytes();
        assert_eq!(&b[..3], &[0x57, 0x47, 0x01]);
        assert_eq!(&b[43..51], &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(EncryptedEnvelope::from_bytes(&b).unwrap(), e);
        assert_eq!(
            EncryptedEnvelope::from_bytes(&b[..60]),
            Err(DecodeError::Truncated)
        );
    }

    #[test]
    fn directions_differ_and_pair_agrees() {
        let a = generate_keypair(Some([1; 32]));
        let b = generate_keypair(Some([2; 32]));
        let sa = Session::derive(&a, &b.public()).unwrap();
        let sb = Session::derive(&b, &a.public()).unwrap();
        let ct = sa.seal(b"hdr", 1, b"hello");
        assert_eq!(ct.len(), 5 + TAG_LEN);
        assert_eq!(sb.open(b"hdr", 1, &ct).as_deref(), Some(&b"hello"[..]));
        // A cannot open its own send direction.
        assert!(sa.open(b"hdr", 1, &ct).is_none());
        assert!(sb.open(b"hdX", 1, &ct).is_none());
        assert!(sb.open(b"hdr", 2, &ct).is_none());
    }

    #[test]
    fn low_order_peer_rejected() {
        let a = generate_keypair(Some([1; 32]));
        assert!(Session::derive(&a, &PublicKey::from_bytes([0; 32])).is_none());
    }
}
