use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use x25519_dalek::{PublicKey as DalekPublic, StaticSecret};

pub const KEY_LEN: usize = 32;

/// An X25519 public key. Displayed and parsed as standard base64.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey([u8; KEY_LEN]);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid public key `{0}`: expected 32 bytes of standard base64")]
pub struct KeyParseError(pub String);

impl PublicKey {
    pub const fn from_bytes(b: [u8; KEY_LEN]) -> Self {
        PublicKey(b)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    /// First 8 bytes, used as the receiver id on the wire.
    pub fn key_id(&self) -> [u8; 8] {
        self.0[..8].try_into().expect("32 > 8")
    }

    /// Abbreviated form for logs, e.g. `gN65...z6EA`.
    pub fn short(&self) -> String {
        let s = self.to_string();
        format!("{}...{}", &s[..4], &s[s.len() - 5..s.len() - 1])
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&B64.encode(self.0))
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({self})")
    }
}

impl FromStr for PublicKey {
    type Err = KeyParseError;
    fn from_str(s: &str) -> Result<Self, KeyParseError> {
        let bytes = B64
            .decode(s.trim())
            .map_err(|_| KeyParseError(s.to_string()))?;
        let arr: [u8; KEY_LEN] = bytes.try_into().map_err(|_| KeyParseError(s.to_string()))?;
        Ok(PublicKey(arr))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

fn clamp(mut k: [u8; KEY_LEN]) -> [u8; KEY_LEN] {
    k[0] &= 248;
    k[31] &= 127;
    k[31] |= 64;
    k
}

/// A static X25519 keypair. `Debug` never prints the private half.
///
/// Serializes the private scalar (base64) so gateway state survives a
/// restart of the orchestrator; no log, report, or action output does.
#[derive(Clone)]
pub struct KeyPair {
    secret: StaticSecret,
    public: PublicKey,
}

impl KeyPair {
    /// The stored private scalar is clamped, so `public` is a plain
    /// base-point multiplication of it.
    pub fn from_private(private: [u8; KEY_LEN]) -> Self {
        let secret = StaticSecret::from(clamp(private));
        let public = PublicKey(DalekPublic::from(&secret).to_bytes());
        KeyPair { secret, public }
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn private_bytes(&self) -> [u8; KEY_LEN] {
        self.secret.to_bytes()
    }

    /// Raw X25519 shared secret with `peer`.
    pub fn dh(&self, peer: &PublicKey) -> [u8; KEY_LEN] {
        self.secret
            .diffie_hellman(&DalekPublic::from(peer.0))
            .to_bytes()
    }
}

/// Seeded calls are deterministic; unseeded calls draw from the OS CSPRNG.
pub fn generate_keypair(seed: Option<[u8; KEY_LEN]>) -> KeyPair {
    let private = seed.unwrap_or_else(|| {
        let mut b = [0u8; KEY_LEN];
        rand::rngs::OsRng.fill_bytes(&mut b);
        b
    });
    KeyPair::from_private(private)
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public && self.secret.to_bytes() == other.secret.to_bytes()
    }
}

impl Eq for KeyPair {}

#[derive(Serialize, Deserialize)]
struct KeyPairRepr {
    #[serde(rename = "private-key")]
    private: String,
}

impl Serialize for KeyPair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        KeyPairRepr {
            private: B64.encode(self.secret.to_bytes()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KeyPair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = KeyPairRepr::deserialize(d)?;
        let bytes = B64.decode(&r.private).map_err(serde::de::Error::custom)?;
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("private key must be 32 bytes"))?;
        Ok(KeyPair::from_private(arr))
    }
}
