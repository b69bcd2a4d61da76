use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::net::Ipv4Addr;
use std::sync::Arc;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use super::envelope::{EncryptedEnvelope, PlainPacket, Session, MAX_PAYLOAD};
use super::keys::{KeyPair, PublicKey};
use super::trie::AllowedIps;
use super::CryptokeyError;
use crate::transport::Endpoint;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerEntry {
    pub public_key: PublicKey,
    /// Sorted. May become empty if every prefix was reassigned to other
    /// peers; such a peer can still be heard from but never routed to.
    pub allowed_ips: Vec<Ipv4Net>,
    pub endpoint: Option<Endpoint>,
    pub rx_counter_high_watermark: u64,
}

/// One gateway's cryptokey routing table: its static keypair, the peers it
/// talks to, and which inner prefixes each peer owns.
#[derive(Clone, Serialize, Deserialize)]
#[serde(from = "TableRepr", into = "TableRepr")]
pub struct CryptokeyRoutingTable {
    interface_name: String,
    keypair: KeyPair,
    listen_endpoint: Option<Endpoint>,
    tunnel_address: Option<Ipv4Addr>,
    local_prefixes: Vec<Ipv4Net>,
    peers: BTreeMap<PublicKey, PeerEntry>,
    tx_counters: BTreeMap<PublicKey, u64>,
    routes: AllowedIps<PublicKey>,
    sessions: HashMap<PublicKey, Arc<Session>>,
}

impl CryptokeyRoutingTable {
    pub fn new(interface_name: impl Into<String>, keypair: KeyPair) -> Self {
        CryptokeyRoutingTable {
            interface_name: interface_name.into(),
            keypair,
            listen_endpoint: None,
            tunnel_address: None,
            local_prefixes: Vec::new(),
            peers: BTreeMap::new(),
            tx_counters: BTreeMap::new(),
            routes: AllowedIps::new(),
            sessions: HashMap::new(),
        }
    }

    pub fn interface_name(&self) -> &str {
        &self.interface_name
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public()
    }

    pub fn listen_endpoint(&self) -> Option<Endpoint> {
        self.listen_endpoint
    }

    pub fn set_listen_endpoint(&mut self, e: Option<Endpoint>) {
        self.listen_endpoint = e;
    }

    pub fn tunnel_address(&self) -> Option<Ipv4Addr> {
        self.tunnel_address
    }

    pub fn set_tunnel_address(&mut self, a: Option<Ipv4Addr>) {
        self.tunnel_address = a;
    }

    /// Inner prefixes this gateway may source traffic from, besides its
    /// tunnel address (the LANs behind it).
    pub fn local_prefixes(&self) -> &[Ipv4Net] {
        &self.local_prefixes
    }

    pub fn set_local_prefixes(&mut self, p: Vec<Ipv4Net>) {
        self.local_prefixes = p;
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerEntry> {
        self.peers.values()
    }

    pub fn peer(&self, key: &PublicKey) -> Option<&PeerEntry> {
        self.peers.get(key)
    }

    pub fn tx_counter(&self, key: &PublicKey) -> Option<u64> {
        self.tx_counters.get(key).copied()
    }

    /// `(prefix, owner)` pairs in prefix order.
    pub fn routes(&self) -> Vec<(Ipv4Net, PublicKey)> {
        self.routes
            .iter()
            .into_iter()
            .map(|(n, k)| (n, *k))
            .collect()
    }

    fn session(&mut self, key: &PublicKey) -> Result<Arc<Session>, CryptokeyError> {
        if let Some(s) = self.sessions.get(key) {
            return Ok(s.clone());
        }
        let s = Arc::new(Session::derive(&self.keypair, key).ok_or(CryptokeyError::WeakPublicKey)?);
        self.sessions.insert(*key, s.clone());
        Ok(s)
    }

    /// Adds or updates a peer. Prefixes already owned by another peer move
    /// to this one; an existing peer keeps its prefixes (union) and has its
    /// endpoint overwritten only when one is given.
    pub fn add_peer(
        &mut self,
        key: PublicKey,
        allowed_ips: &[Ipv4Net],
        endpoint: Option<Endpoint>,
    ) -> Result<(), CryptokeyError> {
        if key == self.public_key() {
            return Err(CryptokeyError::SelfPeer);
        }
        if allowed_ips.is_empty() {
            return Err(CryptokeyError::EmptyAllowedIps);
        }
        self.session(&key)?;
        let entry = self.peers.entry(key).or_insert_with(|| PeerEntry {
            public_key: key,
            allowed_ips: Vec::new(),
            endpoint: None,
            rx_counter_high_watermark: 0,
        });
        if endpoint.is_some() {
            entry.endpoint = endpoint;
        }
        for net in allowed_ips.iter().map(Ipv4Net::trunc) {
            if !entry.allowed_ips.contains(&net) {
                entry.allowed_ips.push(net);
            }
        }
        entry.allowed_ips.sort();
        self.tx_counters.entry(key).or_insert(0);
        for net in allowed_ips.iter().map(Ipv4Net::trunc) {
            if let Some(prev) = self.routes.insert(net, key) {
                if prev != key {
                    if let Some(p) = self.peers.get_mut(&prev) {
                        p.allowed_ips.retain(|n| *n != net);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn del_peer(&mut self, key: &PublicKey) -> Result<PeerEntry, CryptokeyError> {
        let entry = self
            .peers
            .remove(key)
            .ok_or(CryptokeyError::UnknownPeer(*key))?;
        self.routes.retain(|_, owner| owner != key);
        self.tx_counters.remove(key);
        self.sessions.remove(key);
        Ok(entry)
    }

    pub fn lookup_by_ip(&self, dst: Ipv4Addr) -> Result<PublicKey, CryptokeyError> {
        self.routes
            .longest_match(dst)
            .map(|(_, k)| *k)
            .ok_or(CryptokeyError::NoPeer(dst))
    }

    pub fn endpoint_of(&self, key: &PublicKey) -> Result<Option<Endpoint>, CryptokeyError> {
        self.peers
            .get(key)
            .map(|p| p.endpoint)
            .ok_or(CryptokeyError::UnknownPeer(*key))
    }

    fn is_local_source(&self, ip: Ipv4Addr) -> bool {
        self.tunnel_address == Some(ip) || self.local_prefixes.iter().any(|n| n.contains(&ip))
    }

    /// Encrypts `packet` for the peer owning its destination and returns the
    /// envelope with the outer endpoint to send it to.
    pub fn send(
        &mut self,
        packet: &PlainPacket,
    ) -> Result<(EncryptedEnvelope, Endpoint), CryptokeyError> {
        if packet.payload.len() > MAX_PAYLOAD {
            return Err(CryptokeyError::PayloadTooLarge(packet.payload.len()));
        }
        if !self.is_local_source(packet.src_ip) {
            return Err(CryptokeyError::SourceNotLocal(packet.src_ip));
        }
        let key = self.lookup_by_ip(packet.dst_ip)?;
        let endpoint = self.peers[&key]
            .endpoint
            .ok_or(CryptokeyError::NoEndpoint(key))?;
        let session = self.session(&key)?;
        let tx = self.tx_counters.entry(key).or_insert(0);
        let counter = tx.checked_add(1).ok_or(CryptokeyError::CounterExhausted)?;
        *tx = counter;
        let mut env = EncryptedEnvelope {
            receiver_key_id: key.key_id(),
            sender_public_key: self.public_key(),
            counter,
            ciphertext: Vec::new(),
        };
        env.ciphertext = session.seal(&env.header(), counter, &packet.encode());
        Ok((env, endpoint))
    }

    /// Authenticates and decrypts an envelope received from `outer_src`.
    ///
    /// The table changes only if every check passes: the sender is a known
    /// peer, the AEAD tag verifies, the counter is above the watermark, and
    /// the inner source address routes back to the sender. Then the
    /// watermark advances and the peer's endpoint becomes `outer_src`.
    pub fn receive(
        &mut self,
        env: &EncryptedEnvelope,
        outer_src: Endpoint,
    ) -> Result<PlainPacket, CryptokeyError> {
        if env.receiver_key_id != self.public_key().key_id() {
            return Err(CryptokeyError::AuthFailure);
        }
        let sender = env.sender_public_key;
        if !self.peers.contains_key(&sender) {
            return Err(CryptokeyError::UnknownPeer(sender));
        }
        let session = self.session(&sender)?;
        let plain = session
            .open(&env.header(), env.counter, &env.ciphertext)
            .ok_or(CryptokeyError::AuthFailure)?;
        let packet = PlainPacket::decode(&plain).ok_or(CryptokeyError::AuthFailure)?;
        let peer = &self.peers[&sender];
        if env.counter <= peer.rx_counter_high_watermark {
            return Err(CryptokeyError::ReplayRejected {
                counter: env.counter,
                watermark: peer.rx_counter_high_watermark,
            });
        }
        match self.routes.longest_match(packet.src_ip) {
            Some((_, owner)) if *owner == sender => {}
            _ => return Err(CryptokeyError::SourceAddressViolation(packet.src_ip)),
        }
        let peer = self.peers.get_mut(&sender).expect("checked above");
        peer.rx_counter_high_watermark = env.counter;
        peer.endpoint = Some(outer_src);
        Ok(packet)
    }

    /// [`receive`](Self::receive) on raw datagram bytes.
    pub fn receive_bytes(
        &mut self,
        bytes: &[u8],
        outer_src: Endpoint,
    ) -> Result<PlainPacket, CryptokeyError> {
        let env = EncryptedEnvelope::from_bytes(bytes)?;
        self.receive(&env, outer_src)
    }
}

impl fmt::Debug for CryptokeyRoutingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CryptokeyRoutingTable")
            .field("interface_name", &self.interface_name)
            .field("public_key", &self.public_key())
            .field("listen_endpoint", &self.listen_endpoint)
            .field("tunnel_address", &self.tunnel_address)
            .field("local_prefixes", &self.local_prefixes)
            .field("peers", &self.peers.values().collect::<Vec<_>>())
            .field("tx_counters", &self.tx_counters)
            .finish()
    }
}

impl PartialEq for CryptokeyRoutingTable {
    fn eq(&self, other: &Self) -> bool {
        self.interface_name == other.interface_name
            && self.keypair == other.keypair
            && self.listen_endpoint == other.listen_endpoint
            && self.tunnel_address == other.tunnel_address
            && self.local_prefixes == other.local_prefixes
            && self.peers == other.peers
            && self.tx_counters == other.tx_counters
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct TableRepr {
    interface_name: String,
    keypair: KeyPair,
    listen_endpoint: Option<Endpoint>,
    tunnel_address: Option<Ipv4Addr>,
    local_prefixes: Vec<Ipv4Net>,
    peers: Vec<PeerEntry>,
    tx_counters: BTreeMap<PublicKey, u64>,
}

impl From<CryptokeyRoutingTable> for TableRepr {
    fn from(t: CryptokeyRoutingTable) -> Self {
        TableRepr {
            interface_name: t.interface_name,
            keypair: t.keypair,
            listen_endpoint: t.listen_endpoint,
            tunnel_address: t.tunnel_address,
            local_prefixes: t.local_prefixes,
            peers: t.peers.into_values().collect(),
            tx_counters: t.tx_counters,
        }
    }
}

impl From<TableRepr> for CryptokeyRoutingTable {
    fn from(r: TableRepr) -> Self {
        let mut t = CryptokeyRoutingTable::new(r.interface_name, r.keypair);
        t.listen_endpoint = r.listen_endpoint;
        t.tunnel_address = r.tunnel_address;
        t.local_prefixes = r.local_prefixes;
        t.tx_counters = r.tx_counters;
        for p in r.peers {
            for net in &p.allowed_ips {
                t.routes.insert(*net, p.public_key);
            }
            t.peers.insert(p.public_key, p);
        }
        t
    }
}
