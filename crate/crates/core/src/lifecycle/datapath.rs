use std::collections::BTreeMap;
use std::sync::Arc;

use crate::descriptors::MemberIndex;
use crate::transport::{Backend, BackendKind, DatagramSocket, Endpoint, MemConfig, TransportError};

type GatewayKey = (String, MemberIndex);

/// Live transport state of running gateways. Not persisted: after a restart
/// sockets are re-bound on demand.
///
/// Each VIM network gets its own backend instance, so two slices that reuse
/// the same addresses never share a datagram fabric.
pub struct Datapath {
    kind: BackendKind,
    segments: BTreeMap<String, Arc<dyn Backend>>,
    sockets: BTreeMap<GatewayKey, Box<dyn DatagramSocket>>,
}

impl Default for Datapath {
    fn default() -> Self {
        Datapath::new(BackendKind::Mem(MemConfig::default()))
    }
}

impl std::fmt::Debug for Datapath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Datapath")
            .field("kind", &self.kind)
            .field("segments", &self.segments.keys().collect::<Vec<_>>())
            .field("sockets", &self.sockets.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Datapath {
    pub fn new(kind: BackendKind) -> Self {
        Datapath {
            kind,
            segments: BTreeMap::new(),
            sockets: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> &BackendKind {
        &self.kind
    }

    pub fn segment(&mut self, network: &str) -> Arc<dyn Backend> {
        let kind = &self.kind;
        self.segments
            .entry(network.to_string())
            .or_insert_with(|| kind.create())
            .clone()
    }

    /// Binds (or re-binds) a gateway's listen endpoint on `network`.
    pub fn bind(
        &mut self,
        instance: &str,
        member: MemberIndex,
        network: &str,
        endpoint: Endpoint,
    ) -> Result<(), TransportError> {
        self.unbind(instance, member);
        let socket = self.segment(network).bind(endpoint)?;
        self.sockets.insert((instance.to_string(), member), socket);
        Ok(())
    }

    pub fn unbind(&mut self, instance: &str, member: MemberIndex) -> bool {
        match self.sockets.remove(&(instance.to_string(), member)) {
            Some(mut s) => {
                s.close();
                true
            }
            None => false,
        }
    }

    pub fn is_bound(&self, instance: &str, member: MemberIndex) -> bool {
        self.sockets.contains_key(&(instance.to_string(), member))
    }

    pub fn take(&mut self, instance: &str, member: MemberIndex) -> Option<Box<dyn DatagramSocket>> {
        self.sockets.remove(&(instance.to_string(), member))
    }

    pub fn put(&mut self, instance: &str, member: MemberIndex, socket: Box<dyn DatagramSocket>) {
        self.sockets.insert((instance.to_string(), member), socket);
    }
}
