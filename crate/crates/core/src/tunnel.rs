//! A gateway: one cryptokey routing table bound to one datagram socket.

use std::time::Duration;

use crate::cryptokey::{CryptokeyError, CryptokeyRoutingTable, PlainPacket};
use crate::transport::{DatagramSocket, Endpoint, TransportError};

#[derive(Debug, thiserror::Error)]
pub enum TunnelError {
    #[error(transparent)]
    Crypto(#[from] CryptokeyError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("gateway is not bound to a transport")]
    NotBound,
}

pub struct Gateway {
    pub table: CryptokeyRoutingTable,
    socket: Option<Box<dyn DatagramSocket>>,
    /// Datagrams that arrived but failed authentication or routing checks.
    pub rejected: u64,
}

impl Gateway {
    pub fn new(table: CryptokeyRoutingTable) -> Self {
        Gateway {
            table,
            socket: None,
            rejected: 0,
        }
    }

    pub fn with_socket(table: CryptokeyRoutingTable, socket: Box<dyn DatagramSocket>) -> Self {
        Gateway {
            table,
            socket: Some(socket),
            rejected: 0,
        }
    }

    pub fn attach(&mut self, socket: Box<dyn DatagramSocket>) {
        self.socket = Some(socket);
    }

    pub fn detach(&mut self) -> Option<Box<dyn DatagramSocket>> {
        self.socket.take()
    }

    pub fn local_endpoint(&self) -> Option<Endpoint> {
        self.socket.as_ref().map(|s| s.local_endpoint())
    }

    pub fn socket(&self) -> Option<&dyn DatagramSocket> {
        self.socket.as_deref()
    }

    /// Encrypts and transmits one inner packet to the owning peer.
    pub fn send_packet(&mut self, p: &PlainPacket) -> Result<(), TunnelError> {
        let socket = self.socket.as_mut().ok_or(TunnelError::NotBound)?;
        let (env, dst) = self.table.send(p)?;
        socket.send_to(dst, &env.to_bytes())?;
        Ok(())
    }

    /// Waits for the next datagram and authenticates it. A datagram that
    /// fails any check is counted in `rejected` and returned as an error;
    /// `Ok(None)` means the timeout elapsed.
    pub fn recv_packet(&mut self, timeout: Duration) -> Result<Option<PlainPacket>, TunnelError> {
        let socket = self.socket.as_mut().ok_or(TunnelError::NotBound)?;
        let Some(d) = socket.recv(timeout)? else {
            return Ok(None);
        };
        match self.table.receive_bytes(&d.bytes, d.src) {
            Ok(p) => Ok(Some(p)),
            Err(e) => {
                self.rejected += 1;
                Err(e.into())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cryptokey::generate_keypair;
    use crate::transport::{Backend, MemConfig, MemNetwork, UdpNetwork};

    fn pair(b: &dyn Backend) -> (Gateway, Gateway) {
        let e1: Endpoint = "192.168.100.1:51820".parse().unwrap();
        let e2: Endpoint = "192.168.100.2:51820".parse().unwrap();
        let mut t1 = CryptokeyRoutingTable::new("wg0", generate_keypair(Some([1; 32])));
        let mut t2 = CryptokeyRoutingTable::new("wg0", generate_keypair(Some([2; 32])));
        t1.set_local_prefixes(vec!["10.10.1.0/24".parse().unwrap()]);
        t2.set_local_prefixes(vec!["10.10.2.0/24".parse().unwrap()]);
        t1.add_peer(
            t2.public_key(),
            &["10.10.2.0/24".parse().unwrap()],
            Some(e2),
        )
        .unwrap();
        t2.add_peer(t1.public_key(), &["10.10.1.0/24".parse().unwrap()], None)
            .unwrap();
        (
            Gateway::with_socket(t1, b.bind(e1).unwrap()),
            Gateway::with_socket(t2, b.bind(e2).unwrap()),
        )
    }

    fn echo(b: &dyn Backend) {
        let (mut w, mut e) = pair(b);
        let p = PlainPacket::new(
            [10, 10, 1, 5].into(),
            [10, 10, 2, 5].into(),
            b"ping".to_vec(),
        );
        // East has no endpoint for west until west speaks first.
        w.send_packet(&p).unwrap();
        let got = e.recv_packet(Duration::from_secs(2)).unwrap().unwrap();
        assert_eq!(got, p);
        let reply = PlainPacket::new(got.dst_ip, got.src_ip, got.payload);
        e.send_packet(&reply).unwrap();
        assert_eq!(
            w.recv_packet(Duration::from_secs(2)).unwrap().unwrap(),
            reply
        );
    }

    #[test]
    fn echo_over_both_backends() {
        echo(&MemNetwork::new(MemConfig::default()));
        echo(&UdpNetwork::new());
    }

    #[test]
    fn garbage_is_counted_as_rejected() {
        let n = MemNetwork::new(MemConfig::default());
        let (_, mut e) = pair(&n);
        let mut raw = n.bind("192.168.100.9:1".parse().unwrap()).unwrap();
        raw.send_to(e.local_endpoint().unwrap(), &[0u8; 80])
            .unwrap();
        assert!(e.recv_packet(Duration::from_secs(1)).is_err());
        assert_eq!(e.rejected, 1);
    }
}
