use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, SocketAddrV4, UdpSocket};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use super::{check_size, Backend, Datagram, DatagramSocket, Endpoint, TransportError};

#[derive(Debug, Default)]
struct Map {
    to_real: BTreeMap<Endpoint, SocketAddrV4>,
    to_virtual: BTreeMap<SocketAddrV4, Endpoint>,
}

/// Real UDP sockets on loopback.
///
/// Virtual endpoints outside 127.0.0.0/8 (simulated management addresses)
/// are bound to an ephemeral `127.0.0.1` port and translated in both
/// directions, so received datagrams still report the sender's virtual
/// endpoint. Clones share the translation map.
#[derive(Debug, Clone, Default)]
pub struct UdpNetwork {
    map: Arc<Mutex<Map>>,
}

impl UdpNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Real socket address behind a bound virtual endpoint.
    pub fn real_addr(&self, e: Endpoint) -> Option<SocketAddrV4> {
        lock(&self.map).to_real.get(&e).copied()
    }
}

fn lock(m: &Mutex<Map>) -> MutexGuard<'_, Map> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Backend for UdpNetwork {
    fn bind(&self, endpoint: Endpoint) -> Result<Box<dyn DatagramSocket>, TransportError> {
        let mut map = lock(&self.map);
        if map.to_real.contains_key(&endpoint) {
            return Err(TransportError::AlreadyBound(endpoint));
        }
        let want = if endpoint.ip().is_loopback() {
            SocketAddrV4::from(endpoint)
        } else {
            SocketAddrV4::new([127, 0, 0, 1].into(), 0)
        };
        let socket = UdpSocket::bind(want).map_err(|e| match e.kind() {
            ErrorKind::AddrInUse => TransportError::AlreadyBound(endpoint),
            _ => TransportError::Io(e),
        })?;
        let real = match socket.local_addr()? {
            SocketAddr::V4(a) => a,
            SocketAddr::V6(_) => unreachable!("bound to an IPv4 address"),
        };
        map.to_real.insert(endpoint, real);
        map.to_virtual.insert(real, endpoint);
        Ok(Box::new(UdpHandle {
            map: self.map.clone(),
            socket: Some(socket),
            local: endpoint,
            real,
            buf: vec![0; 65_536],
        }))
    }
}

struct UdpHandle {
    map: Arc<Mutex<Map>>,
    socket: Option<UdpSocket>,
    local: Endpoint,
    real: SocketAddrV4,
    buf: Vec<u8>,
}

impl DatagramSocket for UdpHandle {
    fn local_endpoint(&self) -> Endpoint {
        self.local
    }

    fn send_to(&mut self, dst: Endpoint, bytes: &[u8]) -> Result<(), TransportError> {
        let socket = self.socket.as_ref().ok_or(TransportError::Closed)?;
        check_size(bytes)?;
        let real = match lock(&self.map).to_real.get(&dst) {
            Some(r) => *r,
            None if dst.ip().is_loopback() => dst.into(),
            None => return Ok(()),
        };
        match socket.send_to(bytes, real) {
            Ok(_) => Ok(()),
            // An ICMP-unreachable from an earlier send can surface here;
            // datagram semantics say the loss is silent.
            Err(e) if e.kind() == ErrorKind::ConnectionRefused => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Datagram>, TransportError> {
        let socket = self.socket.as_ref().ok_or(TransportError::Closed)?;
        if timeout.is_zero() {
            socket.set_nonblocking(true)?;
        } else {
            socket.set_nonblocking(false)?;
            socket.set_read_timeout(Some(timeout))?;
        }
        loop {
            match socket.recv_from(&mut self.buf) {
                Ok((n, SocketAddr::V4(from))) => {
                    let src = match lock(&self.map).to_virtual.get(&from) {
                        Some(v) => *v,
                        None => match Endpoint::try_from(from) {
                            Ok(e) => e,
                            Err(_) => continue,
                        },
                    };
                    return Ok(Some(Datagram {
                        src,
                        dst: self.local,
                        bytes: self.buf[..n].to_vec(),
                    }));
                }
                Ok((_, SocketAddr::V6(_))) => continue,
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    return Ok(None)
                }
                Err(e) if e.kind() == ErrorKind::ConnectionRefused => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn close(&mut self) {
        if self.socket.take().is_some() {
            let mut map = lock(&self.map);
            map.to_real.remove(&self.local);
            map.to_virtual.remove(&self.real);
        }
    }
}

impl Drop for UdpHandle {
    fn drop(&mut self) {
        self.close();
    }
}
