//! Datagram delivery between gateway endpoints.
//!
//! [`MemNetwork`] is a deterministic in-memory fabric on its own simulated
//! clock; [`UdpNetwork`] maps virtual endpoints onto real loopback sockets.
//! Both expose the same [`Backend`] / [`DatagramSocket`] contract.

mod endpoint;
mod mem;
mod udp;

use std::sync::Arc;
use std::time::Duration;

use crate::clock::SimClock;

pub use endpoint::{Endpoint, EndpointError};
pub use mem::{MemConfig, MemNetwork};
pub use udp::UdpNetwork;

/// Largest datagram payload either backend accepts.
pub const MAX_DATAGRAM: usize = 65_507;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub bytes: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("endpoint {0} is already bound")]
    AlreadyBound(Endpoint),
    #[error("datagram of {0} bytes exceeds {MAX_DATAGRAM}")]
    Oversize(usize),
    #[error("socket is closed")]
    Closed,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A bound datagram socket. Handles are used by one thread at a time.
pub trait DatagramSocket: Send {
    fn local_endpoint(&self) -> Endpoint;

    /// Sending to an endpoint nobody has bound is a silent drop.
    fn send_to(&mut self, dst: Endpoint, bytes: &[u8]) -> Result<(), TransportError>;

    /// Waits up to `timeout` for the next datagram; `Ok(None)` on timeout.
    /// In-memory sockets measure the timeout on the simulated clock and
    /// never block in real time.
    fn recv(&mut self, timeout: Duration) -> Result<Option<Datagram>, TransportError>;

    /// Unbinds the endpoint. Later sends and receives fail with `Closed`.
    fn close(&mut self);

    /// The simulated clock of an in-memory fabric; `None` for real sockets.
    fn sim_clock(&self) -> Option<SimClock> {
        None
    }
}

pub trait Backend: Send + Sync {
    fn bind(&self, endpoint: Endpoint) -> Result<Box<dyn DatagramSocket>, TransportError>;
}

/// Which backend to build datapath segments on.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendKind {
    Mem(MemConfig),
    Udp,
}

impl BackendKind {
    pub fn create(&self) -> Arc<dyn Backend> {
        match self {
            BackendKind::Mem(c) => Arc::new(MemNetwork::new(c.clone())),
            BackendKind::Udp => Arc::new(UdpNetwork::new()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BackendKind::Mem(_) => "mem",
            BackendKind::Udp => "udp",
        }
    }
}

fn check_size(bytes: &[u8]) -> Result<(), TransportError> {
    if bytes.len() > MAX_DATAGRAM {
        return Err(TransportError::Oversize(bytes.len()));
    }
    Ok(())
}
