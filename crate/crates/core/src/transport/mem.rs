use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_size, Backend, Datagram, DatagramSocket, Endpoint, TransportError};
use crate::clock::{SimClock, SimDuration, SimTime};

/// Link model of the in-memory fabric.
#[derive(Debug, Clone, PartialEq)]
pub struct MemConfig {
    pub latency: SimDuration,
    /// Shared link rate; `None` serializes datagrams instantly.
    pub bandwidth_bps: Option<u64>,
    /// Probability of dropping a datagram.
    pub loss: f64,
    /// Probability of holding a datagram back by `reorder_delay`.
    pub reorder: f64,
    pub reorder_delay: SimDuration,
    pub seed: u64,
}

impl Default for MemConfig {
    /// 0.5 ms one-way latency on a 1 Gbit/s link, no loss, no reordering.
    fn default() -> Self {
        MemConfig {
            latency: SimDuration::from_micros(500),
            bandwidth_bps: Some(1_000_000_000),
            loss: 0.0,
            reorder: 0.0,
            reorder_delay: SimDuration::from_millis(5),
            seed: 0,
        }
    }
}

impl MemConfig {
    pub fn ideal() -> Self {
        MemConfig {
            latency: SimDuration::ZERO,
            bandwidth_bps: None,
            ..Default::default()
        }
    }
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Queued {
    deliver_at: SimTime,
    seq: u64,
    src: Endpoint,
    dst: Endpoint,
    bytes: Vec<u8>,
}

#[derive(Debug)]
struct State {
    clock: SimClock,
    config: MemConfig,
    rng: ChaCha8Rng,
    queues: BTreeMap<Endpoint, BinaryHeap<Reverse<Queued>>>,
    link_free_at: SimTime,
    seq: u64,
}

/// Deterministic in-memory datagram fabric. Clones share the fabric.
#[derive(Debug, Clone)]
pub struct MemNetwork {
    state: Arc<Mutex<State>>,
}

impl MemNetwork {
    pub fn new(config: MemConfig) -> Self {
        Self::with_clock(config, SimClock::new())
    }

    pub fn with_clock(config: MemConfig, clock: SimClock) -> Self {
        MemNetwork {
            state: Arc::new(Mutex::new(State {
                clock,
                rng: ChaCha8Rng::seed_from_u64(config.seed),
                config,
                queues: BTreeMap::new(),
                link_free_at: SimTime::ZERO,
                seq: 0,
            })),
        }
    }

    pub fn clock(&self) -> SimClock {
        lock(&self.state).clock.clone()
    }
}

fn lock(m: &Mutex<State>) -> MutexGuard<'_, State> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Backend for MemNetwork {
    fn bind(&self, endpoint: Endpoint) -> Result<Box<dyn DatagramSocket>, TransportError> {
        let mut s = lock(&self.state);
        if s.queues.contains_key(&endpoint) {
            return Err(TransportError::AlreadyBound(endpoint));
        }
        s.queues.insert(endpoint, BinaryHeap::new());
        Ok(Box::new(MemSocket {
            state: self.state.clone(),
            local: endpoint,
            open: true,
        }))
    }
}

struct MemSocket {
    state: Arc<Mutex<State>>,
    local: Endpoint,
    open: bool,
}

impl DatagramSocket for MemSocket {
    fn local_endpoint(&self) -> Endpoint {
        self.local
    }

    fn send_to(&mut self, dst: Endpoint, bytes: &[u8]) -> Result<(), TransportError> {
        if !self.open {
            return Err(TransportError::Closed);
        }
        check_size(bytes)?;
        let mut guard = lock(&self.state);
        let s = &mut *guard;
        let now = s.clock.now();
        let serialize = match s.config.bandwidth_bps {
            Some(bps) if bps > 0 => {
                SimDuration::from_micros((bytes.len() as u64 * 8 * 1_000_000).div_ceil(bps))
            }
            _ => SimDuration::ZERO,
        };
        let departure = now.max(s.link_free_at) + serialize;
        s.link_free_at = departure;
        s.clock.advance_to(departure);
        let loss = s.config.loss > 0.0 && s.rng.gen_bool(s.config.loss.min(1.0));
        let held = s.config.reorder > 0.0 && s.rng.gen_bool(s.config.reorder.min(1.0));
        if loss {
            return Ok(());
        }
        let mut deliver_at = departure + s.config.latency;
        if held {
            deliver_at = deliver_at + s.config.reorder_delay;
        }
        s.seq += 1;
        let seq = s.seq;
        if let Some(q) = s.queues.get_mut(&dst) {
            q.push(Reverse(Queued {
                deliver_at,
                seq,
                src: self.local,
                dst,
                bytes: bytes.to_vec(),
            }));
        }
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Datagram>, TransportError> {
        if !self.open {
            return Err(TransportError::Closed);
        }
        let s = lock(&self.state);
        let deadline = s.clock.now() + SimDuration::from_micros(timeout.as_micros() as u64);
        let mut s = s;
        let q = s
            .queues
            .get_mut(&self.local)
            .ok_or(TransportError::Closed)?;
        let ready = q.peek().is_some_and(|Reverse(d)| d.deliver_at <= deadline);
        if !ready {
            s.clock.advance_to(deadline);
            return Ok(None);
        }
        let Reverse(d) = q.pop().expect("peeked");
        s.clock.advance_to(d.deliver_at);
        Ok(Some(Datagram {
            src: d.src,
            dst: d.dst,
            bytes: d.bytes,
        }))
    }

    fn close(&mut self) {
        if self.open {
            self.open = false;
            lock(&self.state).queues.remove(&self.local);
        }
    }

    fn sim_clock(&self) -> Option<SimClock> {
        Some(lock(&self.state).clock.clone())
    }
}

impl Drop for MemSocket {
    fn drop(&mut self) {
        self.close();
    }
}
