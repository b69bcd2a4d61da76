use std::net::Ipv4Addr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clock::{SimClock, SimTime};
use crate::cryptokey::{PlainPacket, MAX_PAYLOAD};
use crate::descriptors::MemberIndex;
use crate::lifecycle::{LifecycleError, Orchestrator};
use crate::tunnel::{Gateway, TunnelError};

const PROBE_SEQ: u64 = u64::MAX;
const PROBE_TIMEOUT: Duration = Duration::from_secs(1);
const ECHO_HEADER: usize = 16;
/// Packets the UDP sender may have in flight before waiting for the receiver.
const WINDOW: u64 = 64;
const STALL: Duration = Duration::from_millis(50);
const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("tunnel not established")]
    TunnelNotEstablished,
    #[error("payload size {0} out of range (8..={max})", max = MAX_PAYLOAD)]
    PayloadSize(usize),
    #[error("instance {0} has fewer than two gateways")]
    NoGatewayPair(String),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error(transparent)]
    Tunnel(#[from] TunnelError),
}

/// Two peered gateways and the inner addresses of the hosts behind them.
pub struct TunnelPair {
    pub west: Gateway,
    pub east: Gateway,
    pub west_host: Ipv4Addr,
    pub east_host: Ipv4Addr,
}

impl TunnelPair {
    /// Borrows the first two gateways of a running instance; hand them back
    /// with [`restore`](Self::restore) so counters and roaming state persist.
    pub fn checkout(
        o: &mut Orchestrator,
        id: &str,
    ) -> Result<(Self, [MemberIndex; 2]), BenchError> {
        let gws = o.gateway_members(id)?;
        let [w, e] = match gws[..] {
            [w, e, ..] => [w, e],
            _ => return Err(BenchError::NoGatewayPair(id.to_string())),
        };
        let west_host = o.host_behind(id, w)?;
        let east_host = o.host_behind(id, e)?;
        let west = o.take_gateway(id, w)?;
        let east = match o.take_gateway(id, e) {
            Ok(g) => g,
            Err(err) => {
                o.restore_gateway(id, w, west)?;
                return Err(err.into());
            }
        };
        Ok((
            TunnelPair {
                west,
                east,
                west_host,
                east_host,
            },
            [w, e],
        ))
    }

    pub fn restore(
        self,
        o: &mut Orchestrator,
        id: &str,
        members: [MemberIndex; 2],
    ) -> Result<(), BenchError> {
        o.restore_gateway(id, members[0], self.west)?;
        o.restore_gateway(id, members[1], self.east)?;
        Ok(())
    }

    fn sim_clock(&self) -> Option<SimClock> {
        self.west.socket().and_then(|s| s.sim_clock())
    }

    pub fn backend_name(&self) -> &'static str {
        if self.sim_clock().is_some() {
            "mem"
        } else {
            "udp"
        }
    }

    fn rejected(&self) -> u64 {
        self.west.rejected + self.east.rejected
    }

    /// One echo round-trip; fails if either direction is not configured.
    fn probe(&mut self) -> Result<(), BenchError> {
        let timer = Timer::start(self.sim_clock());
        let payload = echo_payload(PROBE_SEQ, 0);
        let req = PlainPacket::new(self.west_host, self.east_host, payload.clone());
        if self.west.send_packet(&req).is_err() {
            return Err(BenchError::TunnelNotEstablished);
        }
        if !reflect(&mut self.east, self.west_host, &timer, PROBE_TIMEOUT) {
            return Err(BenchError::TunnelNotEstablished);
        }
        match await_reply(
            &mut self.west,
            self.east_host,
            PROBE_SEQ,
            &timer,
            PROBE_TIMEOUT * 2,
        ) {
            Some(_) => Ok(()),
            None => Err(BenchError::TunnelNotEstablished),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    Throughput,
    Latency,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub stddev_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(samples_ms: &[f64]) -> Self {
        if samples_ms.is_empty() {
            return Self::default();
        }
        let n = samples_ms.len() as f64;
        let mean = samples_ms.iter().sum::<f64>() / n;
        let var = samples_ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let min = samples_ms.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        LatencyStats {
            count: samples_ms.len() as u64,
            // Summation rounding can push the mean of equal samples past them.
            mean_ms: mean.clamp(min, max),
            min_ms: min,
            max_ms: max,
            stddev_ms: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub kind: BenchKind,
    pub backend: String,
    pub payload_size: usize,
    /// Requests asked for (latency) or 0 (throughput).
    pub requested: u64,
    /// Authenticated, content-verified payloads received.
    pub packets: u64,
    pub bytes_transferred: u64,
    pub duration_s: f64,
    pub throughput_bps: f64,
    pub latency: LatencyStats,
    pub timeouts: u64,
    /// Datagrams the gateways refused during the run.
    pub rejected: u64,
}

impl BenchResult {
    fn new(kind: BenchKind, pair: &TunnelPair, payload_size: usize) -> Self {
        BenchResult {
            kind,
            backend: pair.backend_name().to_string(),
            payload_size,
            requested: 0,
            packets: 0,
            bytes_transferred: 0,
            duration_s: 0.0,
            throughput_bps: 0.0,
            latency: LatencyStats::default(),
            timeouts: 0,
            rejected: 0,
        }
    }

    fn finish(&mut self, elapsed: Duration) {
        self.duration_s = elapsed.as_secs_f64();
        self.throughput_bps = if self.duration_s > 0.0 {
            8.0 * self.bytes_transferred as f64 / self.duration_s
        } else {
            0.0
        };
    }
}

/// Elapsed time on the fabric's simulated clock, or wall time for real
/// sockets.
#[derive(Clone)]
enum Timer {
    Sim(SimClock, SimTime),
    Real(Instant),
}

impl Timer {
    fn start(clock: Option<SimClock>) -> Self {
        match clock {
            Some(c) => {
                let now = c.now();
                Timer::Sim(c, now)
            }
            None => Timer::Real(Instant::now()),
        }
    }

    fn elapsed(&self) -> Duration {
        match self {
            Timer::Sim(c, t0) => Duration::from_micros(c.now().since(*t0).as_micros()),
            Timer::Real(t0) => t0.elapsed(),
        }
    }
}

fn echo_payload(seq: u64, stamp_us: u64) -> Vec<u8> {
    let mut p = Vec::with_capacity(ECHO_HEADER);
    p.extend_from_slice(&seq.to_be_bytes());
    p.extend_from_slice(&stamp_us.to_be_bytes());
    p
}

fn parse_echo(p: &[u8]) -> Option<(u64, u64)> {
    if p.len() != ECHO_HEADER {
        return None;
    }
    let seq = u64::from_be_bytes(p[..8].try_into().ok()?);
    let stamp = u64::from_be_bytes(p[8..].try_into().ok()?);
    Some((seq, stamp))
}

/// The east host: waits for one request from `from` and sends it back
/// verbatim. Returns false on timeout.
fn reflect(gw: &mut Gateway, from: Ipv4Addr, timer: &Timer, within: Duration) -> bool {
    let deadline = timer.elapsed() + within;
    loop {
        let left = deadline.saturating_sub(timer.elapsed());
        match gw.recv_packet(left) {
            Ok(Some(p)) if p.src_ip == from => {
                let back = PlainPacket::new(p.dst_ip, p.src_ip, p.payload);
                return gw.send_packet(&back).is_ok();
            }
            Ok(None) => return false,
            // Foreign or rejected datagrams do not end the wait.
            Ok(Some(_)) | Err(_) => {}
        }
        if timer.elapsed() >= deadline {
            return false;
        }
    }
}

/// Waits for the reply carrying `seq`, discarding stale replies. Returns
/// the echoed send stamp.
fn await_reply(
    gw: &mut Gateway,
    from: Ipv4Addr,
    seq: u64,
    timer: &Timer,
    within: Duration,
) -> Option<u64> {
    let deadline = timer.elapsed() + within;
    loop {
        let left = deadline.saturating_sub(timer.elapsed());
        match gw.recv_packet(left) {
            Ok(Some(p)) if p.src_ip == from => {
                if let Some((s, stamp)) = parse_echo(&p.payload) {
                    if s == seq {
                        return Some(stamp);
                    }
                }
            }
            Ok(None) => return None,
            Ok(Some(_)) | Err(_) => {}
        }
        if timer.elapsed() >= deadline {
            return None;
        }
    }
}

/// Sends `n` echo requests one at a time and records each round-trip.
/// Requests without a reply within `deadline` count as timeouts.
pub fn run_latency(
    pair: &mut TunnelPair,
    n: u64,
    deadline: Duration,
) -> Result<BenchResult, BenchError> {
    let mut r = BenchResult::new(BenchKind::Latency, pair, ECHO_HEADER);
    r.requested = n;
    if n == 0 {
        return Ok(r);
    }
    pair.probe()?;
    let rejected0 = pair.rejected();
    let timer = Timer::start(pair.sim_clock());
    let mut samples = Vec::with_capacity(n as usize);
    for seq in 0..n {
        let sent_at = timer.elapsed();
        let req = PlainPacket::new(
            pair.west_host,
            pair.east_host,
            echo_payload(seq, sent_at.as_micros() as u64),
        );
        pair.west.send_packet(&req)?;
        let reflected = reflect(&mut pair.east, pair.west_host, &timer, deadline);
        let left = deadline.saturating_sub(timer.elapsed() - sent_at);
        let reply = reflected
            .then(|| await_reply(&mut pair.west, pair.east_host, seq, &timer, left))
            .flatten();
        match reply {
            Some(stamp) => {
                let rtt = timer.elapsed().saturating_sub(Duration::from_micros(stamp));
                samples.push(rtt.as_secs_f64() * 1e3);
                r.packets += 1;
                r.bytes_transferred += 2 * ECHO_HEADER as u64;
            }
            None => r.timeouts += 1,
        }
    }
    r.latency = LatencyStats::from_samples(&samples);
    r.rejected = pair.rejected() - rejected0;
    r.finish(timer.elapsed());
    Ok(r)
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn bulk_payload(seq: u64, size: usize) -> Vec<u8> {
    let mut p = vec![seq as u8; size];
    p[..8].copy_from_slice(&seq.to_be_bytes());
    p
}

fn verify_bulk(p: &PlainPacket, src: Ipv4Addr, dst: Ipv4Addr, size: usize) -> bool {
    if p.src_ip != src || p.dst_ip != dst || p.payload.len() != size || size < 8 {
        return false;
    }
    let seq = u64::from_be_bytes(p.payload[..8].try_into().expect("8 bytes"));
    p.payload[8..].iter().all(|b| *b == seq as u8)
}

/// Streams payloads west to east for `duration` and counts what the east
/// gateway authenticated and verified.
pub fn run_throughput(
    pair: &mut TunnelPair,
    duration: Duration,
    payload_size: usize,
) -> Result<BenchResult, BenchError> {
    if !(8..=MAX_PAYLOAD).contains(&payload_size) {
        return Err(BenchError::PayloadSize(payload_size));
    }
    pair.probe()?;
    let rejected0 = pair.rejected();
    let mut r = BenchResult::new(BenchKind::Throughput, pair, payload_size);
    let elapsed = match pair.sim_clock() {
        Some(clock) => throughput_sim(pair, clock, duration, payload_size, &mut r)?,
        None => throughput_threads(pair, duration, payload_size, &mut r)?,
    };
    r.rejected = pair.rejected() - rejected0;
    r.finish(elapsed);
    Ok(r)
}

/// Simulated fabric: the sender and receiver are stepped alternately; the
/// link model paces the sender.
fn throughput_sim(
    pair: &mut TunnelPair,
    clock: SimClock,
    duration: Duration,
    size: usize,
    r: &mut BenchResult,
) -> Result<Duration, BenchError> {
    let timer = Timer::start(Some(clock));
    let (src, dst) = (pair.west_host, pair.east_host);
    let mut last_rx = Duration::ZERO;
    let mut drain = |east: &mut Gateway, wait: Duration, r: &mut BenchResult| loop {
        match east.recv_packet(wait) {
            Ok(Some(p)) => {
                if verify_bulk(&p, src, dst, size) {
                    r.packets += 1;
                    r.bytes_transferred += size as u64;
                    last_rx = timer.elapsed();
                }
            }
            Ok(None) => break,
            Err(_) => {}
        }
    };
    let mut seq = 0u64;
    while timer.elapsed() < duration {
        pair.west
            .send_packet(&PlainPacket::new(src, dst, bulk_payload(seq, size)))?;
        seq += 1;
        drain(&mut pair.east, Duration::ZERO, r);
    }
    drain(&mut pair.east, POLL, r);
    Ok(last_rx.max(duration))
}

/// Real sockets: receiver on its own thread; the sender keeps at most
/// [`WINDOW`] packets in flight and writes off packets lost to socket
/// buffer overflow after a short stall.
fn throughput_threads(
    pair: &mut TunnelPair,
    duration: Duration,
    size: usize,
    r: &mut BenchResult,
) -> Result<Duration, BenchError> {
    let (src, dst) = (pair.west_host, pair.east_host);
    let sent = AtomicU64::new(0);
    let received = Mutex::new(0u64);
    let progress = Condvar::new();
    let done = AtomicBool::new(false);
    let start = Instant::now();
    let (west, east) = (&mut pair.west, &mut pair.east);

    let (send_res, (packets, bytes, last_rx)) = std::thread::scope(|s| {
        let rx = s.spawn(|| {
            let (mut packets, mut bytes, mut last_rx) = (0u64, 0u64, start);
            let mut idle_since: Option<Instant> = None;
            loop {
                match east.recv_packet(Duration::ZERO) {
                    Ok(Some(p)) => {
                        idle_since = None;
                        if verify_bulk(&p, src, dst, size) {
                            packets += 1;
                            bytes += size as u64;
                            last_rx = Instant::now();
                            *lock(&received) = packets;
                            progress.notify_one();
                        }
                    }
                    Ok(None) => {
                        if done.load(Ordering::Acquire) {
                            let since = *idle_since.get_or_insert_with(Instant::now);
                            if since.elapsed() >= POLL * 3
                                || packets >= sent.load(Ordering::Acquire)
                            {
                                break;
                            }
                        }
                        std::thread::yield_now();
                    }
                    Err(_) => {}
                }
            }
            (packets, bytes, last_rx)
        });

        let mut seq = 0u64;
        let mut lost = 0u64;
        let res = (|| {
            while start.elapsed() < duration {
                let mut got = lock(&received);
                if seq.saturating_sub(*got + lost) >= WINDOW {
                    let before = *got;
                    got = progress
                        .wait_timeout(got, STALL)
                        .unwrap_or_else(|e| e.into_inner())
                        .0;
                    if *got == before {
                        lost = seq - *got;
                    }
                    continue;
                }
                drop(got);
                west.send_packet(&PlainPacket::new(src, dst, bulk_payload(seq, size)))?;
                seq += 1;
                sent.store(seq, Ordering::Release);
            }
            Ok::<_, BenchError>(())
        })();
        done.store(true, Ordering::Release);
        (res, rx.join().expect("receiver thread"))
    });
    send_res?;
    r.packets = packets;
    r.bytes_transferred = bytes;
    Ok(last_rx.duration_since(start).max(duration))
}
