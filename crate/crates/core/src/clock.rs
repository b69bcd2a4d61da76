//! Simulated time.
//!
//! All control-plane durations (boot, package install, primitive execution)
//! and the in-memory datagram fabric run on a [`SimClock`] with microsecond
//! resolution, so identical call sequences yield identical timestamps.

use std::fmt;
use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

const MICROS_PER_SEC: u64 = 1_000_000;

/// A span of simulated time.
#[derive(
    Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimDuration(u64);

impl SimDuration {
    pub const ZERO: SimDuration = SimDuration(0);

    pub const fn from_micros(us: u64) -> Self {
        SimDuration(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimDuration(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimDuration(s * MICROS_PER_SEC)
    }

    /// Rounds to the nearest microsecond. Returns `None` for negative or
    /// non-finite input.
    pub fn from_secs_f64(s: f64) -> Option<Self> {
        if !s.is_finite() || s < 0.0 {
            return None;
        }
        let us = (s * MICROS_PER_SEC as f64).round();
        if us > u64::MAX as f64 {
            return None;
        }
        Some(SimDuration(us as u64))
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    pub fn saturating_sub(self, other: SimDuration) -> SimDuration {
        SimDuration(self.0.saturating_sub(other.0))
    }
}

impl Add for SimDuration {
    type Output = SimDuration;
    fn add(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0 + rhs.0)
    }
}

impl std::iter::Sum for SimDuration {
    fn sum<I: Iterator<Item = SimDuration>>(iter: I) -> Self {
        iter.fold(SimDuration::ZERO, Add::add)
    }
}

/// Seconds, without trailing zeros: `159`, `0.5`, `0.000001`.
impl fmt::Display for SimDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_secs(f, self.0)
    }
}

fn write_secs(f: &mut fmt::Formatter<'_>, us: u64) -> fmt::Result {
    let whole = us / MICROS_PER_SEC;
    let frac = us % MICROS_PER_SEC;
    if frac == 0 {
        write!(f, "{whole}")
    } else {
        let digits = format!("{frac:06}");
        write!(f, "{whole}.{}", digits.trim_end_matches('0'))
    }
}

/// An instant on the simulated clock, measured from its origin.
#[derive(
    Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn since(self, earlier: SimTime) -> SimDuration {
        SimDuration(self.0.saturating_sub(earlier.0))
    }
}

impl Add<SimDuration> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimDuration) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimDuration;
    fn sub(self, rhs: SimTime) -> SimDuration {
        self.since(rhs)
    }
}

/// Fixed three-decimal seconds, used in exported event logs.
impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0 / 1_000;
        write!(f, "{}.{:03}", ms / 1_000, ms % 1_000)
    }
}

/// Shared handle to a monotonically non-decreasing simulated clock.
///
/// Clones observe and advance the same instant.
#[derive(Clone, Debug, Default)]
pub struct SimClock {
    now: Arc<AtomicU64>,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(t: SimTime) -> Self {
        SimClock {
            now: Arc::new(AtomicU64::new(t.0)),
        }
    }

    pub fn now(&self) -> SimTime {
        SimTime(self.now.load(Ordering::SeqCst))
    }

    /// Moves the clock forward by `d` and returns the new instant.
    pub fn advance(&self, d: SimDuration) -> SimTime {
        SimTime(self.now.fetch_add(d.0, Ordering::SeqCst) + d.0)
    }

    /// Moves the clock to `t` if `t` is later than now; never moves backwards.
    pub fn advance_to(&self, t: SimTime) -> SimTime {
        let prev = self.now.fetch_max(t.0, Ordering::SeqCst);
        SimTime(prev.max(t.0))
    }
}

/// Serializes a [`SimClock`] as its current instant; deserializing yields a
/// fresh, unshared clock at that instant.
pub mod serde_clock {
    use super::{SimClock, SimTime};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &SimClock, s: S) -> Result<S::Ok, S::Error> {
        c.now().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SimClock, D::Error> {
        Ok(SimClock::starting_at(SimTime::deserialize(d)?))
    }
}
