use std::fmt::Write;

use super::{BenchKind, BenchResult, KpiRecord};

/// A human-readable rendering plus an ordered `key=value` record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub text: String,
    pub fields: Vec<(String, String)>,
}

impl Report {
    /// One `key=value` per line, in field order.
    pub fn machine(&self) -> String {
        self.fields
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

fn minutes(secs: u64) -> String {
    format!("{} min {} s", secs / 60, secs % 60)
}

pub fn kpi_report(k: &KpiRecord) -> Report {
    let mut t = String::new();
    let _ = writeln!(t, "instance: {}", k.instance);
    let _ = writeln!(t, "OPD: {} s", k.opd);
    let _ = writeln!(
        t,
        "DPD: {} s (initial config {} s + peering {} s)",
        k.dpd, k.day1, k.peering
    );
    let _ = writeln!(
        t,
        "total: {} s ({})",
        k.total,
        minutes(k.total.as_micros() / 1_000_000)
    );
    for (name, d) in &k.per_action {
        let _ = writeln!(t, "action {name}: {d} s");
    }
    let mut fields = vec![
        ("kind".into(), "kpi".into()),
        ("instance".into(), k.instance.clone()),
        ("opd_s".into(), k.opd.to_string()),
        ("dpd_s".into(), k.dpd.to_string()),
        ("total_s".into(), k.total.to_string()),
        ("day1_s".into(), k.day1.to_string()),
        ("peering_s".into(), k.peering.to_string()),
    ];
    for (name, d) in &k.per_action {
        fields.push((format!("action.{name}_s"), d.to_string()));
    }
    Report { text: t, fields }
}

pub fn bench_report(b: &BenchResult) -> Report {
    let kind = match b.kind {
        BenchKind::Throughput => "throughput",
        BenchKind::Latency => "latency",
    };
    let l = &b.latency;
    let mut t = String::new();
    let _ = writeln!(t, "benchmark: {kind} over {}", b.backend);
    let _ = writeln!(t, "samples: {}", l.count);
    if b.kind == BenchKind::Latency {
        let _ = writeln!(t, "requested: {}", b.requested);
        let _ = writeln!(t, "timeouts: {}", b.timeouts);
        if l.count > 0 {
            let _ = writeln!(
                t,
                "rtt min/mean/max/stddev: {:.3}/{:.3}/{:.3}/{:.3} ms",
                l.min_ms, l.mean_ms, l.max_ms, l.stddev_ms
            );
        }
    } else {
        let _ = writeln!(t, "payload size: {} B", b.payload_size);
        let _ = writeln!(t, "packets: {}", b.packets);
        let _ = writeln!(t, "bytes: {}", b.bytes_transferred);
        let _ = writeln!(t, "duration: {:.3} s", b.duration_s);
        let _ = writeln!(t, "throughput: {:.3} Mbit/s", b.throughput_bps / 1e6);
    }
    let _ = writeln!(t, "rejected: {}", b.rejected);
    let fields = [
        ("kind", kind.to_string()),
        ("backend", b.backend.clone()),
        ("payload_size", b.payload_size.to_string()),
        ("requested", b.requested.to_string()),
        ("packets", b.packets.to_string()),
        ("bytes_transferred", b.bytes_transferred.to_string()),
        ("duration_s", format!("{:.6}", b.duration_s)),
        ("throughput_bps", format!("{:.3}", b.throughput_bps)),
        ("count", l.count.to_string()),
        ("mean_ms", format!("{:.6}", l.mean_ms)),
        ("min_ms", format!("{:.6}", l.min_ms)),
        ("max_ms", format!("{:.6}", l.max_ms)),
        ("stddev_ms", format!("{:.6}", l.stddev_ms)),
        ("timeouts", b.timeouts.to_string()),
        ("rejected", b.rejected.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Report { text: t, fields }
}
