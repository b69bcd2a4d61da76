use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

struct Console {
    store: tempfile::TempDir,
    transcript: String,
}

impl Console {
    fn new() -> Self {
        Console {
            store: tempfile::tempdir().unwrap(),
            transcript: String::new(),
        }
    }

    fn raw(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_slicevpn"))
            .current_dir(fixtures())
            .arg("--store")
            .arg(self.store.path())
            .args(args)
            .output()
            .unwrap()
    }

    /// Runs a command that must succeed and appends it to the transcript.
    fn ok(&mut self, args: &[&str]) -> String {
        let out = self.raw(args);
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        self.transcript
            .push_str(&format!("$ slicevpn {}\n{stdout}", args.join(" ")));
        stdout
    }

    fn fails(&self, args: &[&str]) -> (i32, String) {
        let out = self.raw(args);
        assert!(out.stdout.is_empty() || !out.status.success());
        (
            out.status.code().unwrap(),
            String::from_utf8(out.stderr).unwrap(),
        )
    }
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .to_string()
}

/// onboard, ns-create, get-public-key x2, add-peer x2, kpi, bench, ns-show.
fn scripted_session(c: &mut Console, backend: &str) {
    c.ok(&[
        "onboard",
        "wg-gateway.vnfd.yaml",
        "test-host.vnfd.yaml",
        "two-gateway.nsd.yaml",
    ]);
    let id = c.ok(&["ns-create", "wg-pair", "--config", "wg-pair.config.yaml"]);
    assert_eq!(id, "ns-1\n");
    let west = field(
        &c.ok(&["ns-action", "ns-1", "1", "get-public-key"]),
        "public-key",
    );
    let east = field(
        &c.ok(&["ns-action", "ns-1", "2", "get-public-key"]),
        "public-key",
    );
    c.ok(&[
        "ns-action",
        "ns-1",
        "1",
        "add-peer",
        "--param",
        &format!("public-key={east}"),
        "--param",
        "allowed-ips=10.100.0.2/32,10.10.2.0/24",
        "--param",
        "endpoint=192.168.100.2:51820",
    ]);
    c.ok(&[
        "ns-action",
        "ns-1",
        "2",
        "add-peer",
        "--param",
        &format!("public-key={west}"),
        "--param",
        "allowed-ips=10.100.0.1/32,10.10.1.0/24",
        "--param",
        "endpoint=192.168.100.1:51820",
    ]);
    let kpi = c.ok(&["kpi", "ns-1"]);
    assert!(
        kpi.contains("OPD: 159 s") && kpi.contains("DPD: 107 s"),
        "{kpi}"
    );
    let bench = c.ok(&[
        "--backend",
        backend,
        "bench",
        "ns-1",
        "latency",
        "--count",
        "200",
    ]);
    assert!(
        bench.contains("samples: 200") && bench.contains("timeouts: 0"),
        "{bench}"
    );
}

#[test]
fn golden_transcript() {
    let mut c = Console::new();
    scripted_session(&mut c, "mem");
    c.ok(&["ns-show", "ns-1"]);
    c.ok(&["kpi", "ns-1", "--kv"]);
    c.ok(&["ns-delete", "ns-1"]);

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/session.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(&golden, &c.transcript).unwrap();
    }
    let want =
        fs::read_to_string(&golden).expect("golden transcript; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(c.transcript, want);

    // Byte-stable across independent sessions.
    let mut again = Console::new();
    scripted_session(&mut again, "mem");
    assert!(c.transcript.starts_with(&again.transcript));
}

#[test]
fn no_output_exposes_a_private_key() {
    let mut c = Console::new();
    scripted_session(&mut c, "mem");
    c.ok(&["ns-show", "ns-1"]);
    c.ok(&["--json", "ns-show", "ns-1"]);
    c.ok(&["--json", "ns-action", "ns-1", "1", "get-public-key"]);
    c.ok(&["--json", "kpi", "ns-1"]);
    let state = fs::read_to_string(c.store.path().join("state.json")).unwrap();
    let secrets: Vec<&str> = state
        .lines()
        .filter_map(|l| l.trim().strip_prefix("\"private-key\": \""))
        .map(|l| l.trim_end_matches(['"', ',']))
        .collect();
    assert_eq!(secrets.len(), 2);
    for s in secrets {
        assert!(!c.transcript.contains(s));
    }
    assert!(!c.transcript.contains("west-demo-seed"));
}

#[test]
fn json_output_is_line_delimited() {
    let mut c = Console::new();
    scripted_session(&mut c, "mem");
    for args in [
        &["--json", "ns-show", "ns-1"][..],
        &["--json", "kpi", "ns-1"],
        &["--json", "bench", "ns-1", "latency", "--count", "5"],
    ] {
        let out = c.ok(args);
        assert_eq!(out.lines().count(), 1, "{out}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v.is_object());
    }
    let k: serde_json::Value = serde_json::from_str(&c.ok(&["--json", "kpi", "ns-1"])).unwrap();
    assert_eq!(k["total_s"], 266.0);
}

#[test]
fn domain_errors_exit_1_with_one_line() {
    let mut c = Console::new();
    let (code, err) = c.fails(&[
        "ns-action",
        "ns-1",
        "1",
        "add-peer",
        "--param",
        "public-key=x",
    ]);
    assert_eq!(code, 1);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("instance not found"), "{err}");

    c.ok(&[
        "onboard",
        "wg-gateway.vnfd.yaml",
        "test-host.vnfd.yaml",
        "two-gateway.nsd.yaml",
    ]);
    let (code, err) = c.fails(&["--as", "tenant1", "ns-create", "wg-pair"]);
    assert_eq!((code, err.lines().count()), (1, 1));
    assert!(err.contains("authorization denied"), "{err}");

    let (code, err) = c.fails(&["validate", "missing.yaml"]);
    assert_eq!((code, err.lines().count()), (1, 1), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    let c = Console::new();
    assert_eq!(c.fails(&["frobnicate"]).0, 2);
    assert_eq!(c.fails(&["ns-show"]).0, 2);
    assert_eq!(c.fails(&["--backend", "tcp", "ns-show", "ns-1"]).0, 2);
}

#[test]
fn tenants_act_only_on_granted_instances() {
    let mut c = Console::new();
    scripted_session(&mut c, "mem");
    fs::write(
        c.store.path().join("actors.yaml"),
        "actors:\n  - {name: tenant1, role: tenant, instances: [ns-1]}\n",
    )
    .unwrap();
    c.ok(&[
        "--as",
        "tenant1",
        "ns-action",
        "ns-1",
        "1",
        "get-public-key",
    ]);
    c.ok(&["--as", "tenant1", "ns-show", "ns-1"]);
    let (code, err) = c.fails(&["--as", "tenant1", "ns-delete", "ns-1"]);
    assert_eq!(code, 1);
    assert!(err.contains("authorization denied"));
    let (_, err) = c.fails(&["--as", "tenant2", "ns-show", "ns-1"]);
    assert!(err.contains("authorization denied"));
}

#[test]
fn concurrent_invocation_fails_fast() {
    let mut c = Console::new();
    c.ok(&["onboard", "wg-gateway.vnfd.yaml"]);
    fs::write(c.store.path().join("lock"), "12345\n").unwrap();
    let (code, err) = c.fails(&["ns-show", "ns-1"]);
    assert_eq!(code, 1);
    assert!(err.contains("locked by another invocation"), "{err}");
    fs::remove_file(c.store.path().join("lock")).unwrap();
    assert!(!c.raw(&["ns-show", "ns-1"]).status.success());
    assert!(!c.store.path().join("lock").exists());
}

#[test]
fn validate_reports_cross_reference_errors() {
    let mut c = Console::new();
    let out = c.ok(&[
        "validate",
        "wg-gateway.vnfd.yaml",
        "test-host.vnfd.yaml",
        "two-gateway.nsd.yaml",
    ]);
    assert!(out.starts_with("ok: 3 descriptors"), "{out}");
    let (code, err) = c.fails(&["validate", "two-gateway.nsd.yaml"]);
    assert_eq!(code, 1);
    assert!(err.contains("validation failed"), "{err}");
}

#[test]
fn slice_create_and_profiles() {
    let mut c = Console::new();
    c.ok(&[
        "onboard",
        "wg-gateway.vnfd.yaml",
        "test-host.vnfd.yaml",
        "two-gateway.nsd.yaml",
        "edge-app.nsd.yaml",
        "vpn-slice.nst.yaml",
    ]);
    let out = c.ok(&[
        "slice-create",
        "vpn-slice",
        "--config",
        "wg-pair=wg-pair.config.yaml",
    ]);
    assert!(out.starts_with("slice-1 ns-1 ns-2\n"), "{out}");
    let id = c.ok(&[
        "ns-create",
        "wg-pair",
        "--profile",
        "preinstalled.profile.yaml",
    ]);
    let kpi = c.ok(&["kpi", id.trim()]);
    assert!(kpi.contains("OPD: 57 s"), "{kpi}");
    let id = c.ok(&["ns-create", "wg-pair", "--profile", "zeroed"]);
    assert!(c.ok(&["kpi", id.trim()]).contains("OPD: 0 s"));
}
