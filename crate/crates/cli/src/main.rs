//! `slicevpn`: operator console for the orchestration simulator.

mod render;
mod store;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use slicevpn_core::descriptors::{parse_descriptor, Catalog, MemberIndex};
use slicevpn_core::kpi::{self, TunnelPair};
use slicevpn_core::lifecycle::{Actor, InstantiationParams, Operation, Orchestrator};
use slicevpn_core::transport::{BackendKind, MemConfig};
use slicevpn_core::vimsim::TimingProfile;

use store::Store;

#[derive(Parser)]
#[command(
    name = "slicevpn",
    version,
    about = "VPN-as-a-service orchestration simulator console"
)]
struct Cli {
    /// Actor to run the command as.
    #[arg(
        long = "as",
        global = true,
        default_value = "admin",
        value_name = "NAME"
    )]
    actor: String,
    /// State directory.
    #[arg(long, global = true, default_value = ".slicevpn", value_name = "DIR")]
    store: PathBuf,
    /// Datagram transport for gateway traffic.
    #[arg(long, global = true, value_enum, default_value_t = Backend::Mem)]
    backend: Backend,
    /// Line-delimited JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Mem,
    Udp,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchMode {
    Throughput,
    Latency,
}

#[derive(Subcommand)]
enum Command {
    /// Add descriptors to the catalog.
    Onboard {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Check descriptor files against each other and the catalog.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Instantiate a network service and run its initial configuration.
    NsCreate {
        nsd_id: String,
        /// Instantiation parameters (`vnf:` list of member params).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Timing profile file, or one of default, preinstalled, zeroed.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Run a Day-2 primitive on one member.
    NsAction {
        instance: String,
        member: MemberIndex,
        action: String,
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
    /// Show state, members, event log and topology.
    NsShow { instance: String },
    /// Terminate an instance and release its resources.
    NsDelete { instance: String },
    /// Instantiate every network service of a slice template.
    SliceCreate {
        nst_id: String,
        /// Per-service parameters as NSD-ID=FILE.
        #[arg(long = "config", value_name = "NSD-ID=FILE")]
        configs: Vec<String>,
        #[arg(long)]
        profile: Option<String>,
    },
    /// Service-creation KPIs from an instance's event log.
    Kpi {
        instance: String,
        /// key=value lines instead of text.
        #[arg(long)]
        kv: bool,
    },
    /// Throughput or latency through the instance's tunnel.
    Bench {
        instance: String,
        mode: BenchMode,
        /// Throughput run length in seconds.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        #[arg(long, default_value_t = 1400)]
        payload_size: usize,
        /// Latency request count.
        #[arg(long, default_value_t = 1000)]
        count: u64,
        /// Per-request latency deadline in milliseconds.
        #[arg(long, default_value_t = 1000)]
        timeout_ms: u64,
        #[arg(long)]
        kv: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

struct Session {
    store: Store,
    orch: Orchestrator,
    actor: Actor,
    json: bool,
}

impl Session {
    fn save(&self) -> Result<()> {
        self.store.save(&self.orch)
    }

    fn emit_json<T: serde::Serialize>(&self, v: &T) -> Result<()> {
        println!("{}", serde_json::to_string(v)?);
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    let store = Store::open(&cli.store)?;
    let mut orch = store.load()?;
    orch.set_backend(match cli.backend {
        Backend::Mem => BackendKind::Mem(MemConfig::default()),
        Backend::Udp => BackendKind::Udp,
    });
    let actor = store.actor(&cli.actor)?;
    let mut s = Session {
        store,
        orch,
        actor,
        json: cli.json,
    };
    match cli.command {
        Command::Onboard { paths } => onboard(&mut s, &paths),
        Command::Validate { paths } => validate(&s, &paths),
        Command::NsCreate {
            nsd_id,
            config,
            profile,
        } => ns_create(&mut s, &nsd_id, config.as_deref(), profile.as_deref()),
        Command::NsAction {
            instance,
            member,
            action,
            params,
        } => ns_action(&mut s, &instance, member, &action, &params),
        Command::NsShow { instance } => ns_show(&s, &instance),
        Command::NsDelete { instance } => {
            s.orch.ns_delete(&s.actor, &instance)?;
            s.save()?;
            if s.json {
                s.emit_json(&serde_json::json!({"instance": instance, "state": "Terminated"}))
            } else {
                println!("deleted {instance}");
                Ok(())
            }
        }
        Command::SliceCreate {
            nst_id,
            configs,
            profile,
        } => slice_create(&mut s, &nst_id, &configs, profile.as_deref()),
        Command::Kpi { instance, kv } => kpi_cmd(&s, &instance, kv),
        Command::Bench {
            instance,
            mode,
            duration,
            payload_size,
            count,
            timeout_ms,
            kv,
        } => {
            let d = Duration::try_from_secs_f64(duration)
                .map_err(|_| anyhow!("invalid --duration {duration}"))?;
            bench(
                &mut s,
                &instance,
                mode,
                d,
                payload_size,
                count,
                Duration::from_millis(timeout_ms),
                kv,
            )
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_profile(arg: Option<&str>) -> Result<TimingProfile> {
    match arg {
        None => Ok(TimingProfile::default()),
        Some(p) if Path::new(p).exists() => {
            TimingProfile::from_yaml(&read(Path::new(p))?).map_err(|e| anyhow!("{p}: {e}"))
        }
        Some("default") => Ok(TimingProfile::default()),
        Some("preinstalled") => Ok(TimingProfile::preinstalled()),
        Some("zeroed") => Ok(TimingProfile::zeroed()),
        Some(p) => bail!("cannot read {p}: no such profile file"),
    }
}

fn load_params(path: Option<&Path>) -> Result<InstantiationParams> {
    match path {
        None => Ok(InstantiationParams::default()),
        Some(p) => {
            InstantiationParams::from_yaml(&read(p)?).map_err(|e| anyhow!("{}: {e}", p.display()))
        }
    }
}

fn onboard(s: &mut Session, paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        let text = read(p)?;
        let r = s
            .orch
            .onboard(&s.actor, &text)
            .map_err(|e| anyhow!("{}: {e}", p.display()))?;
        s.save()?;
        if s.json {
            s.emit_json(&r)?;
        } else {
            println!("onboarded {} {}", r.kind, r.id);
            for w in &r.warnings {
                println!("  {w}");
            }
        }
    }
    Ok(())
}

fn validate(s: &Session, paths: &[PathBuf]) -> Result<()> {
    let mut catalog: Catalog = s.orch.catalog().clone();
    for p in paths {
        let d = parse_descriptor(&read(p)?).map_err(|e| anyhow!("{}: {e}", p.display()))?;
        catalog
            .insert(d)
            .map_err(|e| anyhow!("{}: {e}", p.display()))?;
    }
    let report = catalog.validate();
    if s.json {
        s.emit_json(&report)?;
    } else {
        for i in &report.issues {
            println!("{i}");
        }
        if report.ok {
            println!("ok: {} descriptors", catalog.len());
        }
    }
    if !report.ok {
        let n = report.errors().count();
        bail!(
            "validation failed with {n} error{}",
            if n == 1 { "" } else { "s" }
        );
    }
    Ok(())
}

fn ns_create(
    s: &mut Session,
    nsd: &str,
    config: Option<&Path>,
    profile: Option<&str>,
) -> Result<()> {
    let params = load_params(config)?;
    let profile = load_profile(profile)?;
    let res = s.orch.ns_create(&s.actor, nsd, &params, &profile);
    // A failed deployment still leaves a record worth keeping.
    s.save()?;
    let id = res?;
    if s.json {
        s.emit_json(&serde_json::json!({"instance": id, "state": "Running"}))
    } else {
        println!("{id}");
        Ok(())
    }
}

fn parse_kv(items: &[String]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for it in items {
        let (k, v) = it
            .split_once('=')
            .ok_or_else(|| anyhow!("--param `{it}` is not KEY=VALUE"))?;
        out.insert(k.trim().to_string(), v.to_string());
    }
    Ok(out)
}

fn ns_action(
    s: &mut Session,
    id: &str,
    member: MemberIndex,
    action: &str,
    params: &[String],
) -> Result<()> {
    let params = parse_kv(params)?;
    let r = s.orch.ns_action(&s.actor, id, member, action, &params)?;
    s.save()?;
    if s.json {
        s.emit_json(&r)?;
    } else {
        print!("{}", render::action(&r));
    }
    if let slicevpn_core::lifecycle::ActionStatus::Error(m) = &r.status {
        bail!("{action} failed on member {member}: {m}");
    }
    Ok(())
}

fn ns_show(s: &Session, id: &str) -> Result<()> {
    let inst = s.orch.ns_show(&s.actor, id)?;
    let topo = s.orch.vim().topology();
    if s.json {
        s.emit_json(&render::show_json(inst, &topo))
    } else {
        print!("{}", render::show_text(inst, &topo));
        Ok(())
    }
}

fn slice_create(
    s: &mut Session,
    nst: &str,
    configs: &[String],
    profile: Option<&str>,
) -> Result<()> {
    let mut params = BTreeMap::new();
    for c in configs {
        let (nsd, path) = c
            .split_once('=')
            .ok_or_else(|| anyhow!("--config `{c}` is not NSD-ID=FILE"))?;
        params.insert(nsd.to_string(), load_params(Some(Path::new(path)))?);
    }
    let profile = load_profile(profile)?;
    let res = s.orch.slice_instantiate(&s.actor, nst, &params, &profile);
    s.save()?;
    let sid = res?;
    let slice = s.orch.slice(&sid).expect("just created");
    if s.json {
        s.emit_json(slice)
    } else {
        println!("{sid} {}", slice.ns_instances.join(" "));
        for (link, net) in &slice.shared_networks {
            println!("  link {link} -> {net}");
        }
        Ok(())
    }
}

fn kpi_cmd(s: &Session, id: &str, kv: bool) -> Result<()> {
    s.orch.check(&s.actor, Operation::Kpi, Some(id))?;
    let inst = s
        .orch
        .instance(id)
        .ok_or_else(|| anyhow!("instance not found: {id}"))?;
    let k = kpi::measure_kpis(inst)?;
    if s.json {
        return s.emit_json(&k);
    }
    let r = kpi::kpi_report(&k);
    print!("{}", if kv { r.machine() } else { r.text });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    s: &mut Session,
    id: &str,
    mode: BenchMode,
    duration: Duration,
    payload: usize,
    count: u64,
    deadline: Duration,
    kv: bool,
) -> Result<()> {
    s.orch.check(&s.actor, Operation::Bench, Some(id))?;
    let (mut pair, members) = TunnelPair::checkout(&mut s.orch, id)?;
    let res = match mode {
        BenchMode::Throughput => kpi::run_throughput(&mut pair, duration, payload),
        BenchMode::Latency => kpi::run_latency(&mut pair, count, deadline),
    };
    // Counters and learned endpoints advance even when the run fails.
    pair.restore(&mut s.orch, id, members)?;
    s.save()?;
    let r = res?;
    if s.json {
        return s.emit_json(&r);
    }
    let rep = kpi::bench_report(&r);
    print!("{}", if kv { rep.machine() } else { rep.text });
    Ok(())
}
