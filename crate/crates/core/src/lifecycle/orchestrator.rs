use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{redact, resolve, Placeholders, SECRET_PARAMS};
use super::*;
use crate::clock::{SimClock, SimTime};
use crate::cryptokey::{generate_keypair, CryptokeyRoutingTable};
use crate::descriptors::{
    parse_descriptor, Catalog, Descriptor, NsDescriptor, PrimitiveSpec, Severity, VnfDescriptor,
};
use crate::transport::{BackendKind, Endpoint};
use crate::tunnel::Gateway;
use crate::vimsim::{BootRequest, Vim};

const DEFAULT_LISTEN_PORT: u16 = 51820;
const WG_INTERFACE: &str = "wg0";
const KEY_SEED_LABEL: &[u8] = b"slicevpn generate-keys";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnboardReceipt {
    pub kind: DescriptorKind,
    pub id: String,
    /// Cross-references not yet resolvable in the catalog. They become
    /// errors at instantiation time if still unresolved.
    pub warnings: Vec<Issue>,
}

/// The orchestrator's whole persistent state plus live datapath sockets.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Orchestrator {
    catalog: Catalog,
    vim: Vim,
    instances: BTreeMap<String, NetworkServiceInstance>,
    slices: BTreeMap<String, SliceInstance>,
    next_ns: u64,
    next_slice: u64,
    #[serde(skip)]
    datapath: Datapath,
}

impl Orchestrator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_backend(kind: BackendKind) -> Self {
        Orchestrator {
            datapath: Datapath::new(kind),
            ..Default::default()
        }
    }

    /// Switches the datapath backend, closing every live socket.
    pub fn set_backend(&mut self, kind: BackendKind) {
        self.datapath = Datapath::new(kind);
    }

    pub fn backend(&self) -> &BackendKind {
        self.datapath.kind()
    }

    pub fn clock(&self) -> &SimClock {
        self.vim.clock()
    }

    pub fn now(&self) -> SimTime {
        self.vim.clock().now()
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn vim(&self) -> &Vim {
        &self.vim
    }

    pub fn instance(&self, id: &str) -> Option<&NetworkServiceInstance> {
        self.instances.get(id)
    }

    pub fn instances(&self) -> impl Iterator<Item = &NetworkServiceInstance> {
        self.instances.values()
    }

    pub fn slice(&self, id: &str) -> Option<&SliceInstance> {
        self.slices.get(id)
    }

    pub fn check(
        &self,
        actor: &Actor,
        op: Operation,
        instance: Option<&str>,
    ) -> Result<(), LifecycleError> {
        match authorize(actor, op, instance) {
            Decision::Allow => Ok(()),
            Decision::Deny => Err(LifecycleError::AuthorizationDenied {
                actor: actor.name.clone(),
                operation: op,
                instance: instance.map(str::to_string),
            }),
        }
    }

    // ---- Day-0 ----

    pub fn onboard(&mut self, actor: &Actor, text: &str) -> Result<OnboardReceipt, LifecycleError> {
        self.check(actor, Operation::Onboard, None)?;
        let d = parse_descriptor(text)?;
        self.onboard_descriptor(actor, d)
    }

    pub fn onboard_descriptor(
        &mut self,
        actor: &Actor,
        d: Descriptor,
    ) -> Result<OnboardReceipt, LifecycleError> {
        self.check(actor, Operation::Onboard, None)?;
        let (kind, id) = (d.kind(), d.id().to_string());
        self.catalog.insert(d)?;
        let warnings = self
            .catalog
            .validate_closure(kind, &id)
            .issues
            .into_iter()
            .map(|mut i| {
                i.severity = Severity::Warning;
                i
            })
            .collect();
        Ok(OnboardReceipt { kind, id, warnings })
    }

    // ---- Day-1 ----

    /// Runs an instance all the way to `Running`.
    pub fn ns_create(
        &mut self,
        actor: &Actor,
        nsd_id: &str,
        params: &InstantiationParams,
        profile: &TimingProfile,
    ) -> Result<String, LifecycleError> {
        let id = self.ns_create_begin(actor, nsd_id, params, profile)?;
        self.run_to_completion(&id)?;
        Ok(id)
    }

    /// Registers an instance in `Created` and logs the request; drive it
    /// with [`step`](Self::step).
    pub fn ns_create_begin(
        &mut self,
        actor: &Actor,
        nsd_id: &str,
        params: &InstantiationParams,
        profile: &TimingProfile,
    ) -> Result<String, LifecycleError> {
        self.check(actor, Operation::NsCreate, None)?;
        self.create_instance(nsd_id, params, profile, BTreeMap::new(), None)
    }

    /// Advances one lifecycle stage and returns the new state.
    pub fn step(&mut self, id: &str) -> Result<NsState, LifecycleError> {
        let state = self.inst(id)?.state;
        match state {
            NsState::Created => {
                self.set_state(id, NsState::DeployingInfra);
                self.log(id, EventKind::DeployStart);
            }
            NsState::DeployingInfra => self.deploy(id)?,
            NsState::ConfiguringDay1 => self.configure_day1(id)?,
            s => {
                return Err(LifecycleError::CannotStep {
                    instance: id.to_string(),
                    state: s,
                })
            }
        }
        Ok(self.inst(id)?.state)
    }

    fn run_to_completion(&mut self, id: &str) -> Result<(), LifecycleError> {
        while self.step(id)? != NsState::Running {}
        Ok(())
    }

    fn create_instance(
        &mut self,
        nsd_id: &str,
        params: &InstantiationParams,
        profile: &TimingProfile,
        network_overrides: BTreeMap<String, String>,
        slice: Option<String>,
    ) -> Result<String, LifecycleError> {
        let nsd = self
            .catalog
            .nsd(nsd_id)
            .ok_or_else(|| LifecycleError::DescriptorNotFound {
                kind: DescriptorKind::Nsd,
                id: nsd_id.to_string(),
            })?
            .clone();
        let report = self.catalog.validate_closure(DescriptorKind::Nsd, nsd_id);
        if !report.ok {
            return Err(LifecycleError::Validation(report));
        }
        self.check_params(&nsd, params)?;

        self.next_ns += 1;
        let id = format!("ns-{}", self.next_ns);
        let mut records = Vec::new();
        for m in &nsd.vnf_members {
            let vnfd = self.vnfd(&m.vnfd_id)?;
            records.push(VnfRecord {
                member: m.index,
                vnfd_id: vnfd.id.clone(),
                vdu_ids: vnfd
                    .vdus
                    .iter()
                    .map(|v| vdu_id(&id, m.index, &v.name))
                    .collect(),
                mgmt_interface: vnfd.mgmt_interface.clone(),
                mgmt_ip: None,
                interfaces: Vec::new(),
                table: None,
                wg_running: false,
                executed_primitives: Vec::new(),
            });
        }
        let redacted = params.redacted();
        self.instances.insert(
            id.clone(),
            NetworkServiceInstance {
                id: id.clone(),
                nsd_id: nsd_id.to_string(),
                slice,
                state: NsState::Created,
                params: redacted.clone(),
                profile: profile.clone(),
                vnf_records: records,
                events: Vec::new(),
                networks: network_overrides,
                owned_networks: Vec::new(),
                pending_params: params.clone(),
            },
        );
        self.log(
            &id,
            EventKind::NsCreate {
                nsd: nsd_id.to_string(),
            },
        );
        self.log(
            &id,
            EventKind::ParamsLogged {
                params: redacted.to_string(),
            },
        );
        Ok(id)
    }

    /// Every configured member exists and every key names a parameter of
    /// one of that member's initial primitives.
    fn check_params(
        &self,
        nsd: &NsDescriptor,
        params: &InstantiationParams,
    ) -> Result<(), LifecycleError> {
        for (idx, given) in &params.vnf {
            let m = nsd.member(*idx).ok_or_else(|| {
                LifecycleError::InvalidConfig(format!("nsd {} has no member {idx}", nsd.id))
            })?;
            let vnfd = self.vnfd(&m.vnfd_id)?;
            for k in given.keys() {
                if !vnfd
                    .initial_config_primitives
                    .iter()
                    .any(|p| p.param(k).is_some())
                {
                    return Err(LifecycleError::InvalidConfig(format!(
                        "member {idx}: no initial primitive of {} takes `{k}`",
                        vnfd.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// RO phase: networks, then every VDU booted in parallel.
    fn deploy(&mut self, id: &str) -> Result<(), LifecycleError> {
        let inst = self.inst(id)?;
        let nsd = self
            .catalog
            .nsd(&inst.nsd_id)
            .expect("validated at create")
            .clone();
        let profile = inst.profile.clone();

        for vl in &nsd.virtual_links {
            if self.inst(id)?.networks.contains_key(&vl.name) {
                continue;
            }
            let name = format!("{id}-{}", vl.name);
            if let Err(e) = self.vim.create_network(&name, vl.cidr) {
                return Err(self.deploy_failed(id, e.to_string()));
            }
            let inst = self.inst_mut(id)?;
            inst.networks.insert(vl.name.clone(), name.clone());
            inst.owned_networks.push(name.clone());
            self.log(
                id,
                EventKind::NetworkCreated {
                    network: name,
                    cidr: vl.cidr,
                },
            );
        }

        let networks = self.inst(id)?.networks.clone();
        let vnfds: Vec<(MemberIndex, VnfDescriptor)> = nsd
            .vnf_members
            .iter()
            .map(|m| Ok((m.index, self.vnfd(&m.vnfd_id)?.clone())))
            .collect::<Result<_, LifecycleError>>()?;
        let mut reqs = Vec::new();
        let mut owners = BTreeMap::new();
        for (idx, vnfd) in &vnfds {
            for vdu in &vnfd.vdus {
                let attachments = vdu
                    .interfaces
                    .iter()
                    .filter_map(|i| {
                        let vl = nsd.link_for(*idx, &i.name)?;
                        Some((i.name.clone(), networks[&vl.name].clone()))
                    })
                    .collect();
                let vid = vdu_id(id, *idx, &vdu.name);
                owners.insert(vid.clone(), *idx);
                reqs.push(BootRequest {
                    id: vid,
                    spec: vdu,
                    attachments,
                });
            }
        }
        let booted = match self.vim.boot_concurrent(&reqs, &profile) {
            Ok(b) => b,
            Err(e) => return Err(self.deploy_failed(id, e.to_string())),
        };

        let link_of: BTreeMap<&str, &str> = networks
            .iter()
            .map(|(l, n)| (n.as_str(), l.as_str()))
            .collect();
        let mut ready = Vec::new();
        for vdu in &booted {
            let member = owners[&vdu.id];
            let inst = self.inst_mut(id)?;
            let rec = inst
                .vnf_records
                .iter_mut()
                .find(|r| r.member == member)
                .expect("record per member");
            for i in &vdu.interfaces {
                if i.name == rec.mgmt_interface {
                    rec.mgmt_ip = Some(i.ip);
                }
                rec.interfaces.push(RecordInterface {
                    vdu: vdu.id.clone(),
                    name: i.name.clone(),
                    link: link_of
                        .get(i.network.as_str())
                        .copied()
                        .unwrap_or_default()
                        .to_string(),
                    network: i.network.clone(),
                    ip: i.ip,
                });
            }
            ready.push((
                vdu.ready_at.expect("booted VDUs are ready"),
                EventKind::VduReady {
                    member,
                    vdu: vdu.id.clone(),
                    addresses: vdu.interfaces.iter().map(|i| i.ip).collect(),
                },
            ));
        }
        ready.sort_by_key(|(t, _)| *t);
        for (t, k) in ready {
            self.log_at(id, t, k);
        }
        self.log(id, EventKind::DeployComplete);
        self.set_state(id, NsState::ConfiguringDay1);
        Ok(())
    }

    fn deploy_failed(&mut self, id: &str, reason: String) -> LifecycleError {
        self.log(
            id,
            EventKind::DeployFailed {
                reason: reason.clone(),
            },
        );
        self.fail(id, reason.clone());
        LifecycleError::DeployFailed {
            instance: id.to_string(),
            reason,
        }
    }

    /// VCA phase: each member runs its initial primitives in VNFD order;
    /// members proceed in parallel, so the clock ends at the slowest lane.
    fn configure_day1(&mut self, id: &str) -> Result<(), LifecycleError> {
        let t0 = self.now();
        let inst = self.inst(id)?;
        let pending = inst.pending_params.clone();
        let profile = inst.profile.clone();
        let members: Vec<(MemberIndex, String)> = inst
            .vnf_records
            .iter()
            .map(|r| (r.member, r.vnfd_id.clone()))
            .collect();

        let mut events: Vec<(SimTime, EventKind)> = Vec::new();
        let mut end = t0;
        let mut failure = None;
        'members: for (member, vnfd_id) in members {
            let vnfd = self.vnfd(&vnfd_id)?.clone();
            let given = pending.member(member).cloned().unwrap_or_default();
            let mut lane = t0;
            for spec in &vnfd.initial_config_primitives {
                let started = lane;
                let finished = started + profile.primitive_duration(&spec.name);
                let ph = self.placeholders(id, member)?;
                let (logged, outcome) = match resolve(spec, &given, &ph, true) {
                    Ok(values) => (
                        display_params(&values, &given),
                        self.execute(id, member, spec, &values),
                    ),
                    Err(e) => (redact(&given), Err(e.to_string())),
                };
                lane = finished;
                end = end.max(lane);
                let (status, output) = match &outcome {
                    Ok(out) => (ActionStatus::Ok, out.clone()),
                    Err(m) => (ActionStatus::Error(m.clone()), BTreeMap::new()),
                };
                events.push((
                    started,
                    EventKind::PrimitiveStarted {
                        member,
                        name: spec.name.clone(),
                        day: Day::Day1,
                    },
                ));
                events.push((
                    finished,
                    EventKind::PrimitiveFinished {
                        member,
                        name: spec.name.clone(),
                        day: Day::Day1,
                        ok: status.is_ok(),
                        duration: finished - started,
                        detail: detail(&status, &output),
                    },
                ));
                self.record_mut(id, member)?
                    .executed_primitives
                    .push(ExecutedPrimitive {
                        name: spec.name.clone(),
                        day: Day::Day1,
                        params: logged,
                        started_at: started,
                        finished_at: finished,
                        status,
                        output,
                    });
                if let Err(reason) = outcome {
                    failure = Some((member, spec.name.clone(), reason));
                    break 'members;
                }
            }
        }

        self.vim.clock().advance_to(end);
        events.sort_by_key(|(t, _)| *t);
        for (t, k) in events {
            self.log_at(id, t, k);
        }
        self.inst_mut(id)?.pending_params = InstantiationParams::default();
        if let Some((member, name, reason)) = failure {
            self.fail(id, format!("member {member} {name}: {reason}"));
            return Err(LifecycleError::PrimitiveFailed {
                instance: id.to_string(),
                member,
                name,
                reason,
            });
        }
        self.set_state(id, NsState::Running);
        self.log(id, EventKind::Running);
        Ok(())
    }

    // ---- Day-2 ----

    pub fn ns_action(
        &mut self,
        actor: &Actor,
        id: &str,
        member: MemberIndex,
        action: &str,
        params: &BTreeMap<String, String>,
    ) -> Result<ActionResult, LifecycleError> {
        self.check(actor, Operation::NsAction, Some(id))?;
        let inst = self.inst(id)?;
        if inst.state != NsState::Running {
            return Err(LifecycleError::NotRunning {
                instance: id.to_string(),
                state: inst.state,
            });
        }
        let rec = inst
            .record(member)
            .ok_or_else(|| LifecycleError::UnknownMember {
                instance: id.to_string(),
                member,
            })?;
        let vnfd = self.vnfd(&rec.vnfd_id)?;
        let spec = vnfd
            .day2_primitive(action)
            .ok_or_else(|| LifecycleError::UndeclaredAction {
                member,
                vnfd: vnfd.id.clone(),
                action: action.to_string(),
            })?
            .clone();
        let values = resolve(&spec, params, &self.placeholders(id, member)?, false)?;
        let duration = inst.profile.primitive_duration(action);

        let started = self.now();
        self.log(
            id,
            EventKind::ActionRequested {
                member,
                action: action.to_string(),
            },
        );
        self.log(
            id,
            EventKind::PrimitiveStarted {
                member,
                name: action.to_string(),
                day: Day::Day2,
            },
        );
        let outcome = self.execute(id, member, &spec, &values);
        let finished = self.vim.clock().advance(duration);
        let (status, output) = match outcome {
            Ok(out) => (ActionStatus::Ok, out),
            Err(m) => (ActionStatus::Error(m), BTreeMap::new()),
        };
        self.log(
            id,
            EventKind::PrimitiveFinished {
                member,
                name: action.to_string(),
                day: Day::Day2,
                ok: status.is_ok(),
                duration,
                detail: detail(&status, &output),
            },
        );
        self.record_mut(id, member)?
            .executed_primitives
            .push(ExecutedPrimitive {
                name: action.to_string(),
                day: Day::Day2,
                params: display_params(&values, params),
                started_at: started,
                finished_at: finished,
                status: status.clone(),
                output: output.clone(),
            });
        if let ActionStatus::Error(m) = &status {
            self.fail(id, format!("member {member} {action}: {m}"));
        }
        Ok(ActionResult {
            action: action.to_string(),
            status,
            output,
            duration,
        })
    }

    pub fn ns_show(
        &self,
        actor: &Actor,
        id: &str,
    ) -> Result<&NetworkServiceInstance, LifecycleError> {
        self.check(actor, Operation::NsShow, Some(id))?;
        self.inst(id)
    }

    pub fn ns_delete(&mut self, actor: &Actor, id: &str) -> Result<(), LifecycleError> {
        self.check(actor, Operation::NsDelete, Some(id))?;
        self.delete_instance(id)
    }

    fn delete_instance(&mut self, id: &str) -> Result<(), LifecycleError> {
        let inst = self.inst(id)?;
        if inst.state == NsState::Terminated {
            return Err(LifecycleError::AlreadyTerminated(id.to_string()));
        }
        let vdus: Vec<String> = inst
            .vnf_records
            .iter()
            .flat_map(|r| r.vdu_ids.clone())
            .collect();
        let members: Vec<MemberIndex> = inst.vnf_records.iter().map(|r| r.member).collect();
        let owned = inst.owned_networks.clone();
        for m in members {
            self.datapath.unbind(id, m);
            self.record_mut(id, m)?.wg_running = false;
        }
        for v in vdus {
            if self
                .vim
                .vdu(&v)
                .is_some_and(|x| x.state != crate::vimsim::VduState::Terminated)
            {
                self.vim.terminate_vdu(&v).expect("live VDU");
            }
        }
        for n in owned {
            // Only this instance's VDUs attach to its own networks.
            let _ = self.vim.delete_network(&n);
        }
        self.set_state(id, NsState::Terminated);
        self.log(id, EventKind::Terminated);
        Ok(())
    }

    // ---- slices ----

    /// Creates shared networks for each slice link, then instantiates the
    /// member services in declaration order with the linked virtual links
    /// mapped onto those shared networks.
    pub fn slice_instantiate(
        &mut self,
        actor: &Actor,
        nst_id: &str,
        params: &BTreeMap<String, InstantiationParams>,
        profile: &TimingProfile,
    ) -> Result<String, LifecycleError> {
        self.check(actor, Operation::SliceCreate, None)?;
        let nst = self
            .catalog
            .nst(nst_id)
            .ok_or_else(|| LifecycleError::DescriptorNotFound {
                kind: DescriptorKind::Nst,
                id: nst_id.to_string(),
            })?
            .clone();
        let report = self.catalog.validate_closure(DescriptorKind::Nst, nst_id);
        if !report.ok {
            return Err(LifecycleError::Validation(report));
        }
        if let Some(k) = params.keys().find(|k| !nst.ns_members.contains(k)) {
            return Err(LifecycleError::InvalidConfig(format!(
                "{k} is not a member of {nst_id}"
            )));
        }

        self.next_slice += 1;
        let sid = format!("slice-{}", self.next_slice);
        let mut shared = BTreeMap::new();
        let mut overrides: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for link in &nst.slice_links {
            let mut net = None;
            for ep in &link.endpoints {
                let nsd = self.catalog.nsd(&ep.nsd_id).expect("validated");
                let cp = nsd
                    .connection_point(&ep.connection_point)
                    .expect("validated");
                let vl = nsd.link_for(cp.member, &cp.interface).expect("validated");
                let name = match &net {
                    Some(n) => n,
                    None => {
                        let name = format!("{sid}-{}", link.name);
                        self.vim.create_network(&name, vl.cidr).map_err(|e| {
                            LifecycleError::DeployFailed {
                                instance: sid.clone(),
                                reason: e.to_string(),
                            }
                        })?;
                        shared.insert(link.name.clone(), name.clone());
                        net.insert(name)
                    }
                };
                overrides
                    .entry(ep.nsd_id.clone())
                    .or_default()
                    .insert(vl.name.clone(), name.clone());
            }
        }

        self.slices.insert(
            sid.clone(),
            SliceInstance {
                id: sid.clone(),
                nst_id: nst_id.to_string(),
                state: NsState::Created,
                ns_instances: Vec::new(),
                shared_networks: shared,
            },
        );
        for nsd_id in &nst.ns_members {
            let p = params.get(nsd_id).cloned().unwrap_or_default();
            let ov = overrides.remove(nsd_id).unwrap_or_default();
            let created = self
                .create_instance(nsd_id, &p, profile, ov, Some(sid.clone()))
                .and_then(|ns| {
                    self.slice_mut(&sid).ns_instances.push(ns.clone());
                    self.run_to_completion(&ns)
                });
            if let Err(e) = created {
                self.slice_mut(&sid).state = NsState::Failed;
                return Err(e);
            }
        }
        self.slice_mut(&sid).state = NsState::Running;
        Ok(sid)
    }

    pub fn slice_delete(&mut self, actor: &Actor, sid: &str) -> Result<(), LifecycleError> {
        self.check(actor, Operation::SliceCreate, None)?;
        let slice = self
            .slices
            .get(sid)
            .ok_or_else(|| LifecycleError::SliceNotFound(sid.to_string()))?
            .clone();
        if slice.state == NsState::Terminated {
            return Err(LifecycleError::AlreadyTerminated(sid.to_string()));
        }
        for ns in &slice.ns_instances {
            if self.inst(ns)?.state != NsState::Terminated {
                self.delete_instance(ns)?;
            }
        }
        for net in slice.shared_networks.values() {
            let _ = self.vim.delete_network(net);
        }
        self.slice_mut(sid).state = NsState::Terminated;
        Ok(())
    }

    // ---- datapath access for benchmarks ----

    /// Members of `id` holding a keypair, in member order.
    pub fn gateway_members(&self, id: &str) -> Result<Vec<MemberIndex>, LifecycleError> {
        Ok(self
            .inst(id)?
            .vnf_records
            .iter()
            .filter(|r| r.table.is_some())
            .map(|r| r.member)
            .collect())
    }

    /// Checks out a running gateway: a copy of its table plus its bound
    /// socket (bound afresh if needed). Return it with
    /// [`restore_gateway`](Self::restore_gateway).
    pub fn take_gateway(
        &mut self,
        id: &str,
        member: MemberIndex,
    ) -> Result<Gateway, LifecycleError> {
        let rec = self.record(id, member)?;
        let not_gw = || LifecycleError::NotAGateway {
            instance: id.to_string(),
            member,
        };
        let table = rec.table.clone().ok_or_else(not_gw)?;
        if !rec.wg_running {
            return Err(not_gw());
        }
        let listen = table.listen_endpoint().ok_or_else(not_gw)?;
        let network = rec.mgmt().ok_or_else(not_gw)?.network.clone();
        let socket = match self.datapath.take(id, member) {
            Some(s) => s,
            None => self.datapath.segment(&network).bind(listen)?,
        };
        Ok(Gateway::with_socket(table, socket))
    }

    /// Writes back the (possibly advanced) table and keeps the socket bound.
    pub fn restore_gateway(
        &mut self,
        id: &str,
        member: MemberIndex,
        mut gw: Gateway,
    ) -> Result<(), LifecycleError> {
        let rec = self.record_mut(id, member)?;
        rec.table = Some(gw.table.clone());
        if let Some(s) = gw.detach() {
            self.datapath.put(id, member, s);
        }
        Ok(())
    }

    /// The inner address of the host behind a gateway: a VDU of another
    /// member on one of the gateway's data networks, else the gateway's own
    /// data address.
    pub fn host_behind(&self, id: &str, member: MemberIndex) -> Result<Ipv4Addr, LifecycleError> {
        let rec = self.record(id, member)?;
        let data: Vec<&RecordInterface> = rec.data_interfaces().collect();
        let hosts = self
            .instances
            .values()
            .filter(|i| i.state == NsState::Running)
            .flat_map(|i| i.vnf_records.iter().map(move |r| (i.id.as_str(), r)))
            .filter(|(iid, r)| !(*iid == id && r.member == member) && r.table.is_none());
        for h in hosts {
            for i in &h.1.interfaces {
                if data.iter().any(|d| d.network == i.network) {
                    return Ok(i.ip);
                }
            }
        }
        data.first()
            .map(|d| d.ip)
            .ok_or_else(|| LifecycleError::NotAGateway {
                instance: id.to_string(),
                member,
            })
    }

    pub fn is_bound(&self, id: &str, member: MemberIndex) -> bool {
        self.datapath.is_bound(id, member)
    }

    // ---- primitive implementations ----

    fn execute(
        &mut self,
        id: &str,
        member: MemberIndex,
        spec: &PrimitiveSpec,
        values: &BTreeMap<String, ParamValue>,
    ) -> Result<BTreeMap<String, String>, String> {
        let mut out = BTreeMap::new();
        let str_param = |k: &str| {
            values
                .get(k)
                .and_then(ParamValue::as_str)
                .map(str::to_string)
        };
        match spec.name.as_str() {
            "generate-keys" => {
                let seed = str_param("seed").map(|s| derive_seed(&s, id, member));
                let kp = generate_keypair(seed);
                let rec = self.record_mut(id, member).map_err(|e| e.to_string())?;
                let mut table = CryptokeyRoutingTable::new(WG_INTERFACE, kp);
                if let Some(old) = &rec.table {
                    table.set_tunnel_address(old.tunnel_address());
                    table.set_listen_endpoint(old.listen_endpoint());
                    table.set_local_prefixes(old.local_prefixes().to_vec());
                }
                out.insert("public-key".into(), table.public_key().to_string());
                rec.table = Some(table);
            }
            "enable-forwarding" => {
                for v in self
                    .record(id, member)
                    .map_err(|e| e.to_string())?
                    .vdu_ids
                    .clone()
                {
                    self.vim
                        .set_forwarding(&v, true)
                        .map_err(|e| e.to_string())?;
                }
            }
            "start-wg" => {
                let rec = self.record(id, member).map_err(|e| e.to_string())?;
                let table = rec
                    .table
                    .as_ref()
                    .ok_or("no keypair; run generate-keys first")?;
                let mgmt = rec.mgmt().ok_or("management interface has no address")?;
                let port = match values.get("listen-port") {
                    Some(ParamValue::Int(p)) => u16::try_from(*p)
                        .ok()
                        .filter(|p| *p > 0)
                        .ok_or(format!("invalid listen-port {p}"))?,
                    _ => table
                        .listen_endpoint()
                        .map(|e| e.port())
                        .unwrap_or(DEFAULT_LISTEN_PORT),
                };
                let tunnel = match values.get("tunnel-address") {
                    Some(ParamValue::Ip(a)) => Some(*a),
                    _ => table.tunnel_address(),
                };
                let listen = Endpoint::new(mgmt.ip, port).map_err(|e| e.to_string())?;
                let network = mgmt.network.clone();
                let prefixes: Vec<_> = rec
                    .data_interfaces()
                    .filter_map(|i| self.vim.network(&i.network).map(|n| n.cidr))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                self.datapath
                    .bind(id, member, &network, listen)
                    .map_err(|e| e.to_string())?;
                let rec = self.record_mut(id, member).map_err(|e| e.to_string())?;
                let table = rec.table.as_mut().expect("checked above");
                table.set_tunnel_address(tunnel);
                table.set_listen_endpoint(Some(listen));
                table.set_local_prefixes(prefixes);
                rec.wg_running = true;
                out.insert("listen-endpoint".into(), listen.to_string());
            }
            "stop-wg" => {
                self.datapath.unbind(id, member);
                self.record_mut(id, member)
                    .map_err(|e| e.to_string())?
                    .wg_running = false;
            }
            "add-peer" | "del-peer" | "get-public-key" => {
                let rec = self.record_mut(id, member).map_err(|e| e.to_string())?;
                let table = rec
                    .table
                    .as_mut()
                    .ok_or("no keypair; run generate-keys first")?;
                match spec.name.as_str() {
                    "get-public-key" => {
                        out.insert("public-key".into(), table.public_key().to_string());
                    }
                    name => {
                        let key = str_param("public-key")
                            .ok_or("missing public-key")?
                            .parse()
                            .map_err(|e: crate::cryptokey::KeyParseError| e.to_string())?;
                        if name == "add-peer" {
                            let nets = match values.get("allowed-ips") {
                                Some(ParamValue::Cidrs(n)) => n.clone(),
                                _ => return Err("missing allowed-ips".into()),
                            };
                            let endpoint = match values.get("endpoint") {
                                Some(ParamValue::Endpoint(e)) => Some(*e),
                                _ => None,
                            };
                            table
                                .add_peer(key, &nets, endpoint)
                                .map_err(|e| e.to_string())?;
                        } else {
                            table.del_peer(&key).map_err(|e| e.to_string())?;
                        }
                    }
                }
            }
            // Declared but without built-in behavior: accepted as a no-op.
            _ => {}
        }
        Ok(out)
    }

    // ---- helpers ----

    fn vnfd(&self, id: &str) -> Result<&VnfDescriptor, LifecycleError> {
        self.catalog
            .vnfd(id)
            .ok_or_else(|| LifecycleError::DescriptorNotFound {
                kind: DescriptorKind::Vnfd,
                id: id.to_string(),
            })
    }

    fn inst(&self, id: &str) -> Result<&NetworkServiceInstance, LifecycleError> {
        self.instances
            .get(id)
            .ok_or_else(|| LifecycleError::InstanceNotFound(id.to_string()))
    }

    fn inst_mut(&mut self, id: &str) -> Result<&mut NetworkServiceInstance, LifecycleError> {
        self.instances
            .get_mut(id)
            .ok_or_else(|| LifecycleError::InstanceNotFound(id.to_string()))
    }

    fn record(&self, id: &str, member: MemberIndex) -> Result<&VnfRecord, LifecycleError> {
        self.inst(id)?
            .record(member)
            .ok_or_else(|| LifecycleError::UnknownMember {
                instance: id.to_string(),
                member,
            })
    }

    fn record_mut(
        &mut self,
        id: &str,
        member: MemberIndex,
    ) -> Result<&mut VnfRecord, LifecycleError> {
        self.inst_mut(id)?
            .vnf_records
            .iter_mut()
            .find(|r| r.member == member)
            .ok_or_else(|| LifecycleError::UnknownMember {
                instance: id.to_string(),
                member,
            })
    }

    fn slice_mut(&mut self, sid: &str) -> &mut SliceInstance {
        self.slices.get_mut(sid).expect("slice registered")
    }

    fn placeholders(&self, id: &str, member: MemberIndex) -> Result<Placeholders, LifecycleError> {
        Ok(Placeholders {
            member_index: member,
            mgmt_ip: self.record(id, member)?.mgmt_ip,
            ns_id: id.to_string(),
        })
    }

    fn set_state(&mut self, id: &str, s: NsState) {
        if let Some(i) = self.instances.get_mut(id) {
            i.state = s;
        }
    }

    fn fail(&mut self, id: &str, reason: String) {
        self.set_state(id, NsState::Failed);
        self.log(id, EventKind::Failed { reason });
    }

    fn log(&mut self, id: &str, kind: EventKind) {
        let now = self.now();
        self.log_at(id, now, kind);
    }

    fn log_at(&mut self, id: &str, at: SimTime, kind: EventKind) {
        if let Some(i) = self.instances.get_mut(id) {
            i.events.push(Event {
                at,
                instance: id.to_string(),
                kind,
            });
        }
    }
}

fn vdu_id(ns: &str, member: MemberIndex, vdu: &str) -> String {
    format!("{ns}-m{member}-{vdu}")
}

/// Per-instance key seed: the operator seed alone would give every slice
/// built from the same config the same keys.
fn derive_seed(seed: &str, ns: &str, member: MemberIndex) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(KEY_SEED_LABEL);
    for part in [
        seed.as_bytes(),
        ns.as_bytes(),
        member.to_string().as_bytes(),
    ] {
        h.update((part.len() as u32).to_be_bytes());
        h.update(part);
    }
    h.finalize().into()
}

/// Resolved values as recorded: raw text for given values, with secrets
/// redacted, and canonical text for filled-in defaults.
fn display_params(
    values: &BTreeMap<String, ParamValue>,
    given: &BTreeMap<String, String>,
) -> BTreeMap<String, String> {
    values
        .iter()
        .map(|(k, v)| {
            let text = if SECRET_PARAMS.contains(&k.as_str()) {
                REDACTED.to_string()
            } else if let Some(g) = given.get(k) {
                g.clone()
            } else {
                match v {
                    ParamValue::Str(s) => s.clone(),
                    ParamValue::Int(i) => i.to_string(),
                    ParamValue::Ip(a) => a.to_string(),
                    ParamValue::Cidrs(n) => n
                        .iter()
                        .map(|n| n.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                    ParamValue::Endpoint(e) => e.to_string(),
                }
            };
            (k.clone(), text)
        })
        .collect()
}

fn detail(status: &ActionStatus, output: &BTreeMap<String, String>) -> String {
    match status {
        ActionStatus::Error(m) => m.clone(),
        ActionStatus::Ok => output
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" "),
    }
}
