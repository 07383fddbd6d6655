//! The NSN agent: PIT, PST, data store, microservice repository and the
//! named-service forwarding engine, plus the local consumer proxy.
//!
//! An agent is a plain state machine. Every entry point takes the current
//! time and returns the [`Action`]s the caller must carry out: packets to
//! send, timers to arm, trace notes and request outcomes. Interests and Data
//! addressed to the agent itself (co-located microservices, proxy requests)
//! are looped back internally before the entry point returns.

mod microservice;
mod status;
mod tables;

use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use microservice::{digest, run_microservice, MicroserviceDescriptor};
pub use status::{AgentStatus, NeighborDelay};
pub use tables::{DataStore, DataStoreEntry, Pit, PitEntry, PitInsert, Pst, PstEntry};

use crate::names::{FaceId, Label, ServiceName};
use crate::packets::{DataPacket, DeployPacket, InterestPacket, Packet};

pub type RequestId = u64;

/// Payload prefix marking a failed retrieve.
pub const ERROR_MARKER: &str = "!error:";

/// Where a packet came from or goes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Face {
    Net(FaceId),
    /// The agent itself: its proxy or a co-located microservice.
    Local,
}

impl std::fmt::Display for Face {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Face::Net(id) => write!(f, "{id}"),
            Face::Local => f.write_str("local"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Peer {
    Agent(Label),
    Controller,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceInfo {
    pub id: FaceId,
    pub peer: Peer,
    pub delay: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostedData {
    pub name: Label,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentConfig {
    pub id: Label,
    pub faces: Vec<FaceInfo>,
    /// Face toward the controller used for retrieve Interests; defaults to a
    /// face whose peer is the controller.
    pub controller_face: Option<FaceId>,
    pub battery: u8,
    pub storage_total: u64,
    pub compute_total: u64,
    pub hosted: Vec<HostedData>,
    /// Freshness of cached copies, per Data name. Absent means forever.
    pub freshness: BTreeMap<String, u64>,
    /// Lifetime of exec, lookup and retrieve PIT/PST entries.
    pub pit_lifetime: u64,
    /// Lifetime of a monitor round's PIT entry.
    pub monitor_lifetime: u64,
    pub seed: u64,
}

impl AgentConfig {
    pub fn new(id: Label) -> Self {
        AgentConfig {
            id,
            faces: Vec::new(),
            controller_face: None,
            battery: 100,
            storage_total: 100,
            compute_total: 100,
            hosted: Vec::new(),
            freshness: BTreeMap::new(),
            pit_lifetime: 1_000,
            monitor_lifetime: 500,
            seed: 0,
        }
    }

    pub fn with_face(mut self, id: FaceId, peer: Peer, delay: u64) -> Self {
        self.faces.push(FaceInfo { id, peer, delay });
        self
    }

    pub fn with_neighbor(self, id: FaceId, neighbor: &str, delay: u64) -> Self {
        let label = Label::new(neighbor).expect("valid neighbor label");
        self.with_face(id, Peer::Agent(label), delay)
    }

    pub fn with_hosted(mut self, name: &str, payload: Vec<u8>) -> Self {
        self.hosted.push(HostedData {
            name: Label::new(name).expect("valid data label"),
            payload,
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    DuplicateNonce,
    NoPitEntry,
    UnsolicitedData,
    UnknownMicroservice,
    TargetMismatch,
    InsufficientStorage,
    DeadlineMissed,
    Unforwardable,
    Unsupported,
    LinkLoss,
    NoLink,
    Malformed,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::DuplicateNonce => "duplicate-nonce",
            DropReason::NoPitEntry => "no-pit-entry",
            DropReason::UnsolicitedData => "unsolicited-data",
            DropReason::UnknownMicroservice => "unknown-microservice",
            DropReason::TargetMismatch => "target-mismatch",
            DropReason::InsufficientStorage => "insufficient-storage",
            DropReason::DeadlineMissed => "deadline-missed",
            DropReason::Unforwardable => "unforwardable",
            DropReason::Unsupported => "unsupported",
            DropReason::LinkLoss => "link-loss",
            DropReason::NoLink => "no-link",
            DropReason::Malformed => "malformed",
        }
    }
}

/// Trace-only events emitted by agents and the controller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Note {
    /// Packet handed to the agent by itself.
    LocalPacket { packet: Packet },
    Request { request: RequestId, head: Label, execution_time: u64 },
    PitInsert { name: String, face: Face },
    PitAggregate { name: String, face: Face },
    PitExpire { name: String },
    PstInsert { name: String, microservice: Label },
    PstDischarge { name: String },
    PstExpire { name: String },
    CacheHit { name: String },
    LookupHit { head: Label },
    LookupTimeout { request: RequestId, head: Label },
    ExecStart { microservice: Label, name: String },
    ExecDone { microservice: Label, name: String },
    StatusAppended,
    Install { microservice: Label, already: bool },
    Drop { reason: DropReason, packet: &'static str, name: String },
    /// Controller-side event with free-form fields.
    Controller { kind: &'static str, fields: Vec<(String, String)> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action<T> {
    Send { face: FaceId, packet: Packet },
    Timer { after: u64, timer: T },
    Note(Note),
    Completed { request: RequestId, name: ServiceName, payload: Vec<u8> },
    Failed { request: RequestId, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentTimer {
    PitExpire { key: String, created_at: u64 },
    PstExpire { key: String, created_at: u64 },
    ExecDone(u64),
    LookupTimeout(RequestId),
    MonitorFallback { nonce: u64 },
    MonitorExpire { nonce: u64 },
}

pub type AgentAction = Action<AgentTimer>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("execution deadline must be positive")]
    UnknownDeadline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    Exec { pit_key: String, data_key: String },
    Lookup { key: String },
    Retrieve { key: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PendingRequest {
    head: Label,
    phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PendingExec {
    microservice: Label,
    inputs: Vec<ServiceName>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Running {
    microservice: MicroserviceDescriptor,
    origin: ServiceName,
    inputs: Vec<(ServiceName, Vec<u8>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct MonitorRound {
    nonce: u64,
    appended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct LookupReply {
    data_key: String,
    lookup_key: String,
}

pub struct Agent {
    config: AgentConfig,
    storage_free: u64,
    install_failures: u32,
    pit: Pit,
    pst: Pst,
    store: DataStore,
    hosted: BTreeMap<String, Vec<u8>>,
    repository: BTreeMap<Label, MicroserviceDescriptor>,
    known_trees: BTreeMap<Label, ServiceName>,
    seen_nonces: HashSet<u64>,
    requests: BTreeMap<RequestId, PendingRequest>,
    lookup_replies: Vec<LookupReply>,
    pending: BTreeMap<String, PendingExec>,
    running: BTreeMap<u64, Running>,
    next_exec: u64,
    monitor: Option<MonitorRound>,
    rng: ChaCha8Rng,
    loopback: VecDeque<(Packet, u64)>,
}

type Out = Vec<AgentAction>;

impl Agent {
    pub fn new(mut config: AgentConfig) -> Self {
        if config.controller_face.is_none() {
            config.controller_face = config
                .faces
                .iter()
                .find(|f| f.peer == Peer::Controller)
                .map(|f| f.id);
        }
        let hosted = config
            .hosted
            .iter()
            .map(|h| (ServiceName::element(h.name.clone()).to_string(), h.payload.clone()))
            .collect();
        Agent {
            storage_free: config.storage_total,
            install_failures: 0,
            pit: Pit::default(),
            pst: Pst::default(),
            store: DataStore::default(),
            hosted,
            repository: BTreeMap::new(),
            known_trees: BTreeMap::new(),
            seen_nonces: HashSet::new(),
            requests: BTreeMap::new(),
            lookup_replies: Vec::new(),
            pending: BTreeMap::new(),
            running: BTreeMap::new(),
            next_exec: 0,
            monitor: None,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            loopback: VecDeque::new(),
            config,
        }
    }

    pub fn id(&self) -> &Label {
        &self.config.id
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn pit(&self) -> &Pit {
        &self.pit
    }

    pub fn pst(&self) -> &Pst {
        &self.pst
    }

    pub fn store(&self) -> &DataStore {
        &self.store
    }

    pub fn repository(&self) -> &BTreeMap<Label, MicroserviceDescriptor> {
        &self.repository
    }

    pub fn known_tree(&self, head: &Label) -> Option<&ServiceName> {
        self.known_trees.get(head)
    }

    pub fn storage_free(&self) -> u64 {
        self.storage_free
    }

    /// True when no request, execution or pending entry is outstanding.
    pub fn is_idle(&self) -> bool {
        self.pit.is_empty()
            && self.pst.is_empty()
            && self.pending.is_empty()
            && self.running.is_empty()
            && self.requests.is_empty()
            && self.lookup_replies.is_empty()
    }

    /// Installs a microservice directly, bypassing Deploy packets.
    pub fn install(&mut self, ms: MicroserviceDescriptor) {
        if !self.repository.contains_key(&ms.id) {
            self.storage_free = self.storage_free.saturating_sub(ms.storage_demand);
            self.repository.insert(ms.id.clone(), ms);
        }
    }

    /// Records the exec name of a service whose head this agent can reach.
    pub fn learn_tree(&mut self, name: ServiceName) {
        if let Some(head) = name.head() {
            self.known_trees.insert(head.clone(), name);
        }
    }

    pub fn status(&self) -> AgentStatus {
        AgentStatus {
            agent_id: self.config.id.clone(),
            battery: self.config.battery,
            storage_free: self.storage_free,
            storage_total: self.config.storage_total,
            compute_free: self.config.compute_total,
            neighbor_delays: self
                .config
                .faces
                .iter()
                .filter_map(|f| match &f.peer {
                    Peer::Agent(id) => Some(NeighborDelay {
                        face: f.id,
                        neighbor: id.clone(),
                        delay: f.delay,
                    }),
                    Peer::Controller => None,
                })
                .collect(),
            hosted_data: self.config.hosted.iter().map(|h| h.name.clone()).collect(),
            install_failures: self.install_failures,
        }
    }

    fn agent_faces(&self) -> impl Iterator<Item = FaceId> + '_ {
        self.config
            .faces
            .iter()
            .filter(|f| matches!(f.peer, Peer::Agent(_)))
            .map(|f| f.id)
    }

    fn flood_faces(&self, arrival: Face) -> Vec<FaceId> {
        self.agent_faces().filter(|&f| Face::Net(f) != arrival).collect()
    }

    fn has_face(&self, face: FaceId) -> bool {
        self.config.faces.iter().any(|f| f.id == face)
    }

    fn nonce(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Remembers a nonce; false if it was already seen.
    fn fresh_nonce(&mut self, nonce: u64) -> bool {
        self.seen_nonces.insert(nonce)
    }

    fn lookup_data(&self, key: &str, now: u64) -> Option<Vec<u8>> {
        self.hosted
            .get(key)
            .map(|p| p.to_vec())
            .or_else(|| self.store.get(key, now).map(|p| p.to_vec()))
    }

    fn has_data(&self, key: &str, now: u64) -> bool {
        self.hosted.contains_key(key) || self.store.contains(key, now)
    }

    fn drop_note(out: &mut Out, reason: DropReason, packet: &Packet) {
        out.push(Action::Note(Note::Drop {
            reason,
            packet: packet.type_name(),
            name: packet.name().map(|n| n.to_string()).unwrap_or_default(),
        }));
    }

    fn send(out: &mut Out, face: FaceId, packet: impl Into<Packet>) {
        out.push(Action::Send {
            face,
            packet: packet.into(),
        });
    }

    fn emit(&mut self, out: &mut Out, face: Face, packet: impl Into<Packet>, now: u64) {
        match face {
            Face::Net(id) => Self::send(out, id, packet),
            Face::Local => self.loopback.push_back((packet.into(), now)),
        }
    }

    fn arm_pit_expiry(&self, out: &mut Out, key: String, now: u64) {
        out.push(Action::Timer {
            after: self.config.pit_lifetime,
            timer: AgentTimer::PitExpire { key, created_at: now },
        });
    }

    fn pit_insert(&mut self, out: &mut Out, name: &ServiceName, face: Face, nonce: u64, now: u64) -> PitInsert {
        let result = self.pit.insert(name, face, nonce, now);
        let key = name.to_string();
        match result {
            PitInsert::New => {
                out.push(Action::Note(Note::PitInsert {
                    name: key.clone(),
                    face,
                }));
                self.arm_pit_expiry(out, key, now);
            }
            PitInsert::Aggregated => out.push(Action::Note(Note::PitAggregate { name: key, face })),
        }
        result
    }

    fn drain(&mut self, out: &mut Out) {
        while let Some((packet, now)) = self.loopback.pop_front() {
            out.push(Action::Note(Note::LocalPacket {
                packet: packet.clone(),
            }));
            self.dispatch(now, Face::Local, packet, out);
        }
    }

    fn with_out(&mut self, f: impl FnOnce(&mut Self, &mut Out)) -> Out {
        let mut out = Vec::new();
        f(self, &mut out);
        self.drain(&mut out);
        out
    }

    /// Entry point for a packet delivered on a network face.
    pub fn on_packet(&mut self, now: u64, face: FaceId, packet: Packet) -> Vec<AgentAction> {
        self.with_out(|a, out| a.dispatch(now, Face::Net(face), packet, out))
    }

    fn dispatch(&mut self, now: u64, face: Face, packet: Packet, out: &mut Out) {
        use crate::names::Command;
        match packet {
            Packet::Interest(i) => match i.name.command() {
                Command::Monitor => self.monitor_interest(now, face, i, out),
                Command::Lookup => self.lookup_interest(now, face, i, out),
                Command::Retrieve => self.retrieve_interest(now, face, i, out),
                Command::Exec | Command::None => self.exec_interest(now, face, i, out),
                Command::Deploy => Self::drop_note(out, DropReason::Unsupported, &Packet::Interest(i)),
            },
            Packet::Data(d) if d.name.is_monitor() => self.monitor_data(now, face, d, out),
            Packet::Data(d) => self.data(now, face, d, out),
            Packet::Deploy(p) => self.deploy(now, face, p, out),
        }
    }

    pub fn on_timer(&mut self, now: u64, timer: AgentTimer) -> Vec<AgentAction> {
        self.with_out(|a, out| a.timer(now, timer, out))
    }

    fn timer(&mut self, now: u64, timer: AgentTimer, out: &mut Out) {
        match timer {
            AgentTimer::PitExpire { key, created_at } => {
                if self.pit.get(&key).is_some_and(|e| e.created_at == created_at) {
                    let entry = self.pit.remove(&key).expect("checked above");
                    out.push(Action::Note(Note::PitExpire { name: key.clone() }));
                    self.lookup_replies.retain(|r| r.lookup_key != key);
                    if entry.in_faces.contains(&Face::Local) {
                        self.fail_requests(out, &key, "expired");
                    }
                }
            }
            AgentTimer::PstExpire { key, created_at } => {
                if self.pst.get(&key).is_some_and(|e| e.created_at == created_at) {
                    let entry = self.pst.remove(&key).expect("checked above");
                    out.push(Action::Note(Note::PstExpire { name: key }));
                    for (_, origin) in entry.waiting {
                        self.pending.remove(&origin);
                    }
                }
            }
            AgentTimer::ExecDone(id) => self.finish_exec(now, id, out),
            AgentTimer::LookupTimeout(request) => self.lookup_timeout(now, request, out),
            AgentTimer::MonitorFallback { nonce } => {
                let Some(round) = self.monitor.as_mut().filter(|r| r.nonce == nonce && !r.appended) else {
                    return;
                };
                round.appended = true;
                let data = DataPacket::monitor(vec![self.status()]);
                let faces = self
                    .pit
                    .get(&ServiceName::Monitor.to_string())
                    .map(|e| e.in_faces.clone())
                    .unwrap_or_default();
                for face in faces {
                    self.emit(out, face, data.clone(), now);
                }
            }
            AgentTimer::MonitorExpire { nonce } => {
                if self.monitor.is_some_and(|r| r.nonce == nonce) {
                    self.monitor = None;
                    let key = ServiceName::Monitor.to_string();
                    if self.pit.remove(&key).is_some() {
                        out.push(Action::Note(Note::PitExpire { name: key }));
                    }
                }
            }
        }
    }

    fn fail_requests(&mut self, out: &mut Out, pit_key: &str, reason: &str) {
        let failed: Vec<RequestId> = self
            .requests
            .iter()
            .filter(|(_, r)| match &r.phase {
                Phase::Exec { pit_key: k, .. } | Phase::Retrieve { key: k } => k == pit_key,
                Phase::Lookup { .. } => false,
            })
            .map(|(&id, _)| id)
            .collect();
        for request in failed {
            self.requests.remove(&request);
            out.push(Action::Failed {
                request,
                reason: reason.to_string(),
            });
        }
    }

    // ---- monitoring -------------------------------------------------------

    /// Floods a monitor Interest to every other agent face; a leaf answers
    /// with its own status.
    pub fn handle_monitor_interest(&mut self, now: u64, face: FaceId, interest: InterestPacket) -> Vec<AgentAction> {
        self.with_out(|a, out| a.monitor_interest(now, Face::Net(face), interest, out))
    }

    fn monitor_interest(&mut self, now: u64, face: Face, interest: InterestPacket, out: &mut Out) {
        if !self.fresh_nonce(interest.nonce) {
            return Self::drop_note(out, DropReason::DuplicateNonce, &Packet::Interest(interest));
        }
        let nonce = interest.nonce;
        self.pit.reset(&interest.name, face, nonce, now);
        out.push(Action::Note(Note::PitInsert {
            name: interest.name.to_string(),
            face,
        }));
        out.push(Action::Timer {
            after: self.config.monitor_lifetime,
            timer: AgentTimer::MonitorExpire { nonce },
        });
        let targets = self.flood_faces(face);
        if targets.is_empty() {
            self.monitor = Some(MonitorRound { nonce, appended: true });
            let data = DataPacket::monitor(vec![self.status()]);
            self.emit(out, face, data, now);
        } else {
            self.monitor = Some(MonitorRound { nonce, appended: false });
            let forwarded = InterestPacket {
                hop_count: interest.hop_count + u32::from(face != Face::Local),
                ..interest
            };
            for target in targets {
                Self::send(out, target, forwarded.clone());
            }
            out.push(Action::Timer {
                after: self.config.monitor_lifetime / 2,
                timer: AgentTimer::MonitorFallback { nonce },
            });
        }
    }

    /// Adds this agent's status (once per round) and forwards along the PIT.
    pub fn handle_monitor_data(&mut self, now: u64, face: FaceId, data: DataPacket) -> Vec<AgentAction> {
        self.with_out(|a, out| a.monitor_data(now, Face::Net(face), data, out))
    }

    fn monitor_data(&mut self, now: u64, _face: Face, mut data: DataPacket, out: &mut Out) {
        let key = data.name.to_string();
        let (Some(round), Some(entry)) = (self.monitor.as_mut(), self.pit.get(&key)) else {
            return Self::drop_note(out, DropReason::NoPitEntry, &Packet::Data(data));
        };
        let faces = entry.in_faces.clone();
        if !round.appended {
            round.appended = true;
            let status = self.status();
            data.status_list.get_or_insert_with(Vec::new).push(status);
            out.push(Action::Note(Note::StatusAppended));
        }
        for face in faces {
            self.emit(out, face, data.clone(), now);
        }
    }

    // ---- service lookup ---------------------------------------------------

    fn serves(&self, head: &Label) -> bool {
        self.repository.contains_key(head) && self.known_trees.contains_key(head)
    }

    /// Runs the service if this agent hosts its head and the deadline allows,
    /// otherwise floods the lookup onward.
    pub fn handle_lookup_interest(&mut self, now: u64, face: FaceId, interest: InterestPacket) -> Vec<AgentAction> {
        self.with_out(|a, out| a.lookup_interest(now, Face::Net(face), interest, out))
    }

    fn lookup_interest(&mut self, now: u64, face: Face, interest: InterestPacket, out: &mut Out) {
        let ServiceName::Lookup { head, meta } = &interest.name else {
            return Self::drop_note(out, DropReason::Malformed, &Packet::Interest(interest));
        };
        if !self.fresh_nonce(interest.nonce) {
            return Self::drop_note(out, DropReason::DuplicateNonce, &Packet::Interest(interest));
        }
        if self.serves(head) {
            let exec_time = self.repository[head].exec_time;
            if !deadline_met(exec_time, now, meta.triggering_time, meta.execution_time) {
                return Self::drop_note(out, DropReason::DeadlineMissed, &Packet::Interest(interest));
            }
            out.push(Action::Note(Note::LookupHit { head: head.clone() }));
            let tree = self.known_trees[head].clone();
            if self.pit_insert(out, &interest.name, face, interest.nonce, now) == PitInsert::Aggregated {
                return;
            }
            self.lookup_replies.push(LookupReply {
                data_key: tree.data_name().to_string(),
                lookup_key: interest.name.to_string(),
            });
            let exec = InterestPacket::new(tree, self.nonce());
            self.emit(out, Face::Local, exec, now);
            return;
        }
        let targets = self.flood_faces(face);
        if targets.is_empty() {
            return Self::drop_note(out, DropReason::Unforwardable, &Packet::Interest(interest));
        }
        if self.pit_insert(out, &interest.name, face, interest.nonce, now) == PitInsert::Aggregated {
            return;
        }
        let forwarded = InterestPacket {
            hop_count: interest.hop_count + u32::from(face != Face::Local),
            ..interest
        };
        for target in targets {
            Self::send(out, target, forwarded.clone());
        }
    }

    /// Local proxy entry point.
    pub fn submit_local_request(
        &mut self,
        now: u64,
        request: RequestId,
        head: Label,
        execution_time: u64,
    ) -> Result<Vec<AgentAction>, AgentError> {
        if execution_time == 0 {
            return Err(AgentError::UnknownDeadline);
        }
        Ok(self.with_out(|a, out| {
            out.push(Action::Note(Note::Request {
                request,
                head: head.clone(),
                execution_time,
            }));
            if let Some(tree) = a.known_trees.get(&head).cloned() {
                a.requests.insert(
                    request,
                    PendingRequest {
                        head,
                        phase: Phase::Exec {
                            pit_key: tree.to_string(),
                            data_key: tree.data_name().to_string(),
                        },
                    },
                );
                let exec = InterestPacket::new(tree, a.nonce());
                a.emit(out, Face::Local, exec, now);
                return;
            }
            let timeout = 2 * a
                .repository
                .get(&head)
                .map_or(execution_time, |ms| ms.exec_time);
            let name = ServiceName::lookup(head.clone(), execution_time, now);
            a.requests.insert(
                request,
                PendingRequest {
                    head,
                    phase: Phase::Lookup { key: name.to_string() },
                },
            );
            out.push(Action::Timer {
                after: timeout,
                timer: AgentTimer::LookupTimeout(request),
            });
            let lookup = InterestPacket::new(name, a.nonce());
            a.lookup_interest(now, Face::Local, lookup, out);
        }))
    }

    fn lookup_timeout(&mut self, now: u64, request: RequestId, out: &mut Out) {
        let Some(pending) = self.requests.get_mut(&request) else {
            return;
        };
        if !matches!(pending.phase, Phase::Lookup { .. }) {
            return;
        }
        let head = pending.head.clone();
        out.push(Action::Note(Note::LookupTimeout {
            request,
            head: head.clone(),
        }));
        let name = ServiceName::Retrieve {
            head,
            requester: Some(self.config.id.clone()),
        };
        pending.phase = Phase::Retrieve { key: name.to_string() };
        let interest = InterestPacket::new(name, self.nonce());
        self.retrieve_interest(now, Face::Local, interest, out);
    }

    // ---- service retrieval ------------------------------------------------

    fn retrieve_interest(&mut self, now: u64, face: Face, interest: InterestPacket, out: &mut Out) {
        if !self.fresh_nonce(interest.nonce) {
            return Self::drop_note(out, DropReason::DuplicateNonce, &Packet::Interest(interest));
        }
        let targets = match self.config.controller_face {
            Some(f) if Face::Net(f) != face => vec![f],
            _ => self.flood_faces(face),
        };
        if targets.is_empty() {
            return Self::drop_note(out, DropReason::Unforwardable, &Packet::Interest(interest));
        }
        if self.pit_insert(out, &interest.name, face, interest.nonce, now) == PitInsert::Aggregated {
            return;
        }
        let forwarded = InterestPacket {
            hop_count: interest.hop_count + u32::from(face != Face::Local),
            ..interest
        };
        for target in targets {
            Self::send(out, target, forwarded.clone());
        }
    }

    // ---- service forwarding -----------------------------------------------

    /// Processes an exec or plain Interest: content-store hit, source-routed
    /// relay, or local microservice execution with PST bookkeeping.
    pub fn handle_exec_interest(&mut self, now: u64, face: FaceId, interest: InterestPacket) -> Vec<AgentAction> {
        self.with_out(|a, out| a.exec_interest(now, Face::Net(face), interest, out))
    }

    /// Injects an Interest as if issued by this agent's own proxy.
    pub fn inject_local_interest(&mut self, now: u64, name: ServiceName) -> Vec<AgentAction> {
        self.with_out(|a, out| {
            let interest = InterestPacket::new(name, a.nonce());
            a.exec_interest(now, Face::Local, interest, out)
        })
    }

    fn exec_interest(&mut self, now: u64, face: Face, interest: InterestPacket, out: &mut Out) {
        if !self.fresh_nonce(interest.nonce) {
            return Self::drop_note(out, DropReason::DuplicateNonce, &Packet::Interest(interest));
        }
        let data_name = interest.name.data_name();
        let data_key = data_name.to_string();
        if let Some(payload) = self.lookup_data(&data_key, now) {
            out.push(Action::Note(Note::CacheHit { name: data_key }));
            return self.emit(out, face, DataPacket::new(data_name, payload), now);
        }

        if let Some((next, rest)) = interest.name.pop_leading_face() {
            if !self.has_face(next) {
                return Self::drop_note(out, DropReason::Unforwardable, &Packet::Interest(interest));
            }
            if self.pit_insert(out, &interest.name, face, interest.nonce, now) == PitInsert::New {
                let forwarded = InterestPacket {
                    name: rest,
                    nonce: interest.nonce,
                    hop_count: interest.hop_count + u32::from(face != Face::Local),
                };
                Self::send(out, next, forwarded);
            }
            return;
        }

        let Some(element) = interest.name.first_element().cloned() else {
            return Self::drop_note(out, DropReason::Malformed, &Packet::Interest(interest));
        };
        let Some(ms) = self.repository.get(&element).cloned() else {
            let key = interest.name.to_string();
            Self::drop_note(out, DropReason::UnknownMicroservice, &Packet::Interest(interest));
            if face == Face::Local {
                self.fail_requests(out, &key, "unknown-microservice");
            }
            return;
        };
        if self.pit_insert(out, &interest.name, face, interest.nonce, now) == PitInsert::Aggregated {
            return;
        }
        if matches!(interest.name, ServiceName::Tree { .. }) {
            self.known_trees.insert(element.clone(), interest.name.clone());
        }
        let origin = interest.name.to_string();
        let children = interest
            .name
            .rewrite_for_children(&element)
            .expect("first element is consumable");
        let inputs: Vec<ServiceName> = children.iter().map(|c| c.name.data_name()).collect();
        let missing: Vec<_> = children
            .into_iter()
            .filter(|c| {
                let key = c.name.data_name().to_string();
                if self.has_data(&key, now) {
                    out.push(Action::Note(Note::CacheHit { name: key }));
                    false
                } else {
                    true
                }
            })
            .collect();
        if missing.is_empty() {
            return self.start_exec(now, ms, interest.name, inputs, out);
        }
        self.pending.insert(
            origin.clone(),
            PendingExec {
                microservice: element.clone(),
                inputs,
            },
        );
        for child in missing {
            let key = child.name.to_string();
            if self.pst.insert(&child.name, element.clone(), origin.clone(), now) {
                out.push(Action::Timer {
                    after: self.config.pit_lifetime,
                    timer: AgentTimer::PstExpire {
                        key: key.clone(),
                        created_at: now,
                    },
                });
            }
            out.push(Action::Note(Note::PstInsert {
                name: key,
                microservice: element.clone(),
            }));
            let next = InterestPacket::new(child.name, self.nonce());
            match child.face {
                Some(f) => Self::send(out, f, next),
                None => self.emit(out, Face::Local, next, now),
            }
        }
    }

    fn start_exec(
        &mut self,
        now: u64,
        ms: MicroserviceDescriptor,
        origin: ServiceName,
        inputs: Vec<ServiceName>,
        out: &mut Out,
    ) {
        let inputs = inputs
            .into_iter()
            .map(|name| {
                let payload = self.lookup_data(&name.to_string(), now).unwrap_or_default();
                (name, payload)
            })
            .collect();
        let id = self.next_exec;
        self.next_exec += 1;
        out.push(Action::Note(Note::ExecStart {
            microservice: ms.id.clone(),
            name: origin.to_string(),
        }));
        out.push(Action::Timer {
            after: ms.exec_time,
            timer: AgentTimer::ExecDone(id),
        });
        self.running.insert(
            id,
            Running {
                microservice: ms,
                origin,
                inputs,
            },
        );
    }

    fn finish_exec(&mut self, now: u64, id: u64, out: &mut Out) {
        let Some(run) = self.running.remove(&id) else {
            return;
        };
        let payload = run_microservice(&run.microservice, &run.inputs);
        let data = DataPacket::new(run.origin.data_name(), payload);
        out.push(Action::Note(Note::ExecDone {
            microservice: run.microservice.id,
            name: data.name.to_string(),
        }));
        self.data_arrived(now, None, data, out);
    }

    // ---- Data handling ----------------------------------------------------

    /// Stores the Data, satisfies matching PIT entries, then feeds local
    /// microservices waiting in the PST.
    pub fn handle_data(&mut self, now: u64, face: FaceId, data: DataPacket) -> Vec<AgentAction> {
        self.with_out(|a, out| a.data(now, Face::Net(face), data, out))
    }

    fn data(&mut self, now: u64, face: Face, data: DataPacket, out: &mut Out) {
        self.data_arrived(now, Some(face), data, out)
    }

    /// `arrival` is `None` for Data produced by a local microservice.
    fn data_arrived(&mut self, now: u64, arrival: Option<Face>, data: DataPacket, out: &mut Out) {
        let key = data.name.to_string();
        let pit_keys = self.pit.matching(&key);
        let pst_keys = self.pst.matching(&key);
        let to_local = arrival.is_none_or(|f| f == Face::Local);
        if pit_keys.is_empty() && pst_keys.is_empty() && !to_local {
            return Self::drop_note(out, DropReason::UnsolicitedData, &Packet::Data(data));
        }

        let freshness = self.config.freshness.get(&key).copied();
        self.store.put(key.clone(), data.payload.clone(), now, freshness);

        let mut local = to_local;
        for pit_key in pit_keys {
            let entry = self.pit.remove(&pit_key).expect("matched key");
            for face in entry.in_faces {
                match face {
                    Face::Net(f) if Some(face) != arrival => Self::send(out, f, data.clone()),
                    Face::Net(_) => {}
                    Face::Local => local = true,
                }
            }
        }

        for pst_key in pst_keys {
            let entry = self.pst.remove(&pst_key).expect("matched key");
            out.push(Action::Note(Note::PstDischarge { name: pst_key }));
            for (_, origin) in entry.waiting {
                let ready = self
                    .pending
                    .get(&origin)
                    .is_some_and(|p| p.inputs.iter().all(|i| self.has_data(&i.to_string(), now)));
                if !ready {
                    continue;
                }
                let pending = self.pending.remove(&origin).expect("checked above");
                let Some(ms) = self.repository.get(&pending.microservice).cloned() else {
                    continue;
                };
                let origin = ServiceName::parse(&origin).expect("PST origins are canonical names");
                self.start_exec(now, ms, origin, pending.inputs, out);
            }
        }

        if local {
            self.deliver_local(now, &key, &data, out);
        }
    }

    fn deliver_local(&mut self, now: u64, key: &str, data: &DataPacket, out: &mut Out) {
        let ids: Vec<RequestId> = self.requests.keys().copied().collect();
        for request in ids {
            let phase = self.requests[&request].phase.clone();
            match phase {
                Phase::Exec { data_key, .. } if data_key == key => {
                    self.requests.remove(&request);
                    out.push(Action::Completed {
                        request,
                        name: data.name.clone(),
                        payload: data.payload.clone(),
                    });
                }
                Phase::Lookup { key: k } if k == key => {
                    self.requests.remove(&request);
                    out.push(Action::Completed {
                        request,
                        name: data.name.clone(),
                        payload: data.payload.clone(),
                    });
                }
                Phase::Retrieve { key: k } if k == key => {
                    let tree = std::str::from_utf8(&data.payload)
                        .ok()
                        .filter(|t| !t.starts_with(ERROR_MARKER))
                        .and_then(|t| ServiceName::parse(t).ok())
                        .filter(|n| n.command() == crate::names::Command::Exec);
                    let Some(tree) = tree else {
                        self.requests.remove(&request);
                        out.push(Action::Failed {
                            request,
                            reason: String::from_utf8_lossy(&data.payload).into_owned(),
                        });
                        continue;
                    };
                    self.learn_tree(tree.clone());
                    if let Some(pending) = self.requests.get_mut(&request) {
                        pending.phase = Phase::Exec {
                            pit_key: tree.to_string(),
                            data_key: tree.data_name().to_string(),
                        };
                    }
                    let exec = InterestPacket::new(tree, self.nonce());
                    self.emit(out, Face::Local, exec, now);
                }
                _ => {}
            }
        }

        let (replies, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.lookup_replies)
            .into_iter()
            .partition(|r| r.data_key == key);
        self.lookup_replies = rest;
        for reply in replies {
            let Some(entry) = self.pit.remove(&reply.lookup_key) else {
                continue;
            };
            let answer = DataPacket::new(entry.name.clone(), data.payload.clone());
            for face in entry.in_faces {
                self.emit(out, face, answer.clone(), now);
            }
        }
    }

    // ---- deployment -------------------------------------------------------

    /// Pops one face and forwards, or installs when only the target remains.
    pub fn handle_deploy(&mut self, now: u64, face: FaceId, packet: DeployPacket) -> Vec<AgentAction> {
        self.with_out(|a, out| a.deploy(now, Face::Net(face), packet, out))
    }

    fn deploy(&mut self, _now: u64, _face: Face, mut packet: DeployPacket, out: &mut Out) {
        if packet.faces.is_empty() {
            if packet.target != self.config.id {
                return Self::drop_note(out, DropReason::TargetMismatch, &Packet::Deploy(packet));
            }
            let ms = packet.microservice;
            if self.repository.contains_key(&ms.id) {
                out.push(Action::Note(Note::Install {
                    microservice: ms.id,
                    already: true,
                }));
                return;
            }
            if self.storage_free < ms.storage_demand {
                self.install_failures += 1;
                out.push(Action::Note(Note::Drop {
                    reason: DropReason::InsufficientStorage,
                    packet: "deploy",
                    name: ms.id.to_string(),
                }));
                return;
            }
            out.push(Action::Note(Note::Install {
                microservice: ms.id.clone(),
                already: false,
            }));
            self.install(ms);
            return;
        }
        let next = packet.faces.remove(0);
        if !self.has_face(next) {
            return Self::drop_note(out, DropReason::Unforwardable, &Packet::Deploy(packet));
        }
        Self::send(out, next, packet);
    }
}

/// Lookup trigger predicate: the service must finish strictly before the
/// requested execution time, counting the Interest's travel delay.
pub fn deadline_met(exec_time: u64, now: u64, triggering_time: u64, execution_time: u64) -> bool {
    let delay = now.saturating_sub(triggering_time);
    exec_time.saturating_add(delay) < execution_time
}
