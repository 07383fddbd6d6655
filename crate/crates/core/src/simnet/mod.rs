//! Deterministic discrete-event engine. Links are pure delay lines (with an
//! optional loss probability); time is integer milliseconds; events are
//! ordered by (time, seq).

mod metrics;
mod trace;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use metrics::{Metrics, PacketCounts, RequestOutcome, RequestStatus};
pub use trace::{render, trace_digest, ParsedRecord, TraceRecord};

use crate::agent::{
    digest, Action, Agent, AgentConfig, AgentTimer, DropReason, HostedData, Note, Peer,
};
use crate::controller::{Controller, ControllerConfig, ControllerTimer, Weights};
use crate::names::{FaceId, Label, ServiceChart};
use crate::packets::Packet;

pub const CONTROLLER_NODE: &str = "controller";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: Label,
    pub battery: u8,
    pub storage: u64,
    pub compute: u64,
    pub controller_attachment: bool,
    /// This agent's face toward the controller, when it is the attachment.
    pub controller_face: Option<FaceId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub a: Label,
    pub a_face: FaceId,
    pub b: Label,
    pub b_face: FaceId,
    pub delay: u64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataItem {
    pub name: Label,
    pub host: Label,
    pub payload_seed: u64,
    pub freshness: Option<u64>,
}

impl DataItem {
    /// 32 deterministic bytes derived from the payload seed.
    pub fn payload(&self) -> Vec<u8> {
        let mut bytes = vec![0; 32];
        ChaCha8Rng::seed_from_u64(self.payload_seed).fill_bytes(&mut bytes);
        bytes
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Topology {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub data: Vec<DataItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestSpec {
    pub at: u64,
    pub agent: Label,
    pub head: Label,
    pub execution_time: u64,
    pub expect_unknown: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon: u64,
    /// Overrides the derived PIT lifetime.
    pub pit_lifetime: Option<u64>,
    pub monitor_period: u64,
    pub round_timeout: u64,
    pub weights: Weights,
    /// Controller-side face of the attachment link.
    pub controller_face: FaceId,
    pub controller_delay: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            horizon: 10_000,
            pit_lifetime: None,
            monitor_period: 1_000,
            round_timeout: 200,
            weights: Weights::default(),
            controller_face: 0,
            controller_delay: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("event scheduled at {at} before current time {now}")]
    TimeTravel { at: u64, now: u64 },
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error("face {face} used twice on {node}")]
    DuplicateFace { node: String, face: FaceId },
    #[error("chart rejected: {0}")]
    Chart(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Agent(usize),
    Controller,
}

#[derive(Debug, Clone, PartialEq)]
struct LinkEnd {
    peer: Node,
    peer_face: FaceId,
    delay: u64,
    loss: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Deliver { node: Node, face: FaceId, bytes: Vec<u8> },
    AgentTimer { agent: usize, timer: AgentTimer },
    ControllerTimer(ControllerTimer),
    Request(usize),
}

impl EventKind {
    /// Events that still move the simulation forward; the rest are
    /// housekeeping (expiries, periodic monitoring).
    fn is_active(&self) -> bool {
        match self {
            EventKind::Deliver { .. } | EventKind::Request(_) => true,
            EventKind::AgentTimer { timer, .. } => matches!(
                timer,
                AgentTimer::ExecDone(_) | AgentTimer::LookupTimeout(_) | AgentTimer::MonitorFallback { .. }
            ),
            EventKind::ControllerTimer(t) => !matches!(t, ControllerTimer::MonitorTick),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time: u64,
    pub seq: u64,
    pub kind: EventKind,
}

/// Min-queue over (time, seq).
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<(u64, u64)>>,
    events: BTreeMap<u64, Event>,
    next_seq: u64,
    now: u64,
    active: usize,
}

impl EventQueue {
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn schedule(&mut self, time: u64, kind: EventKind) -> Result<u64, SimError> {
        if time < self.now {
            return Err(SimError::TimeTravel { at: time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        if kind.is_active() {
            self.active += 1;
        }
        self.heap.push(Reverse((time, seq)));
        self.events.insert(seq, Event { time, seq, kind });
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.heap.peek().map(|Reverse((t, _))| *t)
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse((time, seq)) = self.heap.pop()?;
        self.now = time;
        let event = self.events.remove(&seq).expect("queued event");
        if event.kind.is_active() {
            self.active -= 1;
        }
        Some(event)
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trace: Vec<TraceRecord>,
    pub metrics: Metrics,
}

impl SimOutput {
    pub fn digest(&self) -> u64 {
        trace_digest(&self.trace)
    }
}

pub struct Simulation {
    config: SimConfig,
    agents: Vec<Agent>,
    index: BTreeMap<Label, usize>,
    controller: Option<Controller>,
    links: BTreeMap<(Node, FaceId), LinkEnd>,
    requests: Vec<RequestSpec>,
    queue: EventQueue,
    loss_rng: ChaCha8Rng,
    trace: Vec<TraceRecord>,
    metrics: Metrics,
}

fn mix(seed: u64, tag: &str) -> u64 {
    seed ^ digest(tag.as_bytes())
}

/// Default PIT lifetime: four times the largest link delay per agent, plus
/// the total execution time of every chart, so entries outlive a full
/// service execution.
pub fn default_pit_lifetime(topology: &Topology, charts: &[ServiceChart], controller_delay: u64) -> u64 {
    let max_delay = topology
        .links
        .iter()
        .map(|l| l.delay)
        .chain(std::iter::once(controller_delay))
        .max()
        .unwrap_or(1)
        .max(1);
    let exec: u64 = charts
        .iter()
        .flat_map(|c| c.microservices())
        .map(|m| m.exec_time)
        .sum();
    4 * max_delay * (topology.nodes.len().max(1) as u64) + exec
}

impl Simulation {
    pub fn new(
        topology: &Topology,
        charts: &[ServiceChart],
        requests: &[RequestSpec],
        config: SimConfig,
    ) -> Result<Self, SimError> {
        let pit_lifetime = config
            .pit_lifetime
            .unwrap_or_else(|| default_pit_lifetime(topology, charts, config.controller_delay));

        let index: BTreeMap<Label, usize> = topology
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let lookup = |id: &Label| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| SimError::UnknownAgent(id.to_string()))
        };

        let mut configs: Vec<AgentConfig> = topology
            .nodes
            .iter()
            .map(|n| {
                let mut c = AgentConfig::new(n.id.clone());
                c.battery = n.battery;
                c.storage_total = n.storage;
                c.compute_total = n.compute;
                c.pit_lifetime = pit_lifetime;
                c.monitor_lifetime = config.round_timeout;
                c.seed = mix(config.seed, n.id.as_str());
                c
            })
            .collect();

        let mut links = BTreeMap::new();
        let mut add = |node: Node, face: FaceId, end: LinkEnd| -> Result<(), SimError> {
            if links.insert((node, face), end).is_some() {
                let name = match node {
                    Node::Agent(i) => topology.nodes[i].id.to_string(),
                    Node::Controller => CONTROLLER_NODE.to_string(),
                };
                return Err(SimError::DuplicateFace { node: name, face });
            }
            Ok(())
        };
        for l in &topology.links {
            let (a, b) = (lookup(&l.a)?, lookup(&l.b)?);
            add(
                Node::Agent(a),
                l.a_face,
                LinkEnd { peer: Node::Agent(b), peer_face: l.b_face, delay: l.delay, loss: l.loss },
            )?;
            add(
                Node::Agent(b),
                l.b_face,
                LinkEnd { peer: Node::Agent(a), peer_face: l.a_face, delay: l.delay, loss: l.loss },
            )?;
            configs[a].faces.push(crate::agent::FaceInfo {
                id: l.a_face,
                peer: Peer::Agent(l.b.clone()),
                delay: l.delay,
            });
            configs[b].faces.push(crate::agent::FaceInfo {
                id: l.b_face,
                peer: Peer::Agent(l.a.clone()),
                delay: l.delay,
            });
        }

        let mut controller = None;
        if let Some(node) = topology.nodes.iter().find(|n| n.controller_attachment) {
            let i = index[&node.id];
            let agent_face = node.controller_face.unwrap_or(FaceId::MAX);
            add(
                Node::Agent(i),
                agent_face,
                LinkEnd {
                    peer: Node::Controller,
                    peer_face: config.controller_face,
                    delay: config.controller_delay,
                    loss: 0.0,
                },
            )?;
            add(
                Node::Controller,
                config.controller_face,
                LinkEnd {
                    peer: Node::Agent(i),
                    peer_face: agent_face,
                    delay: config.controller_delay,
                    loss: 0.0,
                },
            )?;
            configs[i].faces.push(crate::agent::FaceInfo {
                id: agent_face,
                peer: Peer::Controller,
                delay: config.controller_delay,
            });
            configs[i].controller_face = Some(agent_face);
            let mut c = Controller::new(ControllerConfig {
                attachment: node.id.clone(),
                face: config.controller_face,
                link_delay: config.controller_delay,
                weights: config.weights,
                monitor_period: config.monitor_period,
                round_timeout: config.round_timeout,
                seed: mix(config.seed, CONTROLLER_NODE),
            });
            for chart in charts {
                c.register_chart(chart.clone())
                    .map_err(|e| SimError::Chart(e.to_string()))?;
            }
            controller = Some(c);
        }

        for item in &topology.data {
            let host = lookup(&item.host)?;
            configs[host].hosted.push(HostedData {
                name: item.name.clone(),
                payload: item.payload(),
            });
            if let Some(f) = item.freshness {
                configs[host]
                    .freshness
                    .insert(format!("/{}", item.name), f);
            }
        }
        for c in &mut configs {
            c.faces.sort_by_key(|f| f.id);
        }
        for r in requests {
            lookup(&r.agent)?;
        }

        let mut queue = EventQueue::default();
        if controller.is_some() {
            queue.schedule(0, EventKind::ControllerTimer(ControllerTimer::MonitorTick))?;
        }
        for (i, r) in requests.iter().enumerate() {
            queue.schedule(r.at, EventKind::Request(i))?;
        }

        let metrics = Metrics::new(config.seed, requests);
        Ok(Simulation {
            loss_rng: ChaCha8Rng::seed_from_u64(mix(config.seed, "links")),
            agents: configs.into_iter().map(Agent::new).collect(),
            index,
            controller,
            links,
            requests: requests.to_vec(),
            queue,
            trace: Vec::new(),
            metrics,
            config,
        })
    }

    pub fn agent(&self, id: &str) -> Option<&Agent> {
        self.index.get(id).map(|&i| &self.agents[i])
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn controller(&self) -> Option<&Controller> {
        self.controller.as_ref()
    }

    pub fn now(&self) -> u64 {
        self.queue.now()
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    fn node_name(&self, node: Node) -> String {
        match node {
            Node::Agent(i) => self.agents[i].id().to_string(),
            Node::Controller => CONTROLLER_NODE.to_string(),
        }
    }

    fn quiescent(&self) -> bool {
        let rounds_done = self
            .controller
            .as_ref()
            .is_none_or(|c| !c.completed_rounds().is_empty());
        self.queue.active() == 0 && rounds_done && self.metrics.all_resolved()
    }

    /// Runs until quiescence, an empty queue, or the horizon.
    pub fn run(&mut self) -> SimOutput {
        loop {
            if self.quiescent() {
                break;
            }
            match self.queue.peek_time() {
                None => break,
                Some(t) if t > self.config.horizon => break,
                Some(_) => {}
            }
            let event = self.queue.pop().expect("peeked");
            self.step(event);
        }
        self.metrics.final_time_ms = self.queue.now();
        self.metrics.non_quiescent = self.queue.active() > 0 || !self.metrics.all_resolved();
        if let Some(c) = &self.controller {
            self.metrics.monitor_rounds = c.completed_rounds().len() as u64;
            self.metrics.placements = c
                .placements()
                .iter()
                .map(|(h, p)| {
                    (
                        h.to_string(),
                        p.iter().map(|(m, a)| (m.to_string(), a.to_string())).collect(),
                    )
                })
                .collect();
        }
        self.metrics.trace_digest = format!("{:016x}", trace_digest(&self.trace));
        SimOutput {
            trace: self.trace.clone(),
            metrics: self.metrics.clone(),
        }
    }

    fn step(&mut self, event: Event) {
        let now = event.time;
        match event.kind {
            EventKind::Request(i) => {
                let r = self.requests[i].clone();
                let agent = self.index[&r.agent];
                match self.agents[agent].submit_local_request(now, i as u64, r.head, r.execution_time) {
                    Ok(actions) => self.apply_agent(now, agent, actions),
                    Err(e) => self.resolve(now, Node::Agent(agent), i as u64, Err(e.to_string())),
                }
            }
            EventKind::AgentTimer { agent, timer } => {
                let actions = self.agents[agent].on_timer(now, timer);
                self.apply_agent(now, agent, actions);
            }
            EventKind::ControllerTimer(timer) => {
                if let Some(c) = self.controller.as_mut() {
                    let actions = c.on_timer(now, timer);
                    self.apply_controller(now, actions);
                }
            }
            EventKind::Deliver { node, face, bytes } => {
                let packet = match Packet::decode(&bytes) {
                    Ok(p) => p,
                    Err(e) => {
                        self.record(
                            TraceRecord::new(now, self.node_name(node), "drop")
                                .face(face)
                                .with("reason", DropReason::Malformed.as_str())
                                .with("error", e),
                        );
                        self.metrics.count_drop(DropReason::Malformed.as_str());
                        return;
                    }
                };
                let record = packet_record(TraceRecord::new(now, self.node_name(node), "recv"), &packet).face(face);
                self.record(record);
                self.metrics.packets.entry(packet.type_name()).or_default().delivered += 1;
                match node {
                    Node::Agent(i) => {
                        let actions = self.agents[i].on_packet(now, face, packet);
                        self.apply_agent(now, i, actions);
                    }
                    Node::Controller => {
                        if let Some(c) = self.controller.as_mut() {
                            let actions = c.on_packet(now, face, packet);
                            self.apply_controller(now, actions);
                        }
                    }
                }
            }
        }
    }

    fn record(&mut self, record: TraceRecord) {
        self.trace.push(record);
    }

    fn schedule(&mut self, time: u64, kind: EventKind) {
        self.queue
            .schedule(time, kind)
            .expect("events are scheduled at or after now");
    }

    fn apply_agent(&mut self, now: u64, agent: usize, actions: Vec<Action<AgentTimer>>) {
        for action in actions {
            match action {
                Action::Send { face, packet } => self.transmit(now, Node::Agent(agent), face, packet),
                Action::Timer { after, timer } => self.schedule(now + after, EventKind::AgentTimer { agent, timer }),
                Action::Note(note) => self.note(now, Node::Agent(agent), note),
                Action::Completed { request, name, payload } => {
                    let record = TraceRecord::new(now, self.node_name(Node::Agent(agent)), "complete")
                        .packet("data", name.to_string())
                        .with("request", request)
                        .with("bytes", payload.len())
                        .with("digest", format!("{:016x}", digest(&payload)));
                    self.record(record);
                    self.resolve(now, Node::Agent(agent), request, Ok(()));
                }
                Action::Failed { request, reason } => {
                    self.resolve(now, Node::Agent(agent), request, Err(reason));
                }
            }
        }
    }

    fn apply_controller(&mut self, now: u64, actions: Vec<Action<ControllerTimer>>) {
        for action in actions {
            match action {
                Action::Send { face, packet } => self.transmit(now, Node::Controller, face, packet),
                Action::Timer { after, timer } => self.schedule(now + after, EventKind::ControllerTimer(timer)),
                Action::Note(note) => self.note(now, Node::Controller, note),
                Action::Completed { .. } | Action::Failed { .. } => {}
            }
        }
    }

    fn resolve(&mut self, now: u64, node: Node, request: u64, result: Result<(), String>) {
        if let Err(reason) = &result {
            let record = TraceRecord::new(now, self.node_name(node), "fail")
                .with("request", request)
                .with("reason", sanitize(reason));
            self.record(record);
        }
        self.metrics.resolve(request as usize, now, result);
    }

    fn transmit(&mut self, now: u64, from: Node, face: FaceId, packet: Packet) {
        let ptype = packet.type_name();
        let send = packet_record(TraceRecord::new(now, self.node_name(from), "send"), &packet).face(face);
        self.record(send);
        self.metrics.packets.entry(ptype).or_default().sent += 1;
        let Some(link) = self.links.get(&(from, face)).cloned() else {
            self.drop_in_flight(now, from, face, &packet, DropReason::NoLink);
            return;
        };
        if link.loss > 0.0 && self.loss_rng.random::<f64>() < link.loss {
            self.drop_in_flight(now, from, face, &packet, DropReason::LinkLoss);
            return;
        }
        self.schedule(
            now + link.delay,
            EventKind::Deliver {
                node: link.peer,
                face: link.peer_face,
                bytes: packet.encode(),
            },
        );
    }

    fn drop_in_flight(&mut self, now: u64, from: Node, face: FaceId, packet: &Packet, reason: DropReason) {
        let record = packet_record(TraceRecord::new(now, self.node_name(from), "drop"), packet)
            .face(face)
            .with("reason", reason.as_str());
        self.record(record);
        self.metrics.packets.entry(packet.type_name()).or_default().dropped += 1;
        self.metrics.count_drop(reason.as_str());
    }

    fn note(&mut self, now: u64, node: Node, note: Note) {
        let name = self.node_name(node);
        let base = TraceRecord::new(now, name.clone(), "");
        let record = match note {
            Note::LocalPacket { packet } => {
                let mut r = packet_record(base, &packet).face("local");
                r.kind = "local";
                r
            }
            Note::Request { request, head, execution_time } => TraceRecord {
                kind: "request",
                ..base
            }
            .with("request", request)
            .with("head", head)
            .with("execution_time", execution_time),
            Note::PitInsert { name, face } => TraceRecord { kind: "pit-insert", ..base }.packet("interest", name).face(face),
            Note::PitAggregate { name, face } => {
                TraceRecord { kind: "pit-aggregate", ..base }.packet("interest", name).face(face)
            }
            Note::PitExpire { name } => TraceRecord { kind: "pit-expire", ..base }.packet("interest", name),
            Note::PstInsert { name, microservice } => TraceRecord { kind: "pst-insert", ..base }
                .packet("interest", name)
                .with("microservice", microservice),
            Note::PstDischarge { name } => TraceRecord { kind: "pst-discharge", ..base }.packet("interest", name),
            Note::PstExpire { name } => TraceRecord { kind: "pst-expire", ..base }.packet("interest", name),
            Note::CacheHit { name } => {
                self.metrics.cache_hits += 1;
                TraceRecord { kind: "cache-hit", ..base }.packet("data", name)
            }
            Note::LookupHit { head } => TraceRecord { kind: "lookup-hit", ..base }.with("head", head),
            Note::LookupTimeout { request, head } => TraceRecord { kind: "lookup-timeout", ..base }
                .with("request", request)
                .with("head", head),
            Note::ExecStart { microservice, name } => TraceRecord { kind: "exec-start", ..base }
                .packet("interest", name)
                .with("microservice", microservice),
            Note::ExecDone { microservice, name } => TraceRecord { kind: "exec-done", ..base }
                .packet("data", name)
                .with("microservice", microservice),
            Note::StatusAppended => TraceRecord { kind: "status-append", ..base },
            Note::Install { microservice, already } => {
                if !already {
                    self.metrics
                        .installs
                        .entry(name)
                        .or_default()
                        .push(microservice.to_string());
                }
                TraceRecord { kind: "install", ..base }
                    .with("microservice", microservice)
                    .with("already", already)
            }
            Note::Drop { reason, packet, name } => {
                self.metrics.count_drop(reason.as_str());
                TraceRecord {
                    kind: "drop",
                    ptype: packet,
                    name,
                    ..base
                }
                .with("reason", reason.as_str())
            }
            Note::Controller { kind, fields } => {
                let mut r = TraceRecord { kind, ..base };
                for (k, v) in fields {
                    r = r.with(&k, sanitize(&v));
                }
                r
            }
        };
        self.record(record);
    }
}

fn sanitize(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '\t' | '\n' | ',' | '=' => ' ',
            c => c,
        })
        .collect()
}

fn packet_record(record: TraceRecord, packet: &Packet) -> TraceRecord {
    match packet {
        Packet::Interest(i) => record
            .packet("interest", i.name.to_string())
            .with("nonce", i.nonce)
            .with("hop", i.hop_count),
        Packet::Data(d) => {
            let r = record.packet("data", d.name.to_string()).with("bytes", d.payload.len());
            match &d.status_list {
                Some(list) => r.with(
                    "statuses",
                    list.iter().map(|s| s.agent_id.as_str()).collect::<Vec<_>>().join(" "),
                ),
                None => r,
            }
        }
        Packet::Deploy(p) => record
            .packet("deploy", p.microservice.id.to_string())
            .with("target", &p.target)
            .with(
                "chain",
                p.faces.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" "),
            ),
    }
}

/// Builds and runs a simulation in one call.
pub fn run(
    topology: &Topology,
    charts: &[ServiceChart],
    requests: &[RequestSpec],
    config: SimConfig,
) -> Result<SimOutput, SimError> {
    Ok(Simulation::new(topology, charts, requests, config)?.run())
}
