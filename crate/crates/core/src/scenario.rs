//! Scenario files: TOML text with the schema below, validated as a whole so
//! that every violation is reported at once.
//!
//! ```toml
//! seed = 1
//! horizon_ms = 10000
//! pit_lifetime_ms = 2000          # optional
//!
//! [monitor]
//! period_ms = 1000
//! round_timeout_ms = 200
//!
//! [weights]                       # optional, each key optional
//! delay = 1.0
//!
//! [controller]
//! face = 0
//! delay_ms = 1
//!
//! [[nodes]]
//! id = "nsn1"
//! battery = 100
//! storage = 100
//! compute = 10
//! controller_attachment = true
//! controller_face = 9
//!
//! [[links]]
//! a = "nsn1"
//! a_face = 1
//! b = "nsn3"
//! b_face = 0
//! delay_ms = 5
//! loss = 0.0                      # optional
//!
//! [[data]]
//! name = "video-aircraft320"
//! host = "nsn5"
//! payload_seed = 7
//! freshness_ms = 5000             # optional
//!
//! [[charts]]
//! head = "multimedia"
//! exec_time_ms = 10
//! storage = 5
//! compute = 1
//! tag = "mm"
//! [[charts.segments]]
//! label = "S1"
//! data = "video-aircraft320"
//! [[charts.segments.microservices]]
//! id = "videoanalysis"
//! exec_time_ms = 20
//! storage = 5
//! compute = 1
//! tag = "va"
//!
//! [[requests]]
//! at_ms = 500
//! agent = "nsn1"
//! head = "multimedia"
//! execution_time_ms = 300
//! expect_unknown = false          # optional
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::agent::MicroserviceDescriptor;
use crate::controller::Weights;
use crate::names::{ChartSegment, FaceId, Label, SegmentLabel, ServiceChart};
use crate::simnet::{DataItem, LinkSpec, NodeSpec, RequestSpec, SimConfig, Topology};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    pub horizon_ms: u64,
    pub pit_lifetime_ms: Option<u64>,
    pub monitor: MonitorSection,
    #[serde(default)]
    pub weights: Weights,
    pub controller: ControllerSection,
    #[serde(default)]
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub links: Vec<LinkEntry>,
    #[serde(default)]
    pub data: Vec<DataEntry>,
    #[serde(default)]
    pub charts: Vec<ChartEntry>,
    #[serde(default)]
    pub requests: Vec<RequestEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSection {
    pub period_ms: u64,
    pub round_timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub face: FaceId,
    pub delay_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    pub battery: u8,
    pub storage: u64,
    pub compute: u64,
    #[serde(default)]
    pub controller_attachment: bool,
    pub controller_face: Option<FaceId>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub a: String,
    pub a_face: FaceId,
    pub b: String,
    pub b_face: FaceId,
    pub delay_ms: u64,
    #[serde(default)]
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataEntry {
    pub name: String,
    pub host: String,
    pub payload_seed: u64,
    pub freshness_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroserviceEntry {
    pub id: String,
    pub exec_time_ms: u64,
    pub storage: u64,
    pub compute: u64,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentEntry {
    pub label: String,
    pub data: String,
    #[serde(default)]
    pub microservices: Vec<MicroserviceEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartEntry {
    pub head: String,
    pub exec_time_ms: u64,
    pub storage: u64,
    pub compute: u64,
    pub tag: String,
    #[serde(default)]
    pub segments: Vec<SegmentEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestEntry {
    pub at_ms: u64,
    pub agent: String,
    pub head: String,
    pub execution_time_ms: u64,
    #[serde(default)]
    pub expect_unknown: bool,
}

/// A single schema violation, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{} violation(s):\n{}", .0.len(), .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

/// A validated scenario, ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub charts: Vec<ServiceChart>,
    pub requests: Vec<RequestSpec>,
    pub config: SimConfig,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        file.build()
    }
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn label(&mut self, path: &str, text: &str) -> Option<Label> {
        match Label::new(text) {
            Ok(l) => Some(l),
            Err(e) => {
                self.fail(path, e.to_string());
                None
            }
        }
    }

    /// `id` is the (key, value) of the identifier field.
    fn microservice(&mut self, path: &str, id: (&str, &str), exec: u64, storage: u64, compute: u64, tag: &str) -> Option<MicroserviceDescriptor> {
        let (id_key, id) = id;
        if exec == 0 {
            self.fail(format!("{path}.exec_time_ms"), "must be positive");
        }
        let id = self.label(&format!("{path}.{id_key}"), id)?;
        Some(MicroserviceDescriptor::new(id, exec, storage, compute, tag))
    }
}

impl ScenarioFile {
    /// Lists every violation; empty when the file is valid.
    pub fn validate(&self) -> Vec<Violation> {
        match self.build() {
            Ok(_) => Vec::new(),
            Err(ScenarioError::Invalid(v)) => v,
            Err(e) => vec![Violation {
                path: String::new(),
                message: e.to_string(),
            }],
        }
    }

    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let mut c = Checker {
            violations: Vec::new(),
        };

        if self.horizon_ms == 0 {
            c.fail("horizon_ms", "must be positive");
        }
        if self.monitor.period_ms == 0 {
            c.fail("monitor.period_ms", "must be positive");
        }
        if self.monitor.round_timeout_ms == 0 || self.monitor.round_timeout_ms >= self.monitor.period_ms {
            c.fail("monitor.round_timeout_ms", "must be positive and below period_ms");
        }
        for (key, w) in [
            ("delay", self.weights.delay),
            ("data", self.weights.data),
            ("store", self.weights.store),
            ("energy", self.weights.energy),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                c.fail(format!("weights.{key}"), "must be a finite non-negative number");
            }
        }

        let mut nodes = Vec::new();
        let mut faces: BTreeMap<String, BTreeSet<FaceId>> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let path = format!("nodes[{i}]");
            if faces.contains_key(&n.id) {
                c.fail(format!("{path}.id"), format!("duplicate agent id `{}`", n.id));
                continue;
            }
            faces.insert(n.id.clone(), BTreeSet::new());
            if n.battery > 100 {
                c.fail(format!("{path}.battery"), "must be within 0..=100");
            }
            if n.controller_attachment && n.controller_face.is_none() {
                c.fail(format!("{path}.controller_face"), "required on the controller attachment");
            }
            if !n.controller_attachment && n.controller_face.is_some() {
                c.fail(format!("{path}.controller_face"), "only allowed on the controller attachment");
            }
            if let Some(f) = n.controller_face {
                faces.get_mut(&n.id).expect("inserted").insert(f);
            }
            if let Some(id) = c.label(&format!("{path}.id"), &n.id) {
                nodes.push(NodeSpec {
                    id,
                    battery: n.battery.min(100),
                    storage: n.storage,
                    compute: n.compute,
                    controller_attachment: n.controller_attachment,
                    controller_face: n.controller_face,
                });
            }
        }
        let attachments = self.nodes.iter().filter(|n| n.controller_attachment).count();
        if !self.nodes.is_empty() && attachments != 1 {
            c.fail("nodes", format!("exactly one controller_attachment required, found {attachments}"));
        }

        let mut links = Vec::new();
        let mut graph: BTreeMap<&str, Vec<&str>> = self.nodes.iter().map(|n| (n.id.as_str(), Vec::new())).collect();
        for (i, l) in self.links.iter().enumerate() {
            let path = format!("links[{i}]");
            let mut ok = true;
            for (end, id, face) in [("a", &l.a, l.a_face), ("b", &l.b, l.b_face)] {
                match faces.get_mut(id) {
                    None => {
                        c.fail(format!("{path}.{end}"), format!("unknown agent `{id}`"));
                        ok = false;
                    }
                    Some(used) => {
                        if !used.insert(face) {
                            c.fail(format!("{path}.{end}_face"), format!("face {face} already used on `{id}`"));
                            ok = false;
                        }
                    }
                }
            }
            if l.a == l.b {
                c.fail(&path, "self-loop");
                ok = false;
            }
            if !(0.0..=1.0).contains(&l.loss) {
                c.fail(format!("{path}.loss"), "must be within 0..=1");
                ok = false;
            }
            if graph.contains_key(l.a.as_str()) && graph.contains_key(l.b.as_str()) {
                graph.get_mut(l.a.as_str()).expect("known").push(&l.b);
                graph.get_mut(l.b.as_str()).expect("known").push(&l.a);
            }
            if ok {
                if let (Ok(a), Ok(b)) = (Label::new(&l.a), Label::new(&l.b)) {
                    links.push(LinkSpec {
                        a,
                        a_face: l.a_face,
                        b,
                        b_face: l.b_face,
                        delay: l.delay_ms,
                        loss: l.loss,
                    });
                }
            }
        }
        if let Some(&start) = graph.keys().next() {
            let mut seen = BTreeSet::from([start]);
            let mut queue = VecDeque::from([start]);
            while let Some(n) = queue.pop_front() {
                for &m in &graph[n] {
                    if seen.insert(m) {
                        queue.push_back(m);
                    }
                }
            }
            for id in graph.keys().filter(|id| !seen.contains(*id)) {
                c.fail("links", format!("agent `{id}` is not connected to `{start}`"));
            }
        }

        let mut data = Vec::new();
        let mut data_names = BTreeSet::new();
        for (i, d) in self.data.iter().enumerate() {
            let path = format!("data[{i}]");
            if !faces.contains_key(&d.host) {
                c.fail(format!("{path}.host"), format!("unknown agent `{}`", d.host));
            }
            if !data_names.insert(d.name.clone()) {
                c.fail(format!("{path}.name"), format!("duplicate data name `{}`", d.name));
            }
            let name = c.label(&format!("{path}.name"), &d.name);
            if let (Some(name), Ok(host)) = (name, Label::new(&d.host)) {
                data.push(DataItem {
                    name,
                    host,
                    payload_seed: d.payload_seed,
                    freshness: d.freshness_ms,
                });
            }
        }

        let mut charts = Vec::new();
        let mut heads = BTreeSet::new();
        for (i, ch) in self.charts.iter().enumerate() {
            let path = format!("charts[{i}]");
            if !heads.insert(ch.head.clone()) {
                c.fail(format!("{path}.head"), format!("duplicate head `{}`", ch.head));
            }
            let head = c.microservice(&path, ("head", &ch.head), ch.exec_time_ms, ch.storage, ch.compute, &ch.tag);
            if ch.segments.is_empty() {
                c.fail(format!("{path}.segments"), "at least one segment required");
            }
            let mut segments = Vec::new();
            for (j, s) in ch.segments.iter().enumerate() {
                let spath = format!("{path}.segments[{j}]");
                let label = SegmentLabel::new(&s.label);
                if let Err(e) = &label {
                    c.fail(format!("{spath}.label"), e.to_string());
                }
                if !data_names.contains(&s.data) {
                    c.fail(format!("{spath}.data"), format!("unknown data `{}`", s.data));
                }
                let data = c.label(&format!("{spath}.data"), &s.data);
                let microservices: Vec<_> = s
                    .microservices
                    .iter()
                    .enumerate()
                    .filter_map(|(k, m)| {
                        c.microservice(
                            &format!("{spath}.microservices[{k}]"),
                            ("id", &m.id),
                            m.exec_time_ms,
                            m.storage,
                            m.compute,
                            &m.tag,
                        )
                    })
                    .collect();
                if let (Ok(label), Some(data)) = (label, data) {
                    segments.push(ChartSegment {
                        label,
                        microservices,
                        data,
                    });
                }
            }
            if let Some(head) = head {
                let chart = ServiceChart { head, segments };
                match chart.validate() {
                    Ok(()) => charts.push(chart),
                    Err(e) => c.fail(&path, e.to_string()),
                }
            }
        }

        let mut requests = Vec::new();
        for (i, r) in self.requests.iter().enumerate() {
            let path = format!("requests[{i}]");
            if !faces.contains_key(&r.agent) {
                c.fail(format!("{path}.agent"), format!("unknown agent `{}`", r.agent));
            }
            if r.execution_time_ms == 0 {
                c.fail(format!("{path}.execution_time_ms"), "must be positive");
            }
            if r.at_ms > self.horizon_ms {
                c.fail(format!("{path}.at_ms"), "after horizon_ms");
            }
            let known = heads.contains(&r.head);
            if !known && !r.expect_unknown {
                c.fail(format!("{path}.head"), format!("no chart for head `{}`", r.head));
            }
            if known && r.expect_unknown {
                c.fail(format!("{path}.expect_unknown"), format!("head `{}` is registered", r.head));
            }
            let head = c.label(&format!("{path}.head"), &r.head);
            if let (Some(head), Ok(agent)) = (head, Label::new(&r.agent)) {
                requests.push(RequestSpec {
                    at: r.at_ms,
                    agent,
                    head,
                    execution_time: r.execution_time_ms,
                    expect_unknown: r.expect_unknown,
                });
            }
        }

        if !c.violations.is_empty() {
            return Err(ScenarioError::Invalid(c.violations));
        }
        Ok(Scenario {
            topology: Topology { nodes, links, data },
            charts,
            requests,
            config: SimConfig {
                seed: self.seed,
                horizon: self.horizon_ms,
                pit_lifetime: self.pit_lifetime_ms,
                monitor_period: self.monitor.period_ms,
                round_timeout: self.monitor.round_timeout_ms,
                weights: self.weights,
                controller_face: self.controller.face,
                controller_delay: self.controller.delay_ms,
            },
        })
    }
}
