//! The management plane: monitoring rounds, topology image, chart registry,
//! placement and source-routed deployment.

mod image;
mod placement;

use std::collections::{BTreeMap, BTreeSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use image::{Observation, Route, TopologyImage};
pub use placement::{place_service, placement_order, score, storage_pressure, Placement, Weights};

use crate::agent::{Action, Note, ERROR_MARKER};
use crate::names::{FaceId, Label, NameError, ServiceChart, ServiceName, ServiceTree};
use crate::packets::{DataPacket, DeployPacket, InterestPacket, Packet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("no agent can host microservice {0}")]
    Unplaceable(Label),
    #[error("location of data {0} is unknown")]
    UnknownData(Label),
    #[error("no route from {from} to {to}")]
    NoRoute { from: Label, to: Label },
    #[error("no chart registered for head {0}")]
    UnknownHead(Label),
    #[error("chart for head {0} already registered")]
    DuplicateHead(Label),
    #[error(transparent)]
    InvalidChart(#[from] NameError),
}

/// One row of the controller's source routing table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRouteEntry {
    pub target: Label,
    pub microservice: Label,
    pub face_chain: Vec<FaceId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Agent through which the controller reaches the network.
    pub attachment: Label,
    /// The controller's own face on the attachment link.
    pub face: FaceId,
    pub link_delay: u64,
    pub weights: Weights,
    pub monitor_period: u64,
    pub round_timeout: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControllerTimer {
    MonitorTick,
    RoundClose { nonce: u64 },
    /// Held retrieve answer, released once deployments have landed.
    Reply { data: DataPacket },
}

pub type ControllerAction = Action<ControllerTimer>;

/// Statuses seen during one monitor round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundReport {
    pub nonce: u64,
    pub started_at: u64,
    /// Occurrences of each agent id across every Data of the round.
    pub counts: BTreeMap<Label, u32>,
}

pub struct Controller {
    config: ControllerConfig,
    charts: BTreeMap<Label, ServiceChart>,
    image: TopologyImage,
    installed: BTreeSet<(Label, Label)>,
    routes: Vec<SourceRouteEntry>,
    placements: BTreeMap<Label, BTreeMap<Label, Label>>,
    round: Option<RoundReport>,
    completed: Vec<RoundReport>,
    rng: ChaCha8Rng,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Self {
        Controller {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            charts: BTreeMap::new(),
            image: TopologyImage::default(),
            installed: BTreeSet::new(),
            routes: Vec::new(),
            placements: BTreeMap::new(),
            round: None,
            completed: Vec::new(),
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn image(&self) -> &TopologyImage {
        &self.image
    }

    pub fn source_routes(&self) -> &[SourceRouteEntry] {
        &self.routes
    }

    /// Latest placement per head.
    pub fn placements(&self) -> &BTreeMap<Label, BTreeMap<Label, Label>> {
        &self.placements
    }

    pub fn completed_rounds(&self) -> &[RoundReport] {
        &self.completed
    }

    pub fn register_chart(&mut self, chart: ServiceChart) -> Result<(), ControllerError> {
        chart.validate()?;
        let head = chart.head_label().clone();
        if self.charts.contains_key(&head) {
            return Err(ControllerError::DuplicateHead(head));
        }
        self.charts.insert(head, chart);
        Ok(())
    }

    pub fn chart(&self, head: &Label) -> Option<&ServiceChart> {
        self.charts.get(head)
    }

    pub fn on_timer(&mut self, now: u64, timer: ControllerTimer) -> Vec<ControllerAction> {
        match timer {
            ControllerTimer::MonitorTick => {
                let mut out = self.start_monitor_round(now);
                out.push(Action::Timer {
                    after: self.config.monitor_period,
                    timer: ControllerTimer::MonitorTick,
                });
                out
            }
            ControllerTimer::RoundClose { nonce } => self.close_round(nonce),
            ControllerTimer::Reply { data } => vec![Action::Send {
                face: self.config.face,
                packet: data.into(),
            }],
        }
    }

    /// Sends one monitor Interest with a fresh nonce and opens a round.
    pub fn start_monitor_round(&mut self, now: u64) -> Vec<ControllerAction> {
        let nonce = self.rng.next_u64();
        self.round = Some(RoundReport {
            nonce,
            started_at: now,
            counts: BTreeMap::new(),
        });
        vec![
            Action::Send {
                face: self.config.face,
                packet: InterestPacket::new(ServiceName::Monitor, nonce).into(),
            },
            Action::Timer {
                after: self.config.round_timeout,
                timer: ControllerTimer::RoundClose { nonce },
            },
        ]
    }

    fn close_round(&mut self, nonce: u64) -> Vec<ControllerAction> {
        let Some(round) = self.round.take_if(|r| r.nonce == nonce) else {
            return Vec::new();
        };
        let fields = vec![
            ("agents".to_string(), round.counts.len().to_string()),
            (
                "statuses".to_string(),
                round.counts.values().sum::<u32>().to_string(),
            ),
        ];
        self.completed.push(round);
        vec![Action::Note(Note::Controller {
            kind: "round-close",
            fields,
        })]
    }

    pub fn on_packet(&mut self, now: u64, _face: FaceId, packet: Packet) -> Vec<ControllerAction> {
        match packet {
            Packet::Data(d) if d.name.is_monitor() => {
                self.ingest_monitor_data(now, &d);
                Vec::new()
            }
            Packet::Interest(i) => match &i.name {
                ServiceName::Retrieve { head, requester } => {
                    let (head, requester) = (head.clone(), requester.clone());
                    self.handle_retrieve(&i.name, &head, requester.as_ref())
                }
                _ => drop_note(&Packet::Interest(i)),
            },
            other => drop_note(&other),
        }
    }

    pub fn ingest_monitor_data(&mut self, now: u64, data: &DataPacket) {
        let statuses = data.status_list.as_deref().unwrap_or_default();
        if let Some(round) = self.round.as_mut() {
            for s in statuses {
                *round.counts.entry(s.agent_id.clone()).or_default() += 1;
            }
        }
        self.image.ingest(statuses, now);
    }

    pub fn place(&self, head: &Label, requester: Option<&Label>) -> Result<Placement, ControllerError> {
        let chart = self
            .charts
            .get(head)
            .ok_or_else(|| ControllerError::UnknownHead(head.clone()))?;
        place_service(
            chart,
            &self.image,
            &self.config.weights,
            requester,
            &self.config.attachment,
            &self.installed,
        )
    }

    /// Deploy packets for every (microservice, agent) pair of `tree` that is
    /// not yet installed, with their source-route entries.
    pub fn deploy_tree(&self, tree: &ServiceTree) -> Result<Vec<(DeployPacket, SourceRouteEntry, u64)>, ControllerError> {
        let routes = self.image.routes_from(&self.config.attachment);
        let mut out = Vec::new();
        for ms in tree.chart.microservices() {
            let target = &tree.placement[&ms.id];
            if self.installed.contains(&(target.clone(), ms.id.clone())) {
                continue;
            }
            let route = routes.get(target).ok_or_else(|| ControllerError::NoRoute {
                from: self.config.attachment.clone(),
                to: target.clone(),
            })?;
            out.push((
                DeployPacket {
                    faces: route.faces.clone(),
                    target: target.clone(),
                    microservice: ms.clone(),
                },
                SourceRouteEntry {
                    target: target.clone(),
                    microservice: ms.id.clone(),
                    face_chain: route.faces.clone(),
                },
                route.delay,
            ));
        }
        Ok(out)
    }

    fn handle_retrieve(&mut self, name: &ServiceName, head: &Label, requester: Option<&Label>) -> Vec<ControllerAction> {
        let planned = self
            .place(head, requester)
            .and_then(|p| Ok((p.tree.to_name()?, self.deploy_tree(&p.tree)?, p)));
        let (exec, deploys, placement) = match planned {
            Ok(x) => x,
            Err(e) => {
                let payload = format!("{ERROR_MARKER}{e}").into_bytes();
                return vec![
                    Action::Note(Note::Controller {
                        kind: "retrieve-error",
                        fields: vec![("reason".into(), e.to_string())],
                    }),
                    Action::Send {
                        face: self.config.face,
                        packet: DataPacket::new(name.clone(), payload).into(),
                    },
                ];
            }
        };

        let mut out = Vec::new();
        out.push(Action::Note(Note::Controller {
            kind: "place",
            fields: placement
                .tree
                .placement
                .iter()
                .map(|(m, a)| (m.to_string(), a.to_string()))
                .collect(),
        }));
        let mut settle = 0;
        for (packet, entry, delay) in deploys {
            settle = settle.max(self.config.link_delay + delay);
            self.installed
                .insert((entry.target.clone(), entry.microservice.clone()));
            if let Some(status) = self.image.status_mut(&entry.target) {
                status.storage_free = status
                    .storage_free
                    .saturating_sub(packet.microservice.storage_demand);
            }
            self.routes.push(entry);
            out.push(Action::Send {
                face: self.config.face,
                packet: packet.into(),
            });
        }
        self.placements
            .insert(head.clone(), placement.tree.placement.clone());
        let data = DataPacket::new(name.clone(), exec.to_string().into_bytes());
        if settle == 0 {
            out.push(Action::Send {
                face: self.config.face,
                packet: data.into(),
            });
        } else {
            out.push(Action::Timer {
                after: settle,
                timer: ControllerTimer::Reply { data },
            });
        }
        out
    }
}

fn drop_note(packet: &Packet) -> Vec<ControllerAction> {
    vec![Action::Note(Note::Drop {
        reason: crate::agent::DropReason::Unsupported,
        packet: packet.type_name(),
        name: packet.name().map(|n| n.to_string()).unwrap_or_default(),
    })]
}
