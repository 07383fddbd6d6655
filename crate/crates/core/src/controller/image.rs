use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::agent::AgentStatus;
use crate::names::{FaceId, Label};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub status: AgentStatus,
    pub observed_at: u64,
}

/// Shortest-delay route from a source agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub delay: u64,
    /// Outgoing face at each agent along the walk.
    pub faces: Vec<FaceId>,
}

/// The controller's view of the network, rebuilt from monitor statuses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopologyImage {
    pub agents: BTreeMap<Label, Observation>,
    pub adjacency: BTreeMap<(Label, FaceId), (Label, u64)>,
    pub data_locations: BTreeMap<Label, Label>,
}

fn well_formed(status: &AgentStatus) -> bool {
    status.battery <= 100 && status.storage_free <= status.storage_total
}

impl TopologyImage {
    /// Merges statuses, keeping the latest observation per agent, and
    /// rebuilds adjacency and data locations. Malformed records are skipped;
    /// the number skipped is returned.
    pub fn ingest(&mut self, statuses: &[AgentStatus], now: u64) -> usize {
        let mut skipped = 0;
        for status in statuses {
            if !well_formed(status) {
                skipped += 1;
                continue;
            }
            let newer = self
                .agents
                .get(&status.agent_id)
                .is_none_or(|o| o.observed_at <= now);
            if newer {
                self.agents.insert(
                    status.agent_id.clone(),
                    Observation {
                        status: status.clone(),
                        observed_at: now,
                    },
                );
            }
        }
        self.rebuild();
        skipped
    }

    fn rebuild(&mut self) {
        self.adjacency.clear();
        self.data_locations.clear();
        for (id, obs) in &self.agents {
            for n in &obs.status.neighbor_delays {
                self.adjacency
                    .insert((id.clone(), n.face), (n.neighbor.clone(), n.delay));
            }
            for data in &obs.status.hosted_data {
                self.data_locations
                    .entry(data.clone())
                    .or_insert_with(|| id.clone());
            }
        }
    }

    pub fn status(&self, agent: &Label) -> Option<&AgentStatus> {
        self.agents.get(agent).map(|o| &o.status)
    }

    pub fn status_mut(&mut self, agent: &Label) -> Option<&mut AgentStatus> {
        self.agents.get_mut(agent).map(|o| &mut o.status)
    }

    /// Every directed adjacency has a reverse edge.
    pub fn is_consistent(&self) -> bool {
        self.adjacency.iter().all(|((a, _), (b, _))| {
            self.adjacency
                .iter()
                .any(|((x, _), (y, _))| x == b && y == a)
        })
    }

    /// Dijkstra over the adjacency. Ties keep the first route found, with
    /// nodes settled in (delay, id) order and edges relaxed in face order.
    pub fn routes_from(&self, source: &Label) -> BTreeMap<Label, Route> {
        let mut best: BTreeMap<Label, Route> = BTreeMap::new();
        best.insert(
            source.clone(),
            Route {
                delay: 0,
                faces: Vec::new(),
            },
        );
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u64, source.clone())));
        let mut done = std::collections::BTreeSet::new();
        while let Some(Reverse((delay, node))) = heap.pop() {
            if !done.insert(node.clone()) {
                continue;
            }
            let here = best[&node].clone();
            let edges = self
                .adjacency
                .range((node.clone(), 0)..=(node.clone(), FaceId::MAX));
            for ((_, face), (next, d)) in edges {
                let candidate = delay + d;
                if best.get(next).is_none_or(|r| candidate < r.delay) {
                    let mut faces = here.faces.clone();
                    faces.push(*face);
                    best.insert(
                        next.clone(),
                        Route {
                            delay: candidate,
                            faces,
                        },
                    );
                    heap.push(Reverse((candidate, next.clone())));
                }
            }
        }
        best
    }

    /// Agent reached by following `faces` from `start`.
    pub fn walk(&self, start: &Label, faces: &[FaceId]) -> Option<Label> {
        let mut at = start.clone();
        for face in faces {
            at = self.adjacency.get(&(at, *face))?.0.clone();
        }
        Some(at)
    }
}
