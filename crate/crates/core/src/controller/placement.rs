use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::image::{Route, TopologyImage};
use super::ControllerError;
use crate::agent::{AgentStatus, MicroserviceDescriptor};
use crate::names::{HopKey, Label, ServiceChart, ServiceTree};

/// Score weights for placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub delay: f64,
    pub data: f64,
    pub store: f64,
    pub energy: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            delay: 1.0,
            data: 1.0,
            store: 0.5,
            energy: 0.5,
        }
    }
}

/// Result of placing one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub tree: ServiceTree,
    /// Winning score per non-head microservice.
    pub scores: BTreeMap<Label, f64>,
}

/// Microservices of a chart in placement order: each segment from the data
/// end toward the head, segments in chart order, then the head.
pub fn placement_order(chart: &ServiceChart) -> Vec<(&MicroserviceDescriptor, Option<usize>)> {
    let mut order = Vec::new();
    for (i, segment) in chart.segments.iter().enumerate() {
        for ms in segment.microservices.iter().rev() {
            order.push((ms, Some(i)));
        }
    }
    order.push((&chart.head, None));
    order
}

pub fn storage_pressure(free: u64, total: u64) -> f64 {
    if total == 0 {
        1.0
    } else {
        1.0 - free as f64 / total as f64
    }
}

pub fn score(weights: &Weights, to_prev: u64, to_data: u64, free: u64, status: &AgentStatus) -> f64 {
    weights.delay * to_prev as f64
        + weights.data * to_data as f64
        + weights.store * storage_pressure(free, status.storage_total)
        + weights.energy * (1.0 - f64::from(status.battery) / 100.0)
}

struct Planner<'a> {
    image: &'a TopologyImage,
    routes: BTreeMap<Label, BTreeMap<Label, Route>>,
    free: BTreeMap<Label, u64>,
    installed: &'a BTreeSet<(Label, Label)>,
}

impl<'a> Planner<'a> {
    fn new(image: &'a TopologyImage, installed: &'a BTreeSet<(Label, Label)>) -> Self {
        Planner {
            image,
            routes: image
                .agents
                .keys()
                .map(|a| (a.clone(), image.routes_from(a)))
                .collect(),
            free: image
                .agents
                .iter()
                .map(|(a, o)| (a.clone(), o.status.storage_free))
                .collect(),
            installed,
        }
    }

    fn delay(&self, from: &Label, to: &Label) -> Option<u64> {
        self.routes.get(from)?.get(to).map(|r| r.delay)
    }

    fn faces(&self, from: &Label, to: &Label) -> Result<Vec<u32>, ControllerError> {
        self.routes
            .get(from)
            .and_then(|r| r.get(to))
            .map(|r| r.faces.clone())
            .ok_or_else(|| ControllerError::NoRoute {
                from: from.clone(),
                to: to.clone(),
            })
    }

    fn demand(&self, agent: &Label, ms: &MicroserviceDescriptor) -> u64 {
        if self.installed.contains(&(agent.clone(), ms.id.clone())) {
            0
        } else {
            ms.storage_demand
        }
    }

    fn feasible(&self, agent: &Label, ms: &MicroserviceDescriptor) -> bool {
        let status = &self.image.agents[agent].status;
        status.compute_free >= ms.compute_demand && self.free[agent] >= self.demand(agent, ms)
    }

    fn commit(&mut self, agent: &Label, ms: &MicroserviceDescriptor) {
        let demand = self.demand(agent, ms);
        *self.free.get_mut(agent).expect("known agent") -= demand;
    }
}

/// Greedy placement of `chart` over `image`.
///
/// `requester` anchors the head; without one the head goes next to
/// `attachment`. `installed` lists (agent, microservice) pairs that need no
/// extra storage.
pub fn place_service(
    chart: &ServiceChart,
    image: &TopologyImage,
    weights: &Weights,
    requester: Option<&Label>,
    attachment: &Label,
    installed: &BTreeSet<(Label, Label)>,
) -> Result<Placement, ControllerError> {
    let mut planner = Planner::new(image, installed);
    let mut placement: BTreeMap<Label, Label> = BTreeMap::new();
    let mut scores = BTreeMap::new();

    let mut data_hosts = Vec::with_capacity(chart.segments.len());
    for segment in &chart.segments {
        let host = image
            .data_locations
            .get(&segment.data)
            .ok_or_else(|| ControllerError::UnknownData(segment.data.clone()))?;
        data_hosts.push(host.clone());
    }

    let mut prev: Vec<Label> = data_hosts.clone();
    for (ms, segment) in placement_order(chart) {
        let Some(seg) = segment else { continue };
        let data_host = &data_hosts[seg];
        let mut best: Option<(f64, &Label)> = None;
        for (agent, obs) in &image.agents {
            if !planner.feasible(agent, ms) {
                continue;
            }
            let (Some(to_prev), Some(to_data)) = (
                planner.delay(agent, &prev[seg]),
                planner.delay(agent, data_host),
            ) else {
                continue;
            };
            let s = score(weights, to_prev, to_data, planner.free[agent], &obs.status);
            if best.is_none_or(|(b, _)| s < b) {
                best = Some((s, agent));
            }
        }
        let (s, agent) = best.ok_or_else(|| ControllerError::Unplaceable(ms.id.clone()))?;
        let agent = agent.clone();
        planner.commit(&agent, ms);
        scores.insert(ms.id.clone(), s);
        placement.insert(ms.id.clone(), agent.clone());
        prev[seg] = agent;
    }

    let anchor = requester
        .filter(|r| image.agents.contains_key(*r))
        .unwrap_or(attachment);
    let head = &chart.head;
    let head_agent = image
        .agents
        .keys()
        .filter(|a| planner.feasible(a, head))
        .filter_map(|a| planner.delay(anchor, a).map(|d| (d, a)))
        .min()
        .map(|(_, a)| a.clone())
        .ok_or_else(|| ControllerError::Unplaceable(head.id.clone()))?;
    planner.commit(&head_agent, head);
    placement.insert(head.id.clone(), head_agent.clone());

    let mut hop_faces = BTreeMap::new();
    for (segment, data_host) in chart.segments.iter().zip(&data_hosts) {
        let mut from = head_agent.clone();
        let hosts = segment
            .microservices
            .iter()
            .map(|m| placement[&m.id].clone())
            .chain(std::iter::once(data_host.clone()));
        for (index, to) in hosts.enumerate() {
            let key = HopKey {
                segment: segment.label.clone(),
                index,
            };
            hop_faces.insert(key, planner.faces(&from, &to)?);
            from = to;
        }
    }
    let entry_faces = planner.faces(anchor, &head_agent)?;

    Ok(Placement {
        tree: ServiceTree {
            chart: chart.clone(),
            entry_faces,
            placement,
            hop_faces,
        },
        scores,
    })
}
