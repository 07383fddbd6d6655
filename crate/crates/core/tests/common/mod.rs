#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdnsn::agent::{AgentStatus, MicroserviceDescriptor, NeighborDelay};
use sdnsn::controller::{TopologyImage, Weights};
use sdnsn::names::{ChartSegment, FaceId, Label, SegmentLabel, ServiceChart};
use sdnsn::simnet::{DataItem, LinkSpec, NodeSpec, Topology};

pub const ATTACH: &str = "a0";
pub const CONTROLLER_FACE: FaceId = 0;

pub fn label(s: &str) -> Label {
    Label::new(s).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Resource ranges for generated agents.
#[derive(Debug, Clone, Copy)]
pub struct Resources {
    pub storage: (u64, u64),
    pub compute: (u64, u64),
    pub battery: (u8, u8),
}

impl Resources {
    pub const ROOMY: Resources = Resources {
        storage: (500, 500),
        compute: (100, 100),
        battery: (100, 100),
    };
    pub const TIGHT: Resources = Resources {
        storage: (0, 60),
        compute: (0, 8),
        battery: (10, 100),
    };
}

/// Random connected topology over `n` agents `a0..`, `a0` attached to the
/// controller on face 0. A random spanning tree plus a few extra links.
pub fn random_topology(rng: &mut ChaCha8Rng, n: usize, res: Resources) -> Topology {
    let ids: Vec<Label> = (0..n).map(|i| label(&format!("a{i}"))).collect();
    let nodes = ids
        .iter()
        .enumerate()
        .map(|(i, id)| NodeSpec {
            id: id.clone(),
            battery: rng.random_range(res.battery.0..=res.battery.1),
            storage: rng.random_range(res.storage.0..=res.storage.1),
            compute: rng.random_range(res.compute.0..=res.compute.1),
            controller_attachment: i == 0,
            controller_face: (i == 0).then_some(CONTROLLER_FACE),
        })
        .collect();

    let mut next_face = vec![1 as FaceId; n];
    let mut linked = std::collections::BTreeSet::new();
    let mut links = Vec::new();
    let mut connect = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
        let key = (a.min(b), a.max(b));
        if a == b || !linked.insert(key) {
            return;
        }
        // Face ids skip a random amount to avoid dense numbering.
        next_face[a] += rng.random_range(0..3);
        next_face[b] += rng.random_range(0..3);
        links.push(LinkSpec {
            a: ids[a].clone(),
            a_face: next_face[a],
            b: ids[b].clone(),
            b_face: next_face[b],
            delay: rng.random_range(1..=10),
            loss: 0.0,
        });
        next_face[a] += 1;
        next_face[b] += 1;
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        connect(i, j, rng);
    }
    for _ in 0..rng.random_range(0..=n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        connect(a, b, rng);
    }
    Topology {
        nodes,
        links,
        data: Vec::new(),
    }
}

/// Random chart with `total` microservices (head included, at least 2),
/// split over one or two segments whose data live on random agents. Data
/// items are added to `topology`.
pub fn random_chart(rng: &mut ChaCha8Rng, topology: &mut Topology, total: usize, demand: (u64, u64)) -> ServiceChart {
    let ms = |id: String, rng: &mut ChaCha8Rng| {
        MicroserviceDescriptor::new(
            label(&id),
            rng.random_range(1..=20),
            rng.random_range(demand.0..=demand.1),
            rng.random_range(1..=4),
            id,
        )
    };
    let head = ms("h".into(), rng);
    let body = total - 1;
    let split = if body >= 2 && rng.random_bool(0.5) {
        rng.random_range(1..body)
    } else {
        body
    };
    let mut segments = Vec::new();
    let mut counter = 0;
    for (i, count) in [split, body - split].into_iter().enumerate().filter(|(_, c)| *c > 0) {
        let microservices = (0..count)
            .map(|_| {
                counter += 1;
                ms(format!("m{counter}"), rng)
            })
            .collect();
        let data = label(&format!("d{i}"));
        let host = rng.random_range(0..topology.nodes.len());
        topology.data.push(DataItem {
            name: data.clone(),
            host: topology.nodes[host].id.clone(),
            payload_seed: rng.random(),
            freshness: None,
        });
        segments.push(ChartSegment {
            label: SegmentLabel::new(&format!("S{}", i + 1)).unwrap(),
            microservices,
            data,
        });
    }
    ServiceChart { head, segments }
}

/// Ground-truth adjacency: (agent, face) -> (neighbor, delay).
pub fn adjacency(topology: &Topology) -> BTreeMap<(Label, FaceId), (Label, u64)> {
    let mut out = BTreeMap::new();
    for l in &topology.links {
        out.insert((l.a.clone(), l.a_face), (l.b.clone(), l.delay));
        out.insert((l.b.clone(), l.b_face), (l.a.clone(), l.delay));
    }
    out
}

/// Follows `faces` from `start` over the real links.
pub fn replay(topology: &Topology, start: &Label, faces: &[FaceId]) -> Option<Label> {
    let adj = adjacency(topology);
    let mut at = start.clone();
    for &f in faces {
        at = adj.get(&(at.clone(), f))?.0.clone();
    }
    Some(at)
}

/// Statuses an agent population would report for `topology`.
pub fn statuses(topology: &Topology) -> Vec<AgentStatus> {
    topology
        .nodes
        .iter()
        .map(|n| AgentStatus {
            agent_id: n.id.clone(),
            battery: n.battery,
            storage_free: n.storage,
            storage_total: n.storage,
            compute_free: n.compute,
            neighbor_delays: adjacency(topology)
                .into_iter()
                .filter(|((a, _), _)| a == &n.id)
                .map(|((_, face), (neighbor, delay))| NeighborDelay { face, neighbor, delay })
                .collect(),
            hosted_data: topology
                .data
                .iter()
                .filter(|d| d.host == n.id)
                .map(|d| d.name.clone())
                .collect(),
            install_failures: 0,
        })
        .collect()
}

pub fn image_of(topology: &Topology) -> TopologyImage {
    let mut image = TopologyImage::default();
    image.ingest(&statuses(topology), 0);
    image
}

/// All-pairs shortest delays by Floyd-Warshall over the real links.
pub fn all_pairs(topology: &Topology) -> BTreeMap<(Label, Label), u64> {
    let ids: Vec<&Label> = topology.nodes.iter().map(|n| &n.id).collect();
    let n = ids.len();
    let pos = |l: &Label| ids.iter().position(|x| *x == l).unwrap();
    let mut d = vec![vec![u64::MAX; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for l in &topology.links {
        let (a, b) = (pos(&l.a), pos(&l.b));
        d[a][b] = d[a][b].min(l.delay);
        d[b][a] = d[b][a].min(l.delay);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] != u64::MAX && d[k][j] != u64::MAX {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            out.insert((ids[i].clone(), ids[j].clone()), d[i][j]);
        }
    }
    out
}

/// Oracle score of putting a microservice on `agent` with `free` storage
/// left there before the placement.
pub fn oracle_score(w: &Weights, to_prev: u64, to_data: u64, free: u64, total: u64, battery: u8) -> f64 {
    let pressure = if total == 0 { 1.0 } else { (total - free) as f64 / total as f64 };
    w.delay * to_prev as f64 + w.data * to_data as f64 + w.store * pressure + w.energy * (100 - battery) as f64 / 100.0
}
