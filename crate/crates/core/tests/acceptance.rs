//! Acceptance criteria. Each test prints one `criterion N <name>: PASS|FAIL`
//! line on stdout (written past the harness capture) before asserting.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use common::*;
use sdnsn::agent::{
    deadline_met, digest, run_microservice, Action, Agent, AgentConfig, AgentTimer, DropReason, MicroserviceDescriptor,
    Note, Peer,
};
use sdnsn::controller::{place_service, placement_order, ControllerError, Weights};
use sdnsn::names::{
    ChartSegment, FaceId, HopKey, Label, SegmentLabel, ServiceChart, ServiceName, ServiceTree,
};
use sdnsn::packets::{DeployPacket, InterestPacket, Packet};
use sdnsn::scenario::Scenario;
use sdnsn::simnet::{self, RequestSpec, RequestStatus, SimConfig, Simulation, Topology, TraceRecord};

fn criterion(n: u8, name: &str, body: impl FnOnce()) {
    let result = catch_unwind(AssertUnwindSafe(body));
    let verdict = if result.is_ok() { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n} {name}: {verdict}").unwrap();
    out.flush().unwrap();
    if let Err(e) = result {
        resume_unwind(e);
    }
}

fn scenario(file: &str) -> Scenario {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", file].iter().collect();
    Scenario::load(path).unwrap()
}

fn run_scenario(s: &Scenario, seed: u64) -> simnet::SimOutput {
    let mut config = s.config.clone();
    config.seed = seed;
    simnet::run(&s.topology, &s.charts, &s.requests, config).unwrap()
}

fn is(r: &TraceRecord, node: &str, kind: &str, ptype: &str, name: &str) -> bool {
    r.node == node && r.kind == kind && r.ptype == ptype && r.name == name
}

/// Index of the first record at or after `from` matching `pred`.
fn find_from(trace: &[TraceRecord], from: usize, pred: impl Fn(&TraceRecord) -> bool) -> usize {
    trace[from..]
        .iter()
        .position(pred)
        .map(|p| from + p)
        .unwrap_or_else(|| panic!("no matching record after index {from}"))
}

// ---------------------------------------------------------------------------

const MULTIMEDIA_EXEC: &str = "/sd-nsn/exec/multimedia/S1/face1/videoanalysis/face30/video-aircraft320/S2/face2/soundanalysis/face10/soundfactory";

#[test]
fn criterion_1_golden_trace() {
    criterion(1, "golden-trace", || {
        let s = scenario("multimedia.scn");
        let out = run_scenario(&s, s.config.seed);
        let t = &out.trace;

        let exec = find_from(t, 0, |r| r.ptype == "interest" && r.name == MULTIMEDIA_EXEC);
        assert_eq!(t[exec].node, "nsn1");

        // (agent, plain chain, PST key, outgoing data name)
        let branches = [
            ("nsn3", "/videoanalysis/face30/video-aircraft320", "/video-aircraft320", 30, "/videoanalysis/video-aircraft320"),
            ("nsn2", "/soundanalysis/face10/soundfactory", "/soundfactory", 10, "/soundanalysis/soundfactory"),
        ];
        let mut branch_ends = Vec::new();
        for (agent, chain, awaited, face, result) in branches {
            let pit = find_from(t, exec, |r| is(r, agent, "pit-insert", "interest", chain));
            let pst = find_from(t, pit, |r| is(r, agent, "pst-insert", "interest", awaited));
            let send = find_from(t, pst, |r| is(r, agent, "send", "interest", awaited));
            assert_eq!(t[send].face.as_deref(), Some(face.to_string().as_str()));
            let data = find_from(t, send, |r| is(r, agent, "send", "data", result));
            assert!(t[data].time > t[send].time);
            branch_ends.push(data);
        }

        let fused = "/multimedia/videoanalysis/video-aircraft320/soundanalysis/soundfactory";
        let done = find_from(t, *branch_ends.iter().max().unwrap(), |r| is(r, "nsn1", "complete", "data", fused));
        assert_eq!(t[done].get("request"), Some("0"));

        // The delivered payload is the fusion of both analysed inputs.
        let payload_of = |name: &str| s.topology.data.iter().find(|d| d.name.as_str() == name).unwrap().payload();
        let ms = |id: &str| s.charts[0].microservice(&label(id)).unwrap().clone();
        let name = |n: &str| ServiceName::parse(n).unwrap();
        let video = run_microservice(&ms("videoanalysis"), &[(name("/video-aircraft320"), payload_of("video-aircraft320"))]);
        let sound = run_microservice(&ms("soundanalysis"), &[(name("/soundfactory"), payload_of("soundfactory"))]);
        let expected = run_microservice(
            &ms("multimedia"),
            &[
                (name("/videoanalysis/video-aircraft320"), video),
                (name("/soundanalysis/soundfactory"), sound),
            ],
        );
        assert_eq!(t[done].get("digest"), Some(format!("{:016x}", digest(&expected)).as_str()));
    });
}

// ---------------------------------------------------------------------------

fn label_strategy() -> impl Strategy<Value = Label> {
    "[a-z][a-z0-9-]{0,9}".prop_filter_map("reserved", |s| Label::new(s).ok())
}

fn microservice_strategy() -> impl Strategy<Value = MicroserviceDescriptor> {
    (label_strategy(), 1u64..50).prop_map(|(id, exec)| MicroserviceDescriptor::new(id.clone(), exec, 1, 1, id.as_str()))
}

fn faces_strategy() -> impl Strategy<Value = Vec<FaceId>> {
    prop::collection::vec(0u32..1000, 0..3)
}

/// Random trees: a chart of 1..4 segments with 0..3 microservices each, and
/// random face chains for every hop.
fn tree_strategy() -> impl Strategy<Value = ServiceTree> {
    let segment = (
        prop::collection::vec(microservice_strategy(), 0..3),
        label_strategy(),
        prop::collection::vec(faces_strategy(), 4),
    );
    (
        microservice_strategy(),
        prop::collection::vec(segment, 1..4),
        faces_strategy(),
        prop::collection::vec(1u8..10, 1..3),
    )
        .prop_map(|(head, segments, entry_faces, digits)| {
            let mut hop_faces = BTreeMap::new();
            let mut chart_segments = Vec::new();
            for (i, (microservices, data, faces)) in segments.into_iter().enumerate() {
                let path: String = digits.iter().map(|d| d.to_string()).collect();
                let label = SegmentLabel::new(&format!("S{path}{}", i + 1)).unwrap();
                for (index, f) in faces.into_iter().take(microservices.len() + 1).enumerate() {
                    hop_faces.insert(HopKey { segment: label.clone(), index }, f);
                }
                chart_segments.push(ChartSegment { label, microservices, data });
            }
            ServiceTree {
                chart: ServiceChart { head, segments: chart_segments },
                entry_faces,
                placement: BTreeMap::new(),
                hop_faces,
            }
        })
}

fn components(name: &ServiceName) -> Vec<String> {
    name.to_string()
        .trim_start_matches('/')
        .split('/')
        .map(str::to_string)
        .collect()
}

/// Walks a name the way agents would: pop faces, then consume the element.
/// Checks at each consumption that local element, consumed face and child
/// components concatenate back to the parent. Returns the number of
/// elements consumed.
fn walk_conserving(name: &ServiceName) -> usize {
    let mut name = name.clone();
    while let Some((face, rest)) = name.pop_leading_face() {
        let mut rebuilt = components(&rest);
        let body_at = if rest.command().keyword().is_some() { 2 } else { 0 };
        rebuilt.insert(body_at, format!("face{face}"));
        assert_eq!(rebuilt, components(&name));
        name = rest;
    }
    let local = name.first_element().expect("element after faces").clone();
    let children = name.rewrite_for_children(&local).unwrap();

    let parent = components(&name);
    let body: Vec<String> = parent
        .iter()
        .skip(if name.command().keyword().is_some() { 2 } else { 0 })
        .cloned()
        .collect();
    let mut rebuilt = vec![local.to_string()];
    match &name {
        ServiceName::Tree { tree, .. } => {
            assert_eq!(children.len(), tree.segments.len());
            for (segment, child) in tree.segments.iter().zip(&children) {
                rebuilt.push(segment.label.to_string());
                rebuilt.extend(child.face.map(|f| format!("face{f}")));
                rebuilt.extend(components(&child.name));
            }
        }
        _ => {
            assert!(children.len() <= 1);
            for child in &children {
                rebuilt.extend(child.face.map(|f| format!("face{f}")));
                rebuilt.extend(components(&child.name));
            }
        }
    }
    assert_eq!(rebuilt, body);
    1 + children.iter().map(|c| walk_conserving(&c.name)).sum::<usize>()
}

#[test]
fn criterion_2_name_round_trip() {
    criterion(2, "name-round-trip", || {
        let mut runner = TestRunner::new(Config {
            cases: 1000,
            failure_persistence: None,
            ..Config::default()
        });
        let cases = std::cell::Cell::new(0usize);
        runner
            .run(&tree_strategy(), |tree| {
                cases.set(cases.get() + 1);
                let name = tree.to_name().unwrap();
                let text = name.to_string();
                prop_assert_eq!(ServiceName::parse(&text).unwrap(), name.clone());
                prop_assert_eq!(ServiceName::parse(&text).unwrap().to_string(), text);
                let expected = 1 + tree
                    .chart
                    .segments
                    .iter()
                    .map(|s| s.microservices.len() + 1)
                    .sum::<usize>();
                prop_assert_eq!(walk_conserving(&name), expected);
                Ok(())
            })
            .unwrap();
        assert!(cases.get() >= 1000, "only {} trees generated", cases.get());
    });
}

// ---------------------------------------------------------------------------

fn sends(actions: &[Action<AgentTimer>]) -> Vec<(FaceId, &'static str, String)> {
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Send { face, packet } => Some((
                *face,
                packet.type_name(),
                packet.name().map(|n| n.to_string()).unwrap_or_default(),
            )),
            _ => None,
        })
        .collect()
}

fn serving_agent() -> Agent {
    let mut a = Agent::new(
        AgentConfig::new(label("srv"))
            .with_neighbor(0, "up", 5)
            .with_hosted("cam", vec![7; 4]),
    );
    a.install(MicroserviceDescriptor::new(label("alert"), 30, 1, 1, "alert"));
    a.learn_tree(ServiceName::parse("/sd-nsn/exec/alert/S1/cam").unwrap());
    a
}

#[test]
fn criterion_3_lookup_deadline() {
    criterion(3, "lookup-deadline", || {
        // Predicate, against the arithmetic definition.
        for exec in [1u64, 10, 30, 99] {
            for trig in [0u64, 5, 100] {
                for delay in 0..=120u64 {
                    for execution_time in [1u64, 40, 100, 130] {
                        let now = trig + delay;
                        assert_eq!(
                            deadline_met(exec, now, trig, execution_time),
                            exec + delay < execution_time,
                            "exec={exec} trig={trig} now={now} budget={execution_time}"
                        );
                    }
                }
            }
        }
        assert!(!deadline_met(30, 70, 0, 100), "equality must not execute");
        assert!(deadline_met(30, 69, 0, 100));

        // Boundary and missed lookups drop with no Data; a timely one answers.
        for (now, answered) in [(70, false), (95, false), (69, true)] {
            let mut a = serving_agent();
            let lookup = ServiceName::lookup(label("alert"), 100, 0);
            let out = a.on_packet(now, 0, InterestPacket::new(lookup.clone(), 1).into());
            let missed = out
                .iter()
                .any(|x| matches!(x, Action::Note(Note::Drop { reason: DropReason::DeadlineMissed, .. })));
            assert_eq!(missed, !answered, "now={now}");
            let mut all = out;
            let timers: Vec<_> = all
                .iter()
                .filter_map(|x| match x {
                    Action::Timer { after, timer: t @ AgentTimer::ExecDone(_) } => Some((*after, t.clone())),
                    _ => None,
                })
                .collect();
            for (after, t) in timers {
                all.extend(a.on_timer(now + after, t));
            }
            let data: Vec<_> = sends(&all).into_iter().filter(|s| s.1 == "data").collect();
            if answered {
                assert_eq!(data, vec![(0, "data", lookup.to_string())]);
            } else {
                assert!(data.is_empty());
            }
        }

        // Unanswered lookup: exactly one retrieve after twice the head's
        // exec_time when the head is installed.
        let mut a = Agent::new(
            AgentConfig::new(label("req"))
                .with_neighbor(0, "n", 5)
                .with_face(9, Peer::Controller, 1),
        );
        a.install(MicroserviceDescriptor::new(label("alert"), 35, 1, 1, "alert"));
        let out = a.submit_local_request(10, 0, label("alert"), 500).unwrap();
        let (after, timer) = out
            .iter()
            .find_map(|x| match x {
                Action::Timer { after, timer: t @ AgentTimer::LookupTimeout(_) } => Some((*after, t.clone())),
                _ => None,
            })
            .unwrap();
        assert_eq!(after, 70);
        let fired = a.on_timer(80, timer.clone());
        assert_eq!(sends(&fired), vec![(9, "interest", "/sd-nsn/retrieve/alert/req".to_string())]);
        assert!(sends(&a.on_timer(81, timer)).is_empty());

        // Same in the simulator, where the requester does not host the head.
        let s = scenario("multimedia.scn");
        let out = run_scenario(&s, s.config.seed);
        let first = &s.requests[0];
        let timeouts: Vec<_> = out.trace.iter().filter(|r| r.kind == "lookup-timeout").collect();
        assert_eq!(timeouts.len(), 1);
        assert_eq!(timeouts[0].time, first.at + 2 * first.execution_time);
        let retrieves = out
            .trace
            .iter()
            .filter(|r| r.node == first.agent.as_str() && r.kind == "send" && r.name.starts_with("/sd-nsn/retrieve/"))
            .count();
        assert_eq!(retrieves, 1);
    });
}

// ---------------------------------------------------------------------------

fn sim_config(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        horizon: 30_000,
        round_timeout: 400,
        controller_face: 0,
        controller_delay: 1,
        ..SimConfig::default()
    }
}

#[test]
fn criterion_4_deploy_routing() {
    criterion(4, "deploy-routing", || {
        let mut r = rng(4);
        for case in 0..100u64 {
            let n = rand::Rng::random_range(&mut r, 1..=8);
            let mut topology = random_topology(&mut r, n, Resources::ROOMY);
            let total = rand::Rng::random_range(&mut r, 2..=4);
            let chart = random_chart(&mut r, &mut topology, total, (1, 20));
            let request = RequestSpec {
                at: 500,
                agent: label(ATTACH),
                head: chart.head.id.clone(),
                execution_time: 100,
                expect_unknown: false,
            };
            let mut sim = Simulation::new(&topology, std::slice::from_ref(&chart), &[request], sim_config(case)).unwrap();
            let out = sim.run();
            assert_eq!(out.metrics.requests[0].status, RequestStatus::Completed, "case {case}");

            let controller = sim.controller().unwrap();
            let routes = controller.source_routes();
            assert_eq!(routes.len(), chart.microservices().count(), "case {case}");
            let mut expected: BTreeSet<(Label, Label)> = BTreeSet::new();
            for entry in routes {
                assert_eq!(
                    replay(&topology, &label(ATTACH), &entry.face_chain).as_ref(),
                    Some(&entry.target),
                    "case {case}: chain {:?}",
                    entry.face_chain
                );
                if entry.face_chain.is_empty() {
                    assert_eq!(entry.target.as_str(), ATTACH);
                }
                expected.insert((entry.target.clone(), entry.microservice.clone()));
            }
            let installed: BTreeSet<(Label, Label)> = sim
                .agents()
                .iter()
                .flat_map(|a| a.repository().keys().map(|m| (a.id().clone(), m.clone())))
                .collect();
            assert_eq!(installed, expected, "case {case}");
        }

        // A chain with no faces installs on the receiving agent itself.
        let mut a = Agent::new(AgentConfig::new(label("solo")).with_face(9, Peer::Controller, 1));
        let ms = MicroserviceDescriptor::new(label("m"), 1, 1, 1, "m");
        let out = a.on_packet(
            0,
            9,
            Packet::Deploy(DeployPacket { faces: vec![], target: label("solo"), microservice: ms.clone() }),
        );
        assert!(sends(&out).is_empty());
        assert!(a.repository().contains_key(&ms.id));
    });
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_5_monitor_convergence() {
    criterion(5, "monitor-convergence", || {
        let mut r = rng(5);
        for case in 0..100u64 {
            let n = rand::Rng::random_range(&mut r, 1..=8);
            let topology = random_topology(&mut r, n, Resources::TIGHT);
            let mut sim = Simulation::new(&topology, &[], &[], sim_config(case)).unwrap();
            sim.run();
            let controller = sim.controller().unwrap();
            let round = &controller.completed_rounds()[0];
            let agents: BTreeSet<&Label> = topology.nodes.iter().map(|n| &n.id).collect();
            assert_eq!(round.counts.keys().collect::<BTreeSet<_>>(), agents, "case {case}");
            assert!(round.counts.values().all(|&c| c == 1), "case {case}: {:?}", round.counts);
            assert_eq!(controller.image().adjacency, adjacency(&topology), "case {case}");
            assert!(controller.image().is_consistent());
        }
    });
}

// ---------------------------------------------------------------------------

/// Reference placement by exhaustive enumeration: for each microservice in
/// processing order, every agent is tried given the earlier choices; returns
/// the minimum feasible score (None when nothing fits).
fn oracle_min(
    topology: &Topology,
    chart: &ServiceChart,
    weights: &Weights,
    dist: &BTreeMap<(Label, Label), u64>,
    chosen: &BTreeMap<Label, Label>,
    microservice: &Label,
) -> Option<(f64, Label)> {
    let host_of = |data: &Label| topology.data.iter().find(|d| &d.name == data).unwrap().host.clone();
    let mut free: BTreeMap<&Label, u64> = topology.nodes.iter().map(|n| (&n.id, n.storage)).collect();
    for segment in &chart.segments {
        for (i, m) in segment.microservices.iter().enumerate().rev() {
            if &m.id == microservice {
                let prev = segment
                    .microservices
                    .get(i + 1)
                    .map_or_else(|| host_of(&segment.data), |next| chosen[&next.id].clone());
                let data = host_of(&segment.data);
                return topology
                    .nodes
                    .iter()
                    .filter(|n| n.compute >= m.compute_demand && free[&n.id] >= m.storage_demand)
                    .map(|n| {
                        let s = oracle_score(
                            weights,
                            dist[&(n.id.clone(), prev.clone())],
                            dist[&(n.id.clone(), data.clone())],
                            free[&n.id],
                            n.storage,
                            n.battery,
                        );
                        (s, n.id.clone())
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            }
            let at = &chosen[&m.id];
            *free.get_mut(at).unwrap() -= m.storage_demand;
        }
    }
    unreachable!("{microservice} not in chart")
}

/// Runs the oracle's own choices forward and names the first microservice
/// that fits nowhere, head included.
fn oracle_greedy_failure(
    topology: &Topology,
    chart: &ServiceChart,
    weights: &Weights,
    dist: &BTreeMap<(Label, Label), u64>,
) -> Option<Label> {
    let mut chosen = BTreeMap::new();
    for (m, seg) in placement_order(chart) {
        if seg.is_none() {
            let mut used: BTreeMap<&Label, u64> = BTreeMap::new();
            for (id, at) in &chosen {
                *used.entry(at).or_default() += chart.microservice(id).unwrap().storage_demand;
            }
            let fits = topology.nodes.iter().any(|n| {
                n.compute >= m.compute_demand && n.storage - used.get(&n.id).copied().unwrap_or(0) >= m.storage_demand
            });
            return (!fits).then(|| m.id.clone());
        }
        match oracle_min(topology, chart, weights, dist, &chosen, &m.id) {
            Some((_, agent)) => {
                chosen.insert(m.id.clone(), agent);
            }
            None => return Some(m.id.clone()),
        }
    }
    None
}

#[test]
fn criterion_6_placement_oracle() {
    criterion(6, "placement-oracle", || {
        let mut r = rng(6);
        let weight_sets = [
            Weights::default(),
            Weights { delay: 2.0, data: 0.5, store: 3.0, energy: 1.0 },
            Weights { delay: 0.0, data: 1.0, store: 0.0, energy: 5.0 },
        ];
        let mut placed = 0;
        for case in 0..300u64 {
            let n = rand::Rng::random_range(&mut r, 1..=5);
            let mut topology = random_topology(&mut r, n, Resources::TIGHT);
            let total = rand::Rng::random_range(&mut r, 2..=4);
            let chart = random_chart(&mut r, &mut topology, total, (0, 30));
            let weights = weight_sets[case as usize % weight_sets.len()];
            let image = image_of(&topology);
            let dist = all_pairs(&topology);
            let attach = label(ATTACH);
            let none = BTreeSet::new();

            let result = place_service(&chart, &image, &weights, Some(&attach), &attach, &none);
            let again = place_service(&chart, &image.clone(), &weights, Some(&attach), &attach, &none);
            assert_eq!(result, again, "case {case}: placement must be deterministic");

            let placement = match result {
                Ok(p) => p,
                Err(ControllerError::Unplaceable(stuck)) => {
                    assert_eq!(oracle_greedy_failure(&topology, &chart, &weights, &dist), Some(stuck), "case {case}");
                    continue;
                }
                Err(e) => panic!("case {case}: {e}"),
            };
            placed += 1;

            let tree = &placement.tree;
            for (m, seg) in placement_order(&chart) {
                if seg.is_none() {
                    continue;
                }
                let (best, _) = oracle_min(&topology, &chart, &weights, &dist, &tree.placement, &m.id)
                    .unwrap_or_else(|| panic!("case {case}: oracle found no agent for {}", m.id));
                let got = placement.scores[&m.id];
                assert!((got - best).abs() < 1e-9, "case {case} {}: greedy {got} oracle {best}", m.id);
            }

            // Head: nearest feasible agent to the requester.
            let head_agent = &tree.placement[&chart.head.id];
            let mut used: BTreeMap<&Label, u64> = BTreeMap::new();
            for m in chart.microservices().skip(1) {
                *used.entry(&tree.placement[&m.id]).or_default() += m.storage_demand;
            }
            let nearest = topology
                .nodes
                .iter()
                .filter(|n| {
                    n.compute >= chart.head.compute_demand
                        && n.storage - used.get(&n.id).copied().unwrap_or(0) >= chart.head.storage_demand
                })
                .map(|n| dist[&(attach.clone(), n.id.clone())])
                .min()
                .unwrap();
            assert_eq!(dist[&(attach.clone(), head_agent.clone())], nearest, "case {case}");

            // Capacity.
            let mut demand: BTreeMap<&Label, u64> = BTreeMap::new();
            for m in chart.microservices() {
                let at = &tree.placement[&m.id];
                let node = topology.nodes.iter().find(|n| &n.id == at).unwrap();
                assert!(node.compute >= m.compute_demand, "case {case}");
                *demand.entry(at).or_default() += m.storage_demand;
            }
            for (at, d) in demand {
                let node = topology.nodes.iter().find(|n| &n.id == at).unwrap();
                assert!(d <= node.storage, "case {case}: {at} holds {d} > {}", node.storage);
            }
        }
        assert!(placed >= 100, "only {placed} charts were placeable");
    });
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_7_caching() {
    criterion(7, "caching", || {
        let s = scenario("multimedia.scn");
        let out = run_scenario(&s, s.config.seed);
        let [first, second] = out.metrics.requests.as_slice() else {
            panic!("multimedia scenario has two requests");
        };
        assert_eq!(first.head, second.head);
        assert_eq!(first.status, RequestStatus::Completed);
        assert_eq!(second.status, RequestStatus::Completed);
        assert!(second.latency_ms.unwrap() < first.latency_ms.unwrap());

        let entry = second.agent.as_str();
        let beyond: Vec<_> = out
            .trace
            .iter()
            .filter(|r| r.time >= second.issued_at_ms)
            .filter(|r| r.kind == "send" && r.ptype == "interest" && r.name != "/sd-nsn/monitor")
            .collect();
        assert!(beyond.is_empty(), "{beyond:?}");
        let received_elsewhere = out
            .trace
            .iter()
            .filter(|r| r.time >= second.issued_at_ms && r.node != entry)
            .any(|r| r.kind == "recv" && r.ptype == "interest" && r.name != "/sd-nsn/monitor");
        assert!(!received_elsewhere);
    });
}

// ---------------------------------------------------------------------------

fn mask_nonces(text: &str) -> String {
    text.lines()
        .map(|line| {
            line.split('\t')
                .map(|field| {
                    field
                        .split(',')
                        .map(|kv| if kv.starts_with("nonce=") { "nonce=*" } else { kv })
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join("\t")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_8_determinism() {
    criterion(8, "determinism", || {
        for file in ["multimedia.scn", "line3.scn", "digital-twin.scn"] {
            let s = scenario(file);
            let a = run_scenario(&s, s.config.seed);
            let b = run_scenario(&s, s.config.seed);
            assert_eq!(a.digest(), b.digest(), "{file}");
            assert_eq!(simnet::render(&a.trace), simnet::render(&b.trace), "{file}");
            assert_eq!(a.metrics, b.metrics, "{file}");

            for other in [s.config.seed + 1, 0xdead_beef] {
                let c = run_scenario(&s, other);
                assert_ne!(a.digest(), c.digest(), "{file}: nonces should differ");
                assert_eq!(
                    mask_nonces(&simnet::render(&a.trace)),
                    mask_nonces(&simnet::render(&c.trace)),
                    "{file}: seed {other} changed more than nonces"
                );
            }
        }
    });
}
