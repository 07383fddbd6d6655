use std::collections::BTreeMap;

use serde::Serialize;

use super::RequestSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestStatus {
    Pending,
    Completed,
    Failed,
}

impl RequestStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestStatus::Pending => "pending",
            RequestStatus::Completed => "completed",
            RequestStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequestOutcome {
    pub id: usize,
    pub agent: String,
    pub head: String,
    pub issued_at_ms: u64,
    pub expect_unknown: bool,
    pub status: RequestStatus,
    pub completed_at_ms: Option<u64>,
    pub latency_ms: Option<u64>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PacketCounts {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Run summary written by `run --metrics`. Keys are fixed for a given
/// `version`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Metrics {
    pub version: u32,
    pub seed: u64,
    pub requests: Vec<RequestOutcome>,
    pub packets: BTreeMap<&'static str, PacketCounts>,
    pub cache_hits: u64,
    /// Agent id to microservices installed there during the run.
    pub installs: BTreeMap<String, Vec<String>>,
    /// Head to (microservice to agent), latest placement.
    pub placements: BTreeMap<String, BTreeMap<String, String>>,
    pub drops: BTreeMap<String, u64>,
    pub monitor_rounds: u64,
    pub final_time_ms: u64,
    pub non_quiescent: bool,
    pub trace_digest: String,
}

impl Metrics {
    pub const VERSION: u32 = 1;

    pub fn new(seed: u64, requests: &[RequestSpec]) -> Self {
        Metrics {
            version: Self::VERSION,
            seed,
            requests: requests
                .iter()
                .enumerate()
                .map(|(id, r)| RequestOutcome {
                    id,
                    agent: r.agent.to_string(),
                    head: r.head.to_string(),
                    issued_at_ms: r.at,
                    expect_unknown: r.expect_unknown,
                    status: RequestStatus::Pending,
                    completed_at_ms: None,
                    latency_ms: None,
                    reason: None,
                })
                .collect(),
            packets: ["interest", "data", "deploy"]
                .into_iter()
                .map(|k| (k, PacketCounts::default()))
                .collect(),
            cache_hits: 0,
            installs: BTreeMap::new(),
            placements: BTreeMap::new(),
            drops: BTreeMap::new(),
            monitor_rounds: 0,
            final_time_ms: 0,
            non_quiescent: false,
            trace_digest: String::new(),
        }
    }

    pub fn all_resolved(&self) -> bool {
        self.requests
            .iter()
            .all(|r| r.status != RequestStatus::Pending)
    }

    pub(super) fn resolve(&mut self, id: usize, now: u64, result: Result<(), String>) {
        let Some(r) = self.requests.get_mut(id) else {
            return;
        };
        if r.status != RequestStatus::Pending {
            return;
        }
        r.completed_at_ms = Some(now);
        match result {
            Ok(()) => {
                r.status = RequestStatus::Completed;
                r.latency_ms = Some(now - r.issued_at_ms);
            }
            Err(reason) => {
                r.status = RequestStatus::Failed;
                r.reason = Some(reason);
            }
        }
    }

    pub(super) fn count_drop(&mut self, reason: &str) {
        *self.drops.entry(reason.to_string()).or_default() += 1;
    }
}
