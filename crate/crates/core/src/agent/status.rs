use crate::names::{FaceId, Label};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NeighborDelay {
    pub face: FaceId,
    pub neighbor: Label,
    /// Average one-way delay in milliseconds.
    pub delay: u64,
}

/// Status record an agent adds to monitor Data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentStatus {
    pub agent_id: Label,
    /// Percent, 0..=100.
    pub battery: u8,
    pub storage_free: u64,
    pub storage_total: u64,
    pub compute_free: u64,
    /// One entry per face leading to another agent.
    pub neighbor_delays: Vec<NeighborDelay>,
    /// Data names produced locally (sensors, cameras, ...).
    pub hosted_data: Vec<Label>,
    /// Deploy packets rejected for lack of storage since start.
    pub install_failures: u32,
}
