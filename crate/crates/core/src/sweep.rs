//! Batch runs of one scenario over many seeds. Each run is an independent
//! single-threaded simulation; with the `parallel` feature the batch is
//! spread over a rayon pool.

use crate::scenario::Scenario;
use crate::simnet::{self, RequestStatus, SimError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepResult {
    pub seed: u64,
    pub digest: u64,
    pub completed: usize,
    pub failed: usize,
    pub total_latency_ms: u64,
    pub non_quiescent: bool,
}

pub fn run_one(scenario: &Scenario, seed: u64) -> Result<SweepResult, SimError> {
    let mut config = scenario.config.clone();
    config.seed = seed;
    let out = simnet::run(&scenario.topology, &scenario.charts, &scenario.requests, config)?;
    let count = |s| out.metrics.requests.iter().filter(|r| r.status == s).count();
    Ok(SweepResult {
        seed,
        digest: out.digest(),
        completed: count(RequestStatus::Completed),
        failed: count(RequestStatus::Failed),
        total_latency_ms: out.metrics.requests.iter().filter_map(|r| r.latency_ms).sum(),
        non_quiescent: out.metrics.non_quiescent,
    })
}

pub fn run_batch_sequential(scenario: &Scenario, seeds: &[u64]) -> Result<Vec<SweepResult>, SimError> {
    seeds.iter().map(|&s| run_one(scenario, s)).collect()
}

#[cfg(feature = "parallel")]
pub fn run_batch(scenario: &Scenario, seeds: &[u64]) -> Result<Vec<SweepResult>, SimError> {
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| run_one(scenario, s)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch(scenario: &Scenario, seeds: &[u64]) -> Result<Vec<SweepResult>, SimError> {
    run_batch_sequential(scenario, seeds)
}
