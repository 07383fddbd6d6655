//! Command-line front end: `validate`, `run` and `sweep`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::scenario::{Scenario, ScenarioError};
use crate::simnet::{render, Simulation};
use crate::sweep;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "sdnsn", version, about = "Named-service network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and list every violation.
    Validate { path: PathBuf },
    /// Simulate a scenario and print the trace digest.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Exit nonzero when the run hits the horizon before quiescence.
        #[arg(long)]
        strict: bool,
    },
    /// Run a scenario once per seed in `first..first+count`.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        first: u64,
        #[arg(long, default_value_t = 16)]
        count: u64,
        #[arg(long)]
        sequential: bool,
    },
}

fn load(path: &Path, err: &mut dyn Write) -> Result<Scenario, u8> {
    Scenario::load(path).map_err(|e| {
        let _ = writeln!(err, "{}: {e}", path.display());
        match e {
            ScenarioError::Io { .. } => EXIT_RUNTIME,
            ScenarioError::Parse(_) | ScenarioError::Invalid(_) => EXIT_INVALID,
        }
    })
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match load(path, err) {
        Ok(s) => {
            let _ = writeln!(
                out,
                "{}: valid ({} agents, {} links, {} charts, {} requests)",
                path.display(),
                s.topology.nodes.len(),
                s.topology.links.len(),
                s.charts.len(),
                s.requests.len()
            );
            EXIT_OK
        }
        Err(code) => code,
    }
}

pub struct RunArgs<'a> {
    pub scenario: &'a Path,
    pub seed: Option<u64>,
    pub trace: Option<&'a Path>,
    pub metrics: Option<&'a Path>,
    pub strict: bool,
}

pub fn cmd_run(args: RunArgs<'_>, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let mut scenario = match load(args.scenario, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Some(seed) = args.seed {
        scenario.config.seed = seed;
    }
    let mut sim = match Simulation::new(&scenario.topology, &scenario.charts, &scenario.requests, scenario.config.clone()) {
        Ok(sim) => sim,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let result = sim.run();
    if let Some(path) = args.trace {
        if let Err(e) = std::fs::write(path, render(&result.trace)) {
            let _ = writeln!(err, "error: writing {}: {e}", path.display());
            return EXIT_RUNTIME;
        }
    }
    if let Some(path) = args.metrics {
        let json = serde_json::to_string_pretty(&result.metrics).expect("metrics serialize");
        if let Err(e) = std::fs::write(path, json + "\n") {
            let _ = writeln!(err, "error: writing {}: {e}", path.display());
            return EXIT_RUNTIME;
        }
    }
    let m = &result.metrics;
    for r in &m.requests {
        let detail = match (r.latency_ms, &r.reason) {
            (Some(l), _) => format!("{l}ms"),
            (None, Some(reason)) => reason.clone(),
            (None, None) => "-".to_string(),
        };
        let _ = writeln!(out, "request {} {} at {}: {} {detail}", r.id, r.head, r.agent, r.status.as_str());
    }
    let _ = writeln!(
        out,
        "packets interest={} data={} deploy={} cache_hits={} end={}ms",
        m.packets["interest"].sent, m.packets["data"].sent, m.packets["deploy"].sent, m.cache_hits, m.final_time_ms
    );
    let _ = writeln!(out, "digest {}", m.trace_digest);
    if m.non_quiescent {
        let _ = writeln!(err, "warning: horizon reached before quiescence");
        if args.strict {
            return EXIT_RUNTIME;
        }
    }
    EXIT_OK
}

pub fn cmd_sweep(path: &Path, first: u64, count: u64, sequential: bool, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let scenario = match load(path, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let seeds: Vec<u64> = (first..first.saturating_add(count)).collect();
    let results = if sequential {
        sweep::run_batch_sequential(&scenario, &seeds)
    } else {
        sweep::run_batch(&scenario, &seeds)
    };
    match results {
        Ok(results) => {
            for r in results {
                let _ = writeln!(
                    out,
                    "seed {} digest {:016x} completed {} failed {} latency {}ms",
                    r.seed, r.digest, r.completed, r.failed, r.total_latency_ms
                );
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match cli.command {
        Command::Validate { path } => cmd_validate(&path, out, err),
        Command::Run { scenario, seed, trace, metrics, strict } => cmd_run(
            RunArgs {
                scenario: &scenario,
                seed,
                trace: trace.as_deref(),
                metrics: metrics.as_deref(),
                strict,
            },
            out,
            err,
        ),
        Command::Sweep { scenario, first, count, sequential } => cmd_sweep(&scenario, first, count, sequential, out, err),
    }
}
