//! Instance generation, evaluation and experiment sweeps.

mod eval;
pub mod gen;
mod sweep;

pub use eval::{evaluate, write_report, ReportRow, REPORT_HEADER};
pub use gen::{gen_campaign, gen_topical, gen_weighted_cascade, CampaignSpec};
pub use sweep::{
    load_config, run_sweep, ExperimentConfig, GeneratorKind, GeneratorSpec, InstancePaths,
    SweepOutcome,
};

use std::str::FromStr;
use std::time::Instant;

use crate::alloc::{greedy, myopic, myopic_plus, tirm_with, AllocatorResult, TirmConfig};
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::oracle::SpreadOracle;
use crate::sampling::SampleParams;

/// Environment variable that sets the worker count when no explicit value
/// is given.
pub const WORKERS_ENV: &str = "ADREGRET_WORKERS";

/// Explicit value, else the environment variable, else the configured
/// fallback; `None` means the rayon default.
pub fn worker_count(explicit: Option<usize>, configured: Option<usize>) -> Result<Option<usize>> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse::<usize>().map(Some).map_err(|_| {
            Error::invalid(format!(
                "{WORKERS_ENV} must be a positive integer, got '{v}'"
            ))
        }),
        _ => Ok(configured),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads (rayon default if `None`).
pub fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == Some(0) {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    Ok(b.build()?.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocatorKind {
    Tirm,
    GreedyMc,
    GreedyExact,
    Myopic,
    MyopicPlus,
}

impl AllocatorKind {
    pub const ALL: [AllocatorKind; 5] = [
        AllocatorKind::Tirm,
        AllocatorKind::GreedyMc,
        AllocatorKind::GreedyExact,
        AllocatorKind::Myopic,
        AllocatorKind::MyopicPlus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AllocatorKind::Tirm => "tirm",
            AllocatorKind::GreedyMc => "greedy-mc",
            AllocatorKind::GreedyExact => "greedy-exact",
            AllocatorKind::Myopic => "myopic",
            AllocatorKind::MyopicPlus => "myopic+",
        }
    }
}

impl FromStr for AllocatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "myopic-plus" && *k == AllocatorKind::MyopicPlus))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown allocator '{s}' (expected one of tirm, greedy-mc, greedy-exact, myopic, myopic+)"
                ))
            })
    }
}

impl std::fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Knobs shared by all allocators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocOptions {
    pub params: SampleParams,
    pub seed: u64,
    /// Monte-Carlo runs per Greedy evaluation.
    pub greedy_runs: u64,
    pub pilot_size: u64,
}

impl Default for AllocOptions {
    fn default() -> Self {
        Self {
            params: SampleParams::default(),
            seed: 0,
            greedy_runs: 1000,
            pilot_size: 10_000,
        }
    }
}

/// Runs one allocator and times it (allocation only, no I/O).
pub fn run_allocator(
    kind: AllocatorKind,
    instance: &Instance,
    opts: &AllocOptions,
) -> Result<(AllocatorResult, f64)> {
    let start = Instant::now();
    let result = match kind {
        AllocatorKind::Tirm => {
            let mut cfg = TirmConfig::new(opts.params, opts.seed);
            cfg.pilot_size = opts.pilot_size;
            tirm_with(instance, &cfg)?
        }
        AllocatorKind::GreedyMc => greedy(
            instance,
            SpreadOracle::MonteCarlo {
                runs: opts.greedy_runs,
                seed: opts.seed,
            },
        )?,
        AllocatorKind::GreedyExact => greedy(instance, SpreadOracle::Exact)?,
        AllocatorKind::Myopic => myopic(instance),
        AllocatorKind::MyopicPlus => myopic_plus(instance),
    };
    Ok((result, start.elapsed().as_secs_f64() * 1e3))
}
