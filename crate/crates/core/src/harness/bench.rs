use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{nearest_rank, simulate, HarnessError};
use crate::allocator::{AllocMethod, SolveStatus, TensionAllocator};
use crate::scenario::ScenarioConfig;

pub const MIN_BENCH_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub samples: usize,
    /// Seconds per allocator cycle.
    pub mean: f64,
    pub p99: f64,
    pub max: f64,
    pub mean_iterations: f64,
    pub converged_fraction: f64,
}

/// Records `samples` ticks of load-controller demand from a closed-loop run
/// of `cfg`, then replays them through a warm-started SQP allocator on the
/// calling thread, timing each cycle.
pub fn bench_allocator(cfg: &ScenarioConfig, samples: usize) -> Result<BenchSummary, HarnessError> {
    if samples < MIN_BENCH_SAMPLES {
        return Err(HarnessError::InvalidArgument(format!(
            "bench needs at least {MIN_BENCH_SAMPLES} samples, got {samples}"
        )));
    }
    let mut run = cfg.clone();
    run.duration = samples as f64 * cfg.dt;
    let trace = simulate(&run)?;

    let mut alloc = TensionAllocator::new(cfg.n(), cfg.alloc.mu, AllocMethod::Sqp(cfg.alloc.sqp.clone()));
    let mut times = Vec::with_capacity(samples);
    let mut iterations = 0usize;
    let mut converged = 0usize;
    for (tick, u) in trace.demands.iter().take(samples).enumerate() {
        let start = Instant::now();
        let sol = alloc.allocate(u).map_err(|source| HarnessError::Alloc { tick, source })?;
        times.push(start.elapsed().as_secs_f64());
        iterations += sol.iterations;
        converged += usize::from(sol.status == SolveStatus::Converged);
    }
    let count = times.len() as f64;
    Ok(BenchSummary {
        samples: times.len(),
        mean: times.iter().sum::<f64>() / count,
        p99: nearest_rank(&times, 99.0),
        max: times.iter().cloned().fold(0.0, f64::max),
        mean_iterations: iterations as f64 / count,
        converged_fraction: converged as f64 / count,
    })
}
