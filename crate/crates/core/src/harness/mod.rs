//! Closed-loop runs and everything around them: metrics, μ sweeps, solver
//! benchmarks and file outputs.

mod bench;
mod metrics;
pub mod output;
pub mod plot;
mod sim;
mod sweep;

use thiserror::Error;

use crate::allocator::AllocError;
use crate::dynamics::DynamicsError;
use crate::scenario::ConfigError;

pub use bench::{bench_allocator, BenchSummary, MIN_BENCH_SAMPLES};
pub use metrics::{compute_metrics, nearest_rank, MetricsReport, STEADY_STATE_START};
pub use sim::{initial_state, run_simulation, simulate, simulate_from, SimTrace, TimeSeriesRecord};
pub use sweep::{sweep_mu, SweepEntry};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("allocator failed at tick {tick}: {source}")]
    Alloc {
        tick: usize,
        #[source]
        source: AllocError,
    },
    #[error("plant evaluation failed at tick {tick}: {source}")]
    Dynamics {
        tick: usize,
        #[source]
        source: DynamicsError,
    },
    #[error("plant state became non-finite at tick {tick} (t = {time:.3} s)")]
    NonFinite { tick: usize, time: f64 },
    #[error("no records to summarize")]
    EmptyRun,
    #[error("run with mu = {mu} failed: {source}")]
    Sweep {
        mu: f64,
        #[source]
        source: Box<HarnessError>,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plot error: {0}")]
    Plot(String),
}
