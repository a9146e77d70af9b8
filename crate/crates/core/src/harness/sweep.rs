use serde::{Deserialize, Serialize};

use super::{run_simulation, HarnessError, MetricsReport};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub mu: f64,
    pub metrics: MetricsReport,
}

/// One full run per `mu`, otherwise identical configs. Runs execute on
/// separate threads; results come back in the order of `mus`.
pub fn sweep_mu(cfg: &ScenarioConfig, mus: &[f64]) -> Result<Vec<SweepEntry>, HarnessError> {
    if mus.is_empty() {
        return Err(HarnessError::InvalidArgument("mu list is empty".into()));
    }
    let mut configs = Vec::with_capacity(mus.len());
    for &mu in mus {
        let mut c = cfg.clone();
        c.alloc.mu = mu;
        c.validate().map_err(|e| HarnessError::Sweep { mu, source: Box::new(e.into()) })?;
        configs.push(c);
    }
    let results: Vec<Result<MetricsReport, HarnessError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| scope.spawn(move || run_simulation(c).map(|(_, m)| m)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    mus.iter()
        .zip(results)
        .map(|(&mu, r)| {
            r.map(|metrics| SweepEntry { mu, metrics })
                .map_err(|e| HarnessError::Sweep { mu, source: Box::new(e) })
        })
        .collect()
}
