use serde::{Deserialize, Serialize};

use super::{HarnessError, TimeSeriesRecord};
use crate::allocator::SolveStatus;

/// Start of the window used for steady-state tension tracking (s).
pub const STEADY_STATE_START: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ticks: usize,
    /// RMS of `|e_L|` over all ticks (m).
    pub rms_error: f64,
    pub max_error: f64,
    /// Smallest angle between any two actual cables over the run (deg).
    pub min_pairwise_angle: f64,
    /// Integrated tension cost `int sum |T_i| dt` (N s).
    pub j_t: f64,
    pub tension_mean: Vec<f64>,
    pub tension_max: Vec<f64>,
    pub peak_total_tension: f64,
    pub mean_total_tension: f64,
    /// `peak_total_tension / mean_total_tension`.
    pub peak_to_mean_ratio: f64,
    /// Time average of `max_i T_i - min_i T_i` (N).
    pub mean_tension_spread: f64,
    /// Per cable, mean `|T_actual - T_desired|` after `STEADY_STATE_START`
    /// divided by the mean actual tension over the same window.
    pub tension_tracking_ratio: Vec<f64>,
    pub solver_time_mean: f64,
    pub solver_time_p99: f64,
    pub solver_time_max: f64,
    pub mean_iterations: f64,
    pub fallback_count: usize,
    /// Number of times a cable entered the slack state.
    pub slack_events: usize,
    pub max_balance_residual: f64,
}

/// Nearest-rank percentile `p` in (0, 100] of unsorted data.
pub fn nearest_rank(data: &[f64], p: f64) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Trapezoid rule over the record times.
fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]))
        .sum()
}

pub fn compute_metrics(records: &[TimeSeriesRecord]) -> Result<MetricsReport, HarnessError> {
    let first = records.first().ok_or(HarnessError::EmptyRun)?;
    let n = first.n();

    let errors: Vec<f64> = records.iter().map(|r| r.e_l.norm()).collect();
    let rms_error = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    let max_error = errors.iter().cloned().fold(0.0, f64::max);
    let min_pairwise_angle = records.iter().map(|r| r.min_angle()).fold(180.0, f64::min);

    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let totals: Vec<f64> = records.iter().map(|r| r.tension_actual.iter().map(|t| t.abs()).sum()).collect();
    let j_t = trapezoid(&times, &totals);

    let tension_mean: Vec<f64> = (0..n).map(|i| mean(records.iter().map(|r| r.tension_actual[i]))).collect();
    let tension_max: Vec<f64> = (0..n)
        .map(|i| records.iter().map(|r| r.tension_actual[i]).fold(f64::MIN, f64::max))
        .collect();
    let peak_total_tension = totals.iter().cloned().fold(0.0, f64::max);
    let mean_total_tension = mean(totals.iter().cloned());
    let peak_to_mean_ratio = peak_total_tension / mean_total_tension;
    let mean_tension_spread = mean(records.iter().map(|r| {
        let hi = r.tension_actual.iter().cloned().fold(f64::MIN, f64::max);
        let lo = r.tension_actual.iter().cloned().fold(f64::MAX, f64::min);
        hi - lo
    }));

    let steady: Vec<&TimeSeriesRecord> = records.iter().filter(|r| r.t >= STEADY_STATE_START).collect();
    let tension_tracking_ratio = (0..n)
        .map(|i| {
            let gap = mean(steady.iter().map(|r| (r.tension_actual[i] - r.tension_desired[i]).abs()));
            let level = mean(steady.iter().map(|r| r.tension_actual[i].abs()));
            if steady.is_empty() {
                0.0
            } else {
                gap / level
            }
        })
        .collect();

    let solve_times: Vec<f64> = records.iter().map(|r| r.solve_time).collect();
    let solver_time_mean = mean(solve_times.iter().cloned());
    let solver_time_p99 = nearest_rank(&solve_times, 99.0);
    let solver_time_max = solve_times.iter().cloned().fold(0.0, f64::max);
    let mean_iterations = mean(records.iter().map(|r| r.iterations as f64));
    let fallback_count = records.iter().filter(|r| r.status == SolveStatus::Fallback).count();

    let mut slack_events = 0;
    let mut prev = vec![false; n];
    for r in records {
        for i in 0..n {
            if r.slack[i] && !prev[i] {
                slack_events += 1;
            }
            prev[i] = r.slack[i];
        }
    }

    Ok(MetricsReport {
        ticks: records.len(),
        rms_error,
        max_error,
        min_pairwise_angle,
        j_t,
        tension_mean,
        tension_max,
        peak_total_tension,
        mean_total_tension,
        peak_to_mean_ratio,
        mean_tension_spread,
        tension_tracking_ratio,
        solver_time_mean,
        solver_time_p99,
        solver_time_max,
        mean_iterations,
        fallback_count,
        slack_events,
        max_balance_residual: records.iter().map(|r| r.balance_residual).fold(0.0, f64::max),
    })
}
