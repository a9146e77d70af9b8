//! Cooperative cable-suspended load transport by a team of quadrotors.
//!
//! - [`math`]: vectors, unit vectors, Hamilton quaternions
//! - [`dynamics`]: rigid-cable load/UAV plant and its RK4 integrator
//! - [`control`]: load, position and attitude control layers
//! - [`allocator`]: SQP tension allocation and the fixed-cone baseline
//! - [`scenario`]: configuration and reference trajectories
//! - [`harness`]: closed-loop runs, metrics, sweeps, benchmarks, outputs

pub mod allocator;
pub mod control;
pub mod dynamics;
pub mod math;
pub mod scenario;
pub mod harness;
