use serde::Serialize;

use super::{compute_metrics, HarnessError, MetricsReport};
use crate::allocator::{initial_guess, AllocError, SolveStatus, TensionAllocator};
use crate::control::{
    attitude_control, hold_attitude_ref, load_control, position_control, ControlCommand, ControllerState,
    ReferencePoint,
};
use crate::dynamics::{constrained_accelerations, momentum_residual, rk4_step, PlantInputs, PlantParams, PlantState};
use crate::math::{UnitQuat, Vec3};
use crate::scenario::ScenarioConfig;

/// One control tick. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub x_l: Vec3,
    pub x_ld: Vec3,
    pub e_l: Vec3,
    pub tension_actual: Vec<f64>,
    pub tension_desired: Vec<f64>,
    /// Angles between actual cable directions, pairs `(i, j)` with `i < j`
    /// in lexicographic order (deg).
    pub pair_angles: Vec<f64>,
    /// Commanded thrust per UAV (N).
    pub thrusts: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub solve_time: f64,
    pub slack: Vec<bool>,
    /// Norm of the whole-system momentum balance error (N).
    pub balance_residual: f64,
}

impl TimeSeriesRecord {
    pub fn n(&self) -> usize {
        self.tension_actual.len()
    }

    pub fn min_angle(&self) -> f64 {
        self.pair_angles.iter().cloned().fold(180.0, f64::min)
    }
}

/// Records plus the load-controller demand at each tick, for replays.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub records: Vec<TimeSeriesRecord>,
    pub demands: Vec<Vec3>,
}

fn pair_angles(dirs: &[crate::math::UnitVec3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(dirs.len() * dirs.len().saturating_sub(1) / 2);
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            out.push(dirs[i].dot(&dirs[j]).clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    out
}

/// Load at the reference start moving with the reference, cables in the
/// cold-start cone around the feed-forward demand, UAVs level, cable and
/// body rates zero.
pub fn initial_state(cfg: &ScenarioConfig) -> Result<PlantState, HarnessError> {
    let r = cfg.trajectory().at(0.0);
    let g = cfg.plant.gravity;
    let u_ff = -(Vec3::z() * g + r.acc) * cfg.plant.load_mass;
    let cone = initial_guess(&u_ff, cfg.n(), cfg.alloc.sqp.cold_start_half_angle_deg)
        .map_err(|source| HarnessError::Alloc { tick: 0, source })?;
    let mut s = PlantState::at_rest(r.pos, cone.directions);
    s.load_vel = r.vel;
    Ok(s)
}

fn hover_command(plant: &PlantParams, i: usize, attitude_ref: UnitQuat) -> ControlCommand {
    ControlCommand {
        thrust: plant.uav_masses[i] * plant.gravity,
        attitude_ref,
        rate_ref: Vec3::zeros(),
        torque: Vec3::zeros(),
    }
}

/// Runs the closed loop from `initial_state`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimTrace, HarnessError> {
    let s0 = initial_state(cfg)?;
    simulate_from(cfg, s0)
}

/// Runs the closed loop from an explicit initial state. One record per tick,
/// taken before the plant is advanced.
pub fn simulate_from(cfg: &ScenarioConfig, mut s: PlantState) -> Result<SimTrace, HarnessError> {
    let plant = cfg.plant.params();
    let n = plant.n();
    let dt = cfg.dt;
    let steps = cfg.steps();
    let traj = cfg.trajectory();
    let gains = &cfg.gains;
    let mut cs = ControllerState::new(n, gains.loop_settings.clone());
    let mut alloc = TensionAllocator::new(n, cfg.alloc.mu, cfg.alloc.method());
    let mut last_cmds: Vec<Option<ControlCommand>> = vec![None; n];

    let mut records = Vec::with_capacity(steps);
    let mut demands = Vec::with_capacity(steps);
    for tick in 0..steps {
        let t = tick as f64 * dt;
        let r: ReferencePoint = traj.at(t);
        let u_l = load_control(&gains.load, plant.load_mass, plant.gravity, &s, &r, &mut cs, dt);

        let start = std::time::Instant::now();
        let sol = match alloc.allocate(&u_l) {
            Ok(sol) => sol,
            Err(AllocError::Math(_)) if alloc.previous().is_some() => {
                // Zero demand: keep the previous allocation.
                let mut prev = alloc.previous().cloned().expect("checked");
                prev.status = SolveStatus::Fallback;
                prev
            }
            Err(source) => return Err(HarnessError::Alloc { tick, source }),
        };
        let solve_time = start.elapsed().as_secs_f64();

        let mut inputs = PlantInputs::zeros(n);
        for i in 0..n {
            let cmd = match position_control(
                &gains.uav,
                &plant,
                sol.tensions[i],
                &sol.directions[i],
                &s,
                &r,
                &mut cs,
                i,
                dt,
            ) {
                Ok(cmd) => cmd,
                Err(_) => {
                    let held = last_cmds[i]
                        .map(|c| c.attitude_ref)
                        .or_else(|| cs.previous_attitude_ref(i))
                        .unwrap_or_else(UnitQuat::identity);
                    hold_attitude_ref(&mut cs, i, held);
                    last_cmds[i].unwrap_or_else(|| hover_command(&plant, i, held))
                }
            };
            inputs.thrusts[i] = cmd.thrust;
            inputs.torques[i] = attitude_control(&gains.uav, &s.attitudes[i], &s.body_rates[i], &cmd);
            last_cmds[i] = Some(cmd);
        }

        let acc = constrained_accelerations(&plant, &s, &inputs).map_err(|source| HarnessError::Dynamics { tick, source })?;
        records.push(TimeSeriesRecord {
            t,
            x_l: s.load_pos,
            x_ld: r.pos,
            e_l: s.load_pos - r.pos,
            tension_actual: acc.forces.tensions.clone(),
            tension_desired: sol.tensions.clone(),
            pair_angles: pair_angles(&s.cable_dirs),
            thrusts: inputs.thrusts.clone(),
            iterations: sol.iterations,
            status: sol.status,
            solve_time,
            slack: acc.forces.slack.clone(),
            balance_residual: momentum_residual(&plant, &s, &inputs, &acc).norm(),
        });
        demands.push(u_l);

        s = match rk4_step(&plant, &s, &inputs, dt) {
            Ok(next) if next.is_finite() => next,
            Ok(_) | Err(crate::dynamics::DynamicsError::SingularMassMatrix) => {
                return Err(HarnessError::NonFinite { tick, time: t })
            }
            Err(source) => return Err(HarnessError::Dynamics { tick, source }),
        };
    }
    Ok(SimTrace { records, demands })
}

/// Full run plus its metrics.
pub fn run_simulation(cfg: &ScenarioConfig) -> Result<(Vec<TimeSeriesRecord>, MetricsReport), HarnessError> {
    let trace = simulate(cfg)?;
    let report = compute_metrics(&trace.records)?;
    Ok((trace.records, report))
}
