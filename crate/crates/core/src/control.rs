//! Cascade controller layers other than tension allocation: the load-level
//! virtual force, per-UAV position control with attitude-reference
//! extraction, and the quaternion sliding-surface attitude law.
//!
//! All gain matrices are diagonal and stored as their diagonals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{uav_positions, uav_velocities, PlantParams, PlantState};
use crate::math::{e3, normalize, UnitQuat, UnitVec3, Vec3, EPS_NORM};

/// Guard on the square-root denominator of the zero-yaw attitude map.
pub const EPS_FLIP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ControlError {
    #[error("commanded force norm {0:e} is too small to define a thrust direction")]
    DegenerateThrust(f64),
    #[error("commanded thrust points downward; zero-yaw attitude is singular")]
    AttitudeSingularity { thrust: f64 },
}

/// Diagonal 3x3 gain. Deserializes from a scalar (isotropic) or a 3-array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "DiagRepr", into = "[f64; 3]")]
pub struct Diag3(pub Vec3);

#[derive(Deserialize)]
#[serde(untagged)]
enum DiagRepr {
    Scalar(f64),
    Diagonal([f64; 3]),
}

impl From<DiagRepr> for Diag3 {
    fn from(r: DiagRepr) -> Self {
        match r {
            DiagRepr::Scalar(k) => Diag3::splat(k),
            DiagRepr::Diagonal(d) => Diag3(Vec3::from(d)),
        }
    }
}

impl From<Diag3> for [f64; 3] {
    fn from(d: Diag3) -> Self {
        [d.0.x, d.0.y, d.0.z]
    }
}

impl Diag3 {
    pub fn splat(k: f64) -> Self {
        Diag3(Vec3::repeat(k))
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0.component_mul(v)
    }

    pub fn all_positive(&self) -> bool {
        self.0.iter().all(|&x| x.is_finite() && x > 0.0)
    }

    pub fn all_nonnegative(&self) -> bool {
        self.0.iter().all(|&x| x.is_finite() && x >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadGains {
    pub kp: Diag3,
    pub kd: Diag3,
    pub ki: Diag3,
}

impl Default for LoadGains {
    fn default() -> Self {
        Self {
            kp: Diag3::splat(8.0),
            kd: Diag3::splat(2.0),
            ki: Diag3::splat(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UavGains {
    pub kp: Diag3,
    pub kd: Diag3,
    pub ki: Diag3,
    /// Sliding-surface slope on the quaternion error.
    pub rho: Diag3,
    /// Linear damping on the sliding surface.
    pub kd_att: Diag3,
    pub beta: Diag3,
    pub gamma: Diag3,
    pub sat_limit: f64,
}

impl Default for UavGains {
    fn default() -> Self {
        // Attitude loop: with rho = 100 and (kd_att + beta*gamma)/J = 200 the
        // linearized error dynamics are critically damped at 100 rad/s,
        // about ten times the translational loop's natural frequency.
        let inertia = Vec3::new(2.1e-2, 1.87e-2, 3.97e-2);
        let beta = 0.02;
        let gamma = 1.0;
        Self {
            kp: Diag3::splat(40.0),
            kd: Diag3::splat(10.0),
            ki: Diag3::splat(2.0),
            rho: Diag3::splat(100.0),
            kd_att: Diag3(inertia * 200.0 - Vec3::repeat(beta * gamma)),
            beta: Diag3::splat(beta),
            gamma: Diag3::splat(gamma),
            sat_limit: 1.0,
        }
    }
}

/// Loop-level settings that are not gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopSettings {
    /// Per-axis bound on `ki * integral`, in newtons.
    pub integral_limit: f64,
    /// Cutoff of the one-pole filter on the differentiated thrust direction.
    pub rate_filter_hz: f64,
}

impl Default for LoopSettings {
    fn default() -> Self {
        Self {
            integral_limit: 1.0,
            rate_filter_hz: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub pos: Vec3,
    pub vel: Vec3,
    pub acc: Vec3,
}

impl ReferencePoint {
    pub fn hold(pos: Vec3) -> Self {
        Self {
            pos,
            vel: Vec3::zeros(),
            acc: Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub thrust: f64,
    pub attitude_ref: UnitQuat,
    pub rate_ref: Vec3,
    pub torque: Vec3,
}

/// Trapezoid-rule integrator with a per-axis clamp.
#[derive(Debug, Clone, PartialEq)]
struct ClampedIntegral {
    value: Vec3,
    last: Option<Vec3>,
}

impl ClampedIntegral {
    fn new() -> Self {
        Self {
            value: Vec3::zeros(),
            last: None,
        }
    }

    fn advance(&mut self, err: Vec3, dt: f64, ki: &Diag3, limit: f64) {
        let prev = self.last.unwrap_or(err);
        self.value += (prev + err) * (0.5 * dt);
        self.last = Some(err);
        for k in 0..3 {
            let bound = if ki.0[k] > 0.0 { limit / ki.0[k] } else { 0.0 };
            self.value[k] = self.value[k].clamp(-bound, bound);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct UavLoopState {
    integral: ClampedIntegral,
    prev_dir: Option<UnitVec3>,
    dir_rate: Vec3,
    prev_attitude_ref: Option<UnitQuat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    settings: LoopSettings,
    load_integral: ClampedIntegral,
    uavs: Vec<UavLoopState>,
}

impl ControllerState {
    pub fn new(n: usize, settings: LoopSettings) -> Self {
        Self {
            settings,
            load_integral: ClampedIntegral::new(),
            uavs: (0..n)
                .map(|_| UavLoopState {
                    integral: ClampedIntegral::new(),
                    prev_dir: None,
                    dir_rate: Vec3::zeros(),
                    prev_attitude_ref: None,
                })
                .collect(),
        }
    }

    pub fn load_integral(&self) -> Vec3 {
        self.load_integral.value
    }

    pub fn uav_integral(&self, i: usize) -> Vec3 {
        self.uavs[i].integral.value
    }

    pub fn previous_attitude_ref(&self, i: usize) -> Option<UnitQuat> {
        self.uavs[i].prev_attitude_ref
    }
}

/// Virtual force the cable ensemble must apply to the load, expressed as
/// `u_L = -sum T_i alpha_i` so that the allocator's balance constraint reads
/// `sum T_i alpha_i = -u_L`.
///
/// The feedback terms enter with a positive sign: with the load-to-UAV cable
/// convention the load obeys `m_L a = -m_L g e3 - u_L`, so this is the sign
/// that makes the tracking error decay.
pub fn load_control(
    gains: &LoadGains,
    load_mass: f64,
    gravity: f64,
    s: &PlantState,
    r: &ReferencePoint,
    cs: &mut ControllerState,
    dt: f64,
) -> Vec3 {
    let err = s.load_pos - r.pos;
    let err_rate = s.load_vel - r.vel;
    let limit = cs.settings.integral_limit;
    cs.load_integral.advance(err, dt, &gains.ki, limit);
    -(e3() * gravity + r.acc) * load_mass
        + gains.kp.apply(&err)
        + gains.kd.apply(&err_rate)
        + gains.ki.apply(&cs.load_integral.value)
}

/// Zero-yaw attitude whose body z axis is `dir`.
pub fn attitude_from_thrust_dir(dir: &UnitVec3) -> Option<UnitQuat> {
    let (u1, u2, u3) = (dir.x, dir.y, dir.z);
    if u3 <= -1.0 + EPS_FLIP {
        return None;
    }
    let root = (2.0 * u3 + 2.0).sqrt();
    Some(UnitQuat::new_normalize(0.5 * root, Vec3::new(-u2 / root, u1 / root, 0.0)))
}

/// Position loop for UAV `i`: tracks `x_Ld + L_i alpha_id` and turns the
/// resulting force into a thrust magnitude, a zero-yaw attitude reference and
/// a feed-forward body rate. The returned command has zero torque.
#[allow(clippy::too_many_arguments)]
pub fn position_control(
    gains: &UavGains,
    plant: &PlantParams,
    tension: f64,
    direction: &UnitVec3,
    s: &PlantState,
    r: &ReferencePoint,
    cs: &mut ControllerState,
    i: usize,
    dt: f64,
) -> Result<ControlCommand, ControlError> {
    let m = plant.uav_masses[i];
    let target = r.pos + **direction * plant.cable_lengths[i];
    let pos = uav_positions(plant, s)[i];
    let vel = uav_velocities(plant, s)[i];
    let err = pos - target;
    let err_rate = vel - r.vel;

    let limit = cs.settings.integral_limit;
    let cutoff = cs.settings.rate_filter_hz;
    let st = &mut cs.uavs[i];
    st.integral.advance(err, dt, &gains.ki, limit);

    let force = (e3() * plant.gravity + r.acc) * m + **direction * tension
        - gains.kp.apply(&err)
        - gains.kd.apply(&err_rate)
        - gains.ki.apply(&st.integral.value);
    let thrust = force.norm();
    let dir = normalize(force).map_err(|_| ControlError::DegenerateThrust(thrust))?;
    debug_assert!(thrust > EPS_NORM);

    let raw_rate = match st.prev_dir {
        Some(prev) => (*dir - *prev) / dt,
        None => Vec3::zeros(),
    };
    let tc = 1.0 / (2.0 * std::f64::consts::PI * cutoff);
    st.dir_rate += (raw_rate - st.dir_rate) * (dt / (dt + tc));
    st.prev_dir = Some(dir);

    let mut attitude_ref = attitude_from_thrust_dir(&dir).ok_or(ControlError::AttitudeSingularity { thrust })?;
    if let Some(prev) = st.prev_attitude_ref {
        if attitude_ref.dot(&prev) < 0.0 {
            attitude_ref = attitude_ref.negated();
        }
    }
    st.prev_attitude_ref = Some(attitude_ref);

    let world_rate = dir.cross(&st.dir_rate);
    let rate_ref = attitude_ref.conjugate().rotate(&world_rate);
    Ok(ControlCommand {
        thrust,
        attitude_ref,
        rate_ref,
        torque: Vec3::zeros(),
    })
}

/// Records `q` as the held attitude reference for UAV `i` (used by callers
/// that fall back to the previous command).
pub fn hold_attitude_ref(cs: &mut ControllerState, i: usize, q: UnitQuat) {
    cs.uavs[i].prev_attitude_ref = Some(q);
}

fn sat(v: &Vec3, limit: f64) -> Vec3 {
    v.map(|x| x.clamp(-limit, limit))
}

/// Sliding-surface attitude law `tau = -Kd s - beta sat(gamma s)` with
/// `s = Omega_e + rho q_e`.
pub fn attitude_control(gains: &UavGains, attitude: &UnitQuat, body_rate: &Vec3, cmd: &ControlCommand) -> Vec3 {
    let mut q_err = cmd.attitude_ref.conjugate() * *attitude;
    if q_err.eta() < 0.0 {
        q_err = q_err.negated();
    }
    let rate_err = body_rate - cmd.rate_ref;
    let surface = rate_err + gains.rho.apply(&q_err.eps());
    -gains.kd_att.apply(&surface) - gains.beta.apply(&sat(&gains.gamma.apply(&surface), gains.sat_limit))
}
