//! Rigid-cable plant: a point-mass load hanging from `n` quadrotors.
//!
//! Generalized coordinates are the load position and velocity, each cable's
//! unit direction `alpha_i` (pointing from the load up to UAV `i`) with its
//! angular velocity `omega_c,i` (`alpha_dot = omega_c x alpha`), and each
//! UAV's attitude and body rate. UAV positions are derived from the cable
//! constraint `x_i = x_L + L_i alpha_i`, so cable length is exact by
//! construction and tension is the constraint force of the link.
//!
//! Sign convention: a positive tension pulls the load along `+alpha_i` and the
//! UAV along `-alpha_i`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{e3, hamilton, Mat3, UnitQuat, UnitVec3, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("load mass matrix is numerically singular")]
    SingularMassMatrix,
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} entries for {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub load_mass: f64,
    pub uav_masses: Vec<f64>,
    /// Diagonal of each UAV inertia matrix.
    pub inertias: Vec<Vec3>,
    pub cable_lengths: Vec<f64>,
    pub gravity: f64,
}

impl PlantParams {
    /// `n` identical vehicles with the given per-vehicle values.
    pub fn uniform(n: usize, load_mass: f64, uav_mass: f64, inertia: Vec3, cable_length: f64) -> Self {
        Self {
            load_mass,
            uav_masses: vec![uav_mass; n],
            inertias: vec![inertia; n],
            cable_lengths: vec![cable_length; n],
            gravity: 9.81,
        }
    }

    /// Four 0.5 kg quadrotors, 0.225 kg load, 1 m cables.
    pub fn four_quad_default() -> Self {
        Self::uniform(4, 0.225, 0.5, Vec3::new(2.1e-2, 1.87e-2, 3.97e-2), 1.0)
    }

    pub fn n(&self) -> usize {
        self.uav_masses.len()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let n = self.n();
        if n == 0 {
            return Err(DynamicsError::InvalidParams("at least one UAV is required".into()));
        }
        for (what, got) in [("inertias", self.inertias.len()), ("cable_lengths", self.cable_lengths.len())] {
            if got != n {
                return Err(DynamicsError::DimensionMismatch { what, expected: n, got });
            }
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.load_mass) {
            return Err(DynamicsError::InvalidParams("load_mass must be > 0".into()));
        }
        if !positive(self.gravity) {
            return Err(DynamicsError::InvalidParams("gravity must be > 0".into()));
        }
        if !self.uav_masses.iter().all(|&m| positive(m)) {
            return Err(DynamicsError::InvalidParams("uav_masses must be > 0".into()));
        }
        if !self.cable_lengths.iter().all(|&l| positive(l)) {
            return Err(DynamicsError::InvalidParams("cable_lengths must be > 0".into()));
        }
        if !self.inertias.iter().all(|j| j.iter().all(|&x| positive(x))) {
            return Err(DynamicsError::InvalidParams("inertia entries must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub load_pos: Vec3,
    pub load_vel: Vec3,
    /// Load-to-UAV cable directions.
    pub cable_dirs: Vec<UnitVec3>,
    /// Cable angular velocities, kept orthogonal to the matching direction.
    pub cable_rates: Vec<Vec3>,
    pub attitudes: Vec<UnitQuat>,
    pub body_rates: Vec<Vec3>,
}

impl PlantState {
    /// Load at `load_pos`, cables along `dirs`, level UAVs, everything at rest.
    pub fn at_rest(load_pos: Vec3, dirs: Vec<UnitVec3>) -> Self {
        let n = dirs.len();
        Self {
            load_pos,
            load_vel: Vec3::zeros(),
            cable_dirs: dirs,
            cable_rates: vec![Vec3::zeros(); n],
            attitudes: vec![UnitQuat::identity(); n],
            body_rates: vec![Vec3::zeros(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.cable_dirs.len()
    }

    pub fn is_finite(&self) -> bool {
        let v = |x: &Vec3| x.iter().all(|c| c.is_finite());
        v(&self.load_pos)
            && v(&self.load_vel)
            && self.cable_dirs.iter().all(|d| v(d))
            && self.cable_rates.iter().all(v)
            && self.attitudes.iter().all(|q| q.coords().iter().all(|c| c.is_finite()))
            && self.body_rates.iter().all(v)
    }

    fn check_dims(&self, n: usize) -> Result<(), DynamicsError> {
        for (what, got) in [
            ("cable_dirs", self.cable_dirs.len()),
            ("cable_rates", self.cable_rates.len()),
            ("attitudes", self.attitudes.len()),
            ("body_rates", self.body_rates.len()),
        ] {
            if got != n {
                return Err(DynamicsError::DimensionMismatch { what, expected: n, got });
            }
        }
        Ok(())
    }

    fn to_vector(&self) -> DVector<f64> {
        let n = self.n();
        let mut y = DVector::zeros(6 + 13 * n);
        y.fixed_rows_mut::<3>(0).copy_from(&self.load_pos);
        y.fixed_rows_mut::<3>(3).copy_from(&self.load_vel);
        for i in 0..n {
            let b = 6 + 13 * i;
            y.fixed_rows_mut::<3>(b).copy_from(&*self.cable_dirs[i]);
            y.fixed_rows_mut::<3>(b + 3).copy_from(&self.cable_rates[i]);
            y.fixed_rows_mut::<4>(b + 6).copy_from_slice(&self.attitudes[i].coords());
            y.fixed_rows_mut::<3>(b + 10).copy_from(&self.body_rates[i]);
        }
        y
    }

    /// Unpacks an integrator vector, projecting directions and quaternions
    /// back onto their unit spheres and cable rates onto the tangent plane.
    fn from_vector(y: &DVector<f64>, n: usize) -> Self {
        let v3 = |k: usize| Vec3::new(y[k], y[k + 1], y[k + 2]);
        let mut s = Self {
            load_pos: v3(0),
            load_vel: v3(3),
            cable_dirs: Vec::with_capacity(n),
            cable_rates: Vec::with_capacity(n),
            attitudes: Vec::with_capacity(n),
            body_rates: Vec::with_capacity(n),
        };
        for i in 0..n {
            let b = 6 + 13 * i;
            let raw = v3(b);
            let dir = UnitVec3::new_normalize(raw).unwrap_or_else(|_| UnitVec3::e3());
            let rate = v3(b + 3);
            s.cable_rates.push(rate - *dir * dir.into_inner().dot(&rate));
            s.cable_dirs.push(dir);
            s.attitudes
                .push(UnitQuat::from([y[b + 6], y[b + 7], y[b + 8], y[b + 9]]));
            s.body_rates.push(v3(b + 10));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantInputs {
    pub thrusts: Vec<f64>,
    pub torques: Vec<Vec3>,
}

impl PlantInputs {
    pub fn zeros(n: usize) -> Self {
        Self {
            thrusts: vec![0.0; n],
            torques: vec![Vec3::zeros(); n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CableForces {
    /// Link force; negative means the rigid link is in compression.
    pub tensions: Vec<f64>,
    pub slack: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accelerations {
    pub load_acc: Vec3,
    /// Second derivative of each cable direction.
    pub cable_acc: Vec<Vec3>,
    /// Time derivative of each cable angular velocity.
    pub cable_rate_dot: Vec<Vec3>,
    pub body_rate_dot: Vec<Vec3>,
    pub forces: CableForces,
}

/// Thrust plus gravity on UAV `i`.
fn external_force(p: &PlantParams, i: usize, q: &UnitQuat, thrust: f64) -> Vec3 {
    q.rotate(&e3()) * thrust - e3() * (p.uav_masses[i] * p.gravity)
}

/// Core of the rigid-link elimination. `dirs` need not be exactly unit so
/// that the integrator can evaluate intermediate stages off the sphere.
fn accelerations_raw(
    p: &PlantParams,
    dirs: &[Vec3],
    rates: &[Vec3],
    attitudes: &[UnitQuat],
    body_rates: &[Vec3],
    u: &PlantInputs,
) -> Result<Accelerations, DynamicsError> {
    let n = dirs.len();
    let ml = p.load_mass;
    let mut mass = Mat3::identity() * ml;
    let mut rhs = -e3() * (ml * p.gravity);
    let mut forces = Vec::with_capacity(n);
    let mut speed_sq = Vec::with_capacity(n);
    for i in 0..n {
        let a = dirs[i];
        let f = external_force(p, i, &attitudes[i], u.thrusts[i]);
        let w2 = rates[i].cross(&a).norm_squared();
        mass += a * a.transpose() * p.uav_masses[i];
        rhs += a * (a.dot(&f) + p.uav_masses[i] * p.cable_lengths[i] * w2);
        forces.push(f);
        speed_sq.push(w2);
    }
    if !mass.iter().all(|x| x.is_finite()) || !rhs.iter().all(|x| x.is_finite()) {
        return Err(DynamicsError::SingularMassMatrix);
    }
    let load_acc = mass
        .cholesky()
        .ok_or(DynamicsError::SingularMassMatrix)?
        .solve(&rhs);

    let mut tensions = Vec::with_capacity(n);
    let mut cable_acc = Vec::with_capacity(n);
    let mut cable_rate_dot = Vec::with_capacity(n);
    let mut body_rate_dot = Vec::with_capacity(n);
    for i in 0..n {
        let a = dirs[i];
        let m = p.uav_masses[i];
        let len = p.cable_lengths[i];
        let t = a.dot(&forces[i]) - m * a.dot(&load_acc) + m * len * speed_sq[i];
        let acc = ((forces[i] - a * t) / m - load_acc) / len;
        tensions.push(t);
        cable_rate_dot.push(a.cross(&acc));
        cable_acc.push(acc);

        let j = p.inertias[i];
        let w = body_rates[i];
        let gyro = w.cross(&j.component_mul(&w));
        body_rate_dot.push((u.torques[i] - gyro).component_div(&j));
    }
    let slack = tensions.iter().map(|&t| t < 0.0).collect();
    Ok(Accelerations {
        load_acc,
        cable_acc,
        cable_rate_dot,
        body_rate_dot,
        forces: CableForces { tensions, slack },
    })
}

fn check_inputs(p: &PlantParams, s: &PlantState, u: &PlantInputs) -> Result<(), DynamicsError> {
    let n = p.n();
    s.check_dims(n)?;
    if u.thrusts.len() != n {
        return Err(DynamicsError::DimensionMismatch { what: "thrusts", expected: n, got: u.thrusts.len() });
    }
    if u.torques.len() != n {
        return Err(DynamicsError::DimensionMismatch { what: "torques", expected: n, got: u.torques.len() });
    }
    Ok(())
}

/// Load, cable and body-rate accelerations plus link tensions for the
/// current state under the given inputs.
pub fn constrained_accelerations(
    p: &PlantParams,
    s: &PlantState,
    u: &PlantInputs,
) -> Result<Accelerations, DynamicsError> {
    check_inputs(p, s, u)?;
    let dirs: Vec<Vec3> = s.cable_dirs.iter().map(|d| d.into_inner()).collect();
    accelerations_raw(p, &dirs, &s.cable_rates, &s.attitudes, &s.body_rates, u)
}

fn derivative(p: &PlantParams, y: &DVector<f64>, u: &PlantInputs) -> Result<DVector<f64>, DynamicsError> {
    let n = p.n();
    let v3 = |k: usize| Vec3::new(y[k], y[k + 1], y[k + 2]);
    let mut dirs = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    let mut quats = Vec::with_capacity(n);
    let mut raw_quats = Vec::with_capacity(n);
    let mut body = Vec::with_capacity(n);
    for i in 0..n {
        let b = 6 + 13 * i;
        dirs.push(v3(b));
        rates.push(v3(b + 3));
        let q = [y[b + 6], y[b + 7], y[b + 8], y[b + 9]];
        raw_quats.push(q);
        quats.push(UnitQuat::from(q));
        body.push(v3(b + 10));
    }
    let acc = accelerations_raw(p, &dirs, &rates, &quats, &body, u)?;

    let mut dy = DVector::zeros(y.len());
    dy.fixed_rows_mut::<3>(0).copy_from(&v3(3));
    dy.fixed_rows_mut::<3>(3).copy_from(&acc.load_acc);
    for i in 0..n {
        let b = 6 + 13 * i;
        dy.fixed_rows_mut::<3>(b).copy_from(&rates[i].cross(&dirs[i]));
        dy.fixed_rows_mut::<3>(b + 3).copy_from(&acc.cable_rate_dot[i]);
        let w = body[i];
        let qd = hamilton(raw_quats[i], [0.0, w.x, w.y, w.z]);
        for k in 0..4 {
            dy[b + 6 + k] = 0.5 * qd[k];
        }
        dy.fixed_rows_mut::<3>(b + 10).copy_from(&acc.body_rate_dot[i]);
    }
    Ok(dy)
}

/// One classic fourth-order Runge-Kutta step with inputs held constant.
pub fn rk4_step(p: &PlantParams, s: &PlantState, u: &PlantInputs, dt: f64) -> Result<PlantState, DynamicsError> {
    check_inputs(p, s, u)?;
    let y = s.to_vector();
    let k1 = derivative(p, &y, u)?;
    let k2 = derivative(p, &(&y + &k1 * (0.5 * dt)), u)?;
    let k3 = derivative(p, &(&y + &k2 * (0.5 * dt)), u)?;
    let k4 = derivative(p, &(&y + &k3 * dt), u)?;
    let next = &y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    Ok(PlantState::from_vector(&next, p.n()))
}

/// `x_i = x_L + L_i alpha_i`.
pub fn uav_positions(p: &PlantParams, s: &PlantState) -> Vec<Vec3> {
    s.cable_dirs
        .iter()
        .zip(&p.cable_lengths)
        .map(|(d, &l)| s.load_pos + **d * l)
        .collect()
}

pub fn uav_velocities(p: &PlantParams, s: &PlantState) -> Vec<Vec3> {
    s.cable_dirs
        .iter()
        .zip(&s.cable_rates)
        .zip(&p.cable_lengths)
        .map(|((d, w), &l)| s.load_vel + w.cross(d) * l)
        .collect()
}

/// Whole-system momentum balance: the sum of `m * acceleration` over load and
/// UAVs minus the total external force. UAV accelerations are rebuilt from
/// the load acceleration and the integrated cable-rate derivative, so a sign
/// error in the tension formula shows up here.
pub fn momentum_residual(p: &PlantParams, s: &PlantState, u: &PlantInputs, acc: &Accelerations) -> Vec3 {
    let mut lhs = acc.load_acc * p.load_mass;
    let mut ext = -e3() * (p.load_mass * p.gravity);
    for i in 0..p.n() {
        let a = *s.cable_dirs[i];
        let w = s.cable_rates[i];
        let dir_acc = acc.cable_rate_dot[i].cross(&a) + w.cross(&w.cross(&a));
        let uav_acc = acc.load_acc + dir_acc * p.cable_lengths[i];
        lhs += uav_acc * p.uav_masses[i];
        ext += external_force(p, i, &s.attitudes[i], u.thrusts[i]);
    }
    lhs - ext
}
