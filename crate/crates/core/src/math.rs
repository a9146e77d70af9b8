//! Small vector and quaternion toolkit.
//!
//! Quaternions follow the Hamilton convention: `q = [eta, eps]` with scalar
//! part `eta`, vector part `eps`, `i*j = k`, and conjugate `[eta, -eps]`.
//! `UnitQuat::rotate` maps body-frame vectors into the world frame.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Norm below which a direction cannot be extracted.
pub const EPS_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MathError {
    #[error("vector norm {0:e} is below the direction-extraction threshold")]
    DegenerateNorm(f64),
}

/// World z axis.
pub fn e3() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub fn new_normalize(v: Vec3) -> Result<Self, MathError> {
        normalize(v)
    }

    /// Wraps `v` without renormalizing. The caller guarantees `|v| = 1`.
    pub fn new_unchecked(v: Vec3) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-6);
        Self(v)
    }

    pub fn e3() -> Self {
        Self(e3())
    }

    pub fn into_inner(self) -> Vec3 {
        self.0
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.0.dot(&other.0)
    }
}

impl std::ops::Deref for UnitVec3 {
    type Target = Vec3;

    fn deref(&self) -> &Vec3 {
        &self.0
    }
}

impl From<UnitVec3> for [f64; 3] {
    fn from(u: UnitVec3) -> Self {
        [u.0.x, u.0.y, u.0.z]
    }
}

impl TryFrom<[f64; 3]> for UnitVec3 {
    type Error = MathError;

    fn try_from(a: [f64; 3]) -> Result<Self, MathError> {
        normalize(Vec3::from(a))
    }
}

/// `v / |v|`, or `DegenerateNorm` when `|v| <= EPS_NORM`.
pub fn normalize(v: Vec3) -> Result<UnitVec3, MathError> {
    let n = v.norm();
    if !(n > EPS_NORM) {
        return Err(MathError::DegenerateNorm(n));
    }
    Ok(UnitVec3(v / n))
}

/// Unit quaternion `[eta, eps]`, renormalized on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", from = "[f64; 4]")]
pub struct UnitQuat {
    eta: f64,
    eps: Vec3,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuat {
    pub fn identity() -> Self {
        Self {
            eta: 1.0,
            eps: Vec3::zeros(),
        }
    }

    /// Builds a quaternion from raw components and projects it onto the unit
    /// sphere. A zero input collapses to the identity.
    pub fn new_normalize(eta: f64, eps: Vec3) -> Self {
        let n = (eta * eta + eps.norm_squared()).sqrt();
        if !(n > EPS_NORM) {
            return Self::identity();
        }
        Self {
            eta: eta / n,
            eps: eps / n,
        }
    }

    pub fn from_axis_angle(axis: &UnitVec3, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new_normalize(c, axis.into_inner() * s)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eps(&self) -> Vec3 {
        self.eps
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.eta, self.eps.x, self.eps.y, self.eps.z]
    }

    pub fn conjugate(&self) -> Self {
        Self {
            eta: self.eta,
            eps: -self.eps,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            eta: -self.eta,
            eps: -self.eps,
        }
    }

    /// 4-D inner product; its sign tells which cover of a rotation is closer.
    pub fn dot(&self, other: &UnitQuat) -> f64 {
        self.eta * other.eta + self.eps.dot(&other.eps)
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        quat_rotate(self, v)
    }

    pub fn to_rotation_matrix(&self) -> Mat3 {
        let (w, x, y, z) = (self.eta, self.eps.x, self.eps.y, self.eps.z);
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.coords()
    }
}

impl From<[f64; 4]> for UnitQuat {
    fn from(a: [f64; 4]) -> Self {
        UnitQuat::new_normalize(a[0], Vec3::new(a[1], a[2], a[3]))
    }
}

impl std::ops::Mul for UnitQuat {
    type Output = UnitQuat;

    fn mul(self, rhs: UnitQuat) -> UnitQuat {
        quat_mul(&self, &rhs)
    }
}

/// Raw Hamilton product on `[w, x, y, z]` arrays, no renormalization.
pub fn hamilton(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn quat_mul(a: &UnitQuat, b: &UnitQuat) -> UnitQuat {
    UnitQuat::from(hamilton(a.coords(), b.coords()))
}

/// `R(q) v`.
pub fn quat_rotate(q: &UnitQuat, v: &Vec3) -> Vec3 {
    let t = 2.0 * q.eps.cross(v);
    v + q.eta * t + q.eps.cross(&t)
}
