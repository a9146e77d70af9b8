//! Scenario configuration and reference trajectories.
//!
//! A scenario is one JSON document. Every field is optional; omitted fields
//! take the four-quadrotor defaults. Per-UAV arrays may be omitted (filled
//! to length `n`) or given with exactly `n` entries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{AllocMethod, SqpSettings};
use crate::control::{LoadGains, LoopSettings, ReferencePoint, UavGains};
use crate::dynamics::PlantParams;
use crate::math::Vec3;

/// Environment variable that may hold the config path.
pub const CONFIG_ENV: &str = "MAATS_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse config at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config value `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub n: usize,
    pub load_mass: f64,
    pub uav_masses: Vec<f64>,
    /// Diagonal inertia per UAV.
    pub inertias: Vec<[f64; 3]>,
    pub cable_lengths: Vec<f64>,
    pub gravity: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            n: 4,
            load_mass: 0.225,
            uav_masses: Vec::new(),
            inertias: Vec::new(),
            cable_lengths: Vec::new(),
            gravity: 9.81,
        }
    }
}

const DEFAULT_UAV_MASS: f64 = 0.5;
const DEFAULT_INERTIA: [f64; 3] = [2.1e-2, 1.87e-2, 3.97e-2];
const DEFAULT_CABLE_LENGTH: f64 = 1.0;

impl PlantConfig {
    pub fn params(&self) -> PlantParams {
        PlantParams {
            load_mass: self.load_mass,
            uav_masses: self.uav_masses.clone(),
            inertias: self.inertias.iter().map(|j| Vec3::from(*j)).collect(),
            cable_lengths: self.cable_lengths.clone(),
            gravity: self.gravity,
        }
    }

    fn fill_and_validate(&mut self) -> Result<(), ConfigError> {
        let n = self.n;
        if n == 0 {
            return Err(invalid("plant.n", "at least one UAV is required"));
        }
        fn fill<T: Clone>(v: &mut Vec<T>, n: usize, default: T, key: &str) -> Result<(), ConfigError> {
            if v.is_empty() {
                *v = vec![default; n];
            } else if v.len() != n {
                return Err(invalid(key, format!("expected {n} entries, got {}", v.len())));
            }
            Ok(())
        }
        fill(&mut self.uav_masses, n, DEFAULT_UAV_MASS, "plant.uav_masses")?;
        fill(&mut self.inertias, n, DEFAULT_INERTIA, "plant.inertias")?;
        fill(&mut self.cable_lengths, n, DEFAULT_CABLE_LENGTH, "plant.cable_lengths")?;

        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.load_mass) {
            return Err(invalid("plant.load_mass", "must be > 0"));
        }
        if !pos(self.gravity) {
            return Err(invalid("plant.gravity", "must be > 0"));
        }
        if !self.uav_masses.iter().all(|&m| pos(m)) {
            return Err(invalid("plant.uav_masses", "all masses must be > 0"));
        }
        if !self.inertias.iter().flatten().all(|&j| pos(j)) {
            return Err(invalid("plant.inertias", "all inertia entries must be > 0"));
        }
        if !self.cable_lengths.iter().all(|&l| pos(l)) {
            return Err(invalid("plant.cable_lengths", "all lengths must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    pub load: LoadGains,
    pub uav: UavGains,
    #[serde(rename = "loop")]
    pub loop_settings: LoopSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocatorKind {
    #[default]
    Sqp,
    Baseline,
}

impl std::str::FromStr for AllocatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sqp" => Ok(AllocatorKind::Sqp),
            "baseline" => Ok(AllocatorKind::Baseline),
            other => Err(format!("unknown allocator `{other}` (expected sqp or baseline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocConfig {
    pub kind: AllocatorKind,
    /// Weight of the cable-alignment penalty.
    pub mu: f64,
    pub sqp: SqpSettings,
    /// Half-angle of the baseline's fixed world-frame cone.
    pub baseline_half_angle_deg: f64,
}

impl Default for AllocConfig {
    fn default() -> Self {
        Self {
            kind: AllocatorKind::Sqp,
            mu: 0.15,
            sqp: SqpSettings::default(),
            baseline_half_angle_deg: 35.0,
        }
    }
}

impl AllocConfig {
    pub fn method(&self) -> AllocMethod {
        match self.kind {
            AllocatorKind::Sqp => AllocMethod::Sqp(self.sqp.clone()),
            AllocatorKind::Baseline => AllocMethod::Baseline {
                half_angle_deg: self.baseline_half_angle_deg,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Hover,
    #[default]
    Spiral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub kind: TrajectoryKind,
    pub radius: f64,
    /// Angular rate around the spiral axis (rad/s).
    pub angular_rate: f64,
    /// Vertical speed (m/s).
    pub climb_rate: f64,
    pub center: [f64; 3],
    /// Initial azimuth (rad).
    pub phase: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Spiral,
            radius: 1.0,
            angular_rate: std::f64::consts::PI / 5.0,
            climb_rate: 0.05,
            center: [0.0, 0.0, 0.0],
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: PlantConfig,
    pub gains: GainsConfig,
    pub alloc: AllocConfig,
    pub trajectory: TrajectoryConfig,
    pub duration: f64,
    pub dt: f64,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let mut cfg = Self {
            plant: PlantConfig::default(),
            gains: GainsConfig::default(),
            alloc: AllocConfig::default(),
            trajectory: TrajectoryConfig::default(),
            duration: 20.0,
            dt: 1e-3,
            output: OutputConfig::default(),
        };
        cfg.validate().expect("defaults are valid");
        cfg
    }
}

impl ScenarioConfig {
    /// Hover at the origin with otherwise default settings.
    pub fn hover() -> Self {
        let mut cfg = Self::default();
        cfg.trajectory.kind = TrajectoryKind::Hover;
        cfg
    }

    pub fn n(&self) -> usize {
        self.plant.n
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn trajectory(&self) -> ReferenceTrajectory {
        ReferenceTrajectory::from_config(&self.trajectory)
    }

    /// Fills per-UAV arrays and checks every invariant.
    pub fn validate(&mut self) -> Result<(), ConfigError> {
        self.plant.fill_and_validate()?;

        let g = &self.gains;
        for (key, d) in [("gains.load.kp", &g.load.kp), ("gains.load.kd", &g.load.kd)] {
            if !d.all_positive() {
                return Err(invalid(key, "diagonal entries must be > 0"));
            }
        }
        if !g.load.ki.all_nonnegative() {
            return Err(invalid("gains.load.ki", "diagonal entries must be >= 0"));
        }
        let u = &g.uav;
        for (key, d) in [
            ("gains.uav.kp", &u.kp),
            ("gains.uav.kd", &u.kd),
            ("gains.uav.rho", &u.rho),
            ("gains.uav.kd_att", &u.kd_att),
            ("gains.uav.beta", &u.beta),
            ("gains.uav.gamma", &u.gamma),
        ] {
            if !d.all_positive() {
                return Err(invalid(key, "diagonal entries must be > 0"));
            }
        }
        if !u.ki.all_nonnegative() {
            return Err(invalid("gains.uav.ki", "diagonal entries must be >= 0"));
        }
        if !(u.sat_limit.is_finite() && u.sat_limit > 0.0) {
            return Err(invalid("gains.uav.sat_limit", "must be > 0"));
        }
        let l = &g.loop_settings;
        if !(l.integral_limit.is_finite() && l.integral_limit >= 0.0) {
            return Err(invalid("gains.loop.integral_limit", "must be >= 0"));
        }
        if !(l.rate_filter_hz.is_finite() && l.rate_filter_hz > 0.0) {
            return Err(invalid("gains.loop.rate_filter_hz", "must be > 0"));
        }

        if !(self.alloc.mu.is_finite() && self.alloc.mu >= 0.0) {
            return Err(invalid("alloc.mu", "must be >= 0"));
        }
        self.alloc.sqp.validate().map_err(|r| invalid("alloc.sqp", r))?;
        let half = self.alloc.baseline_half_angle_deg;
        if !(half > 0.0 && half < 90.0) {
            return Err(invalid("alloc.baseline_half_angle_deg", "must lie in (0, 90)"));
        }

        let t = &self.trajectory;
        if !(t.radius.is_finite() && t.radius >= 0.0) {
            return Err(invalid("trajectory.radius", "must be >= 0"));
        }
        for (key, x) in [
            ("trajectory.angular_rate", t.angular_rate),
            ("trajectory.climb_rate", t.climb_rate),
            ("trajectory.phase", t.phase),
        ] {
            if !x.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        if !t.center.iter().all(|c| c.is_finite()) {
            return Err(invalid("trajectory.center", "must be finite"));
        }

        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", "must be > 0"));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(invalid("duration", "must be >= dt"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a JSON scenario. An empty document yields defaults.
pub fn load_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg: ScenarioConfig = if text.trim().is_empty() {
        ScenarioConfig::default()
    } else {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: &std::path::Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_config(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralParams {
    pub center: Vec3,
    pub radius: f64,
    pub angular_rate: f64,
    pub climb_rate: f64,
    pub phase: f64,
}

/// Ascending spiral: a horizontal circle whose center rises at `climb_rate`.
pub fn spiral_reference(p: &SpiralParams, t: f64) -> ReferencePoint {
    let (s, c) = (p.angular_rate * t + p.phase).sin_cos();
    let (r, w) = (p.radius, p.angular_rate);
    ReferencePoint {
        pos: p.center + Vec3::new(r * c, r * s, p.climb_rate * t),
        vel: Vec3::new(-r * w * s, r * w * c, p.climb_rate),
        acc: Vec3::new(-r * w * w * c, -r * w * w * s, 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceTrajectory {
    Hover(Vec3),
    Spiral(SpiralParams),
}

impl ReferenceTrajectory {
    pub fn from_config(t: &TrajectoryConfig) -> Self {
        let center = Vec3::from(t.center);
        match t.kind {
            TrajectoryKind::Hover => ReferenceTrajectory::Hover(center),
            TrajectoryKind::Spiral => ReferenceTrajectory::Spiral(SpiralParams {
                center,
                radius: t.radius,
                angular_rate: t.angular_rate,
                climb_rate: t.climb_rate,
                phase: t.phase,
            }),
        }
    }

    pub fn at(&self, t: f64) -> ReferencePoint {
        match self {
            ReferenceTrajectory::Hover(p) => ReferencePoint::hold(*p),
            ReferenceTrajectory::Spiral(sp) => spiral_reference(sp, t),
        }
    }
}
