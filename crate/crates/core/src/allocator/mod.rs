//! Cable-tension allocation.
//!
//! Given the load controller's virtual force `u_L`, pick tensions `T_i >= 0`
//! and unit directions `alpha_i` with `sum T_i alpha_i = -u_L`. The SQP
//! allocator minimizes squared tensions plus a penalty on aligned cables; the
//! baseline keeps a fixed cone and only solves for tensions.

mod baseline;
pub mod objective;
pub mod qp;
mod sqp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{normalize, MathError, UnitVec3, Vec3};

pub use baseline::{baseline_allocate, cone_directions};
pub use objective::{constraints, eval_objective};
pub use qp::{qp_subproblem, LowerBound, QpError, QpSolution};
pub use sqp::sqp_solve;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocError {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("fixed cable pattern cannot produce the demanded force (residual {0:e} N)")]
    BaselineInfeasible(f64),
    #[error("allocation needs at least one agent")]
    NoAgents,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Fallback,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocSolution {
    pub tensions: Vec<f64>,
    pub directions: Vec<UnitVec3>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Wall-clock seconds spent in the solver.
    pub solve_time: f64,
}

impl AllocSolution {
    pub fn n(&self) -> usize {
        self.tensions.len()
    }

    /// `sum T_i alpha_i`.
    pub fn resultant(&self) -> Vec3 {
        self.tensions
            .iter()
            .zip(&self.directions)
            .fold(Vec3::zeros(), |acc, (t, d)| acc + **d * *t)
    }

    pub fn objective(&self, mu: f64) -> f64 {
        let dirs: Vec<Vec3> = self.directions.iter().map(|d| d.into_inner()).collect();
        eval_objective(&objective::pack(&self.tensions, &dirs), mu).0
    }

    /// Smallest angle between any two cables, in degrees.
    pub fn min_pairwise_angle_deg(&self) -> f64 {
        min_pairwise_angle_deg(&self.directions)
    }
}

/// Smallest pairwise angle in degrees; `180` for fewer than two cables.
pub fn min_pairwise_angle_deg(dirs: &[UnitVec3]) -> f64 {
    let mut best = 180.0f64;
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            best = best.min(dirs[i].dot(&dirs[j]).clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqpSettings {
    pub kkt_tol: f64,
    pub max_iter: usize,
    /// Smallest curvature allowed on the constraint null space.
    pub hessian_reg_floor: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    /// Merit penalty is kept at `penalty_factor * max|y| + penalty_offset`.
    pub penalty_factor: f64,
    pub penalty_offset: f64,
    pub min_step: f64,
    /// Half-angle of the cold-start cone.
    pub cold_start_half_angle_deg: f64,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-8,
            max_iter: 50,
            hessian_reg_floor: 1e-8,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            penalty_factor: 1.5,
            penalty_offset: 1e-3,
            min_step: 1e-10,
            cold_start_half_angle_deg: 35.0,
        }
    }
}

impl SqpSettings {
    pub fn validate(&self) -> Result<(), String> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.kkt_tol) {
            return Err("kkt_tol must be > 0".into());
        }
        if self.max_iter == 0 {
            return Err("max_iter must be > 0".into());
        }
        if !pos(self.hessian_reg_floor) {
            return Err("hessian_reg_floor must be > 0".into());
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 0.5) {
            return Err("armijo_c must lie in (0, 0.5)".into());
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err("backtrack_factor must lie in (0, 1)".into());
        }
        if !(self.penalty_factor >= 1.0) || !pos(self.penalty_offset) || !pos(self.min_step) {
            return Err("penalty_factor must be >= 1, penalty_offset and min_step > 0".into());
        }
        if !(self.cold_start_half_angle_deg > 0.0 && self.cold_start_half_angle_deg < 90.0) {
            return Err("cold_start_half_angle_deg must lie in (0, 90)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocProblem<'a> {
    pub u_l: Vec3,
    pub n: usize,
    pub mu: f64,
    pub prev: Option<&'a AllocSolution>,
}

/// Unit vectors `b1, b2` completing `axis` to a right-handed frame. For
/// `axis = +e3` this is `(e1, e2)`.
pub(crate) fn orthonormal_basis(axis: &Vec3) -> (Vec3, Vec3) {
    let seed = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let b1 = (seed - axis * axis.dot(&seed)).normalize();
    let b2 = axis.cross(&b1);
    (b1, b2)
}

/// Symmetric cone about `-u_L / |u_L|` with equal tensions whose axial sum
/// matches `|u_L|`.
pub fn initial_guess(u_l: &Vec3, n: usize, half_angle_deg: f64) -> Result<AllocSolution, AllocError> {
    if n == 0 {
        return Err(AllocError::NoAgents);
    }
    let axis = normalize(-u_l)?;
    let half = if n == 1 { 0.0 } else { half_angle_deg.to_radians() };
    let directions = cone_directions(&axis, n, half);
    let t = u_l.norm() / (n as f64 * half.cos());
    Ok(AllocSolution {
        tensions: vec![t; n],
        directions,
        kkt_residual: f64::INFINITY,
        iterations: 0,
        status: SolveStatus::Converged,
        solve_time: 0.0,
    })
}

/// Stateful allocator for a control loop: remembers the previous cycle's
/// solution for warm starts and fallback.
#[derive(Debug, Clone)]
pub struct TensionAllocator {
    pub n: usize,
    pub mu: f64,
    pub method: AllocMethod,
    prev: Option<AllocSolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AllocMethod {
    Sqp(SqpSettings),
    Baseline { half_angle_deg: f64 },
}

impl TensionAllocator {
    pub fn new(n: usize, mu: f64, method: AllocMethod) -> Self {
        Self { n, mu, method, prev: None }
    }

    pub fn previous(&self) -> Option<&AllocSolution> {
        self.prev.as_ref()
    }

    /// Solves for `u_l`. On solver failure the returned solution carries the
    /// previous allocation (status `Fallback`), so the loop never stalls.
    pub fn allocate(&mut self, u_l: &Vec3) -> Result<AllocSolution, AllocError> {
        let sol = match &self.method {
            AllocMethod::Sqp(settings) => {
                let problem = AllocProblem {
                    u_l: *u_l,
                    n: self.n,
                    mu: self.mu,
                    prev: self.prev.as_ref(),
                };
                sqp_solve(&problem, settings)?
            }
            AllocMethod::Baseline { half_angle_deg } => {
                let start = std::time::Instant::now();
                match baseline_allocate(u_l, self.n, *half_angle_deg) {
                    Ok(mut sol) => {
                        sol.solve_time = start.elapsed().as_secs_f64();
                        sol
                    }
                    Err(AllocError::BaselineInfeasible(_)) if self.prev.is_some() => {
                        let mut sol = self.prev.clone().expect("checked");
                        sol.status = SolveStatus::Fallback;
                        sol.solve_time = start.elapsed().as_secs_f64();
                        sol
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        self.prev = Some(sol.clone());
        Ok(sol)
    }
}
