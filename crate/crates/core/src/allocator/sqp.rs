//! Warm-started SQP for the allocation NLP.
//!
//! Each iteration linearizes the constraints, models the Lagrangian with its
//! exact Hessian (shifted when needed so it is positive definite on the
//! constraint null space), solves the QP with the tension bounds handled by
//! the active-set subsolver, and globalizes with an l1 merit function,
//! Armijo backtracking and one second-order correction. Directions are
//! projected back onto the unit sphere after every accepted step.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::objective::{agents, constraints, dir_offset, direction, eval_objective, lagrangian_hessian, pack};
use super::qp::{qp_subproblem, LowerBound};
use super::{initial_guess, AllocError, AllocProblem, AllocSolution, SolveStatus, SqpSettings};
use crate::math::{UnitVec3, Vec3};

/// Converged points with a residual above `kkt_tol * POLISH_RATIO` get one
/// extra step.
const POLISH_RATIO: f64 = 1e-3;

struct Iterate {
    z: DVector<f64>,
    value: f64,
    grad: DVector<f64>,
    cons: DVector<f64>,
    jac: DMatrix<f64>,
}

impl Iterate {
    fn new(z: DVector<f64>, mu: f64, u_l: &Vec3) -> Self {
        let (value, grad) = eval_objective(&z, mu);
        let (cons, jac) = constraints(&z, u_l);
        Self { z, value, grad, cons, jac }
    }

    fn merit(&self, penalty: f64) -> f64 {
        self.value + penalty * self.cons.lp_norm(1)
    }
}

/// Clips tensions at zero and renormalizes each direction block.
fn project(z: &mut DVector<f64>, fallback: &DVector<f64>) {
    let n = agents(z);
    for i in 0..n {
        z[i] = z[i].max(0.0);
        let b = dir_offset(n, i);
        let a = direction(z, i);
        let norm = a.norm();
        let unit = if norm > 1e-9 && norm.is_finite() { a / norm } else { direction(fallback, i) };
        z.fixed_rows_mut::<3>(b).copy_from(&unit);
    }
}

/// Least-squares multipliers from `grad = A' y`.
fn multiplier_estimate(grad: &DVector<f64>, jac: &DMatrix<f64>) -> DVector<f64> {
    let gram = jac * jac.transpose();
    gram.cholesky()
        .map(|c| c.solve(&(jac * grad)))
        .unwrap_or_else(|| DVector::zeros(jac.nrows()))
}

/// Orthonormal basis of `null(jac)` from the eigenvectors of `jac' jac`.
fn null_space(jac: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = (jac.transpose() * jac).symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] <= 1e-10 * scale)
        .collect();
    DMatrix::from_fn(jac.ncols(), cols.len(), |r, c| eig.eigenvectors[(r, cols[c])])
}

/// Adds `tau I` with `tau` stepped up from `floor` by decades until the
/// reduced Hessian has no eigenvalue below `floor`. Rotating every cable
/// about the demand axis leaves both cost and constraints unchanged, so the
/// unshifted reduced Hessian is singular at every solution.
fn regularize(h: &mut DMatrix<f64>, jac: &DMatrix<f64>, floor: f64) {
    let z = null_space(jac);
    if z.ncols() == 0 {
        return;
    }
    let reduced = z.transpose() * &*h * &z;
    let min_eig = reduced.symmetric_eigen().eigenvalues.min();
    if min_eig >= floor {
        return;
    }
    let mut tau = floor;
    while tau + min_eig < floor {
        tau *= 10.0;
    }
    for k in 0..h.nrows() {
        h[(k, k)] += tau;
    }
}

fn kkt_residual(it: &Iterate, y: &DVector<f64>, pi: &[f64]) -> f64 {
    let n = agents(&it.z);
    let mut stat = &it.grad - it.jac.transpose() * y;
    let mut comp = 0.0f64;
    let mut dual = 0.0f64;
    for i in 0..n {
        stat[i] -= pi[i];
        comp = comp.max((pi[i] * it.z[i]).abs());
        dual = dual.max(-pi[i]);
    }
    stat.amax().max(it.cons.amax()).max(comp).max(dual)
}

/// KKT residual with least-squares multipliers, treating `T_i = 0` as the
/// active bounds. Exact at a KKT point, so it certifies convergence without
/// a QP solve.
fn estimated_kkt(it: &Iterate) -> f64 {
    let n = agents(&it.z);
    let active: Vec<usize> = (0..n).filter(|&i| it.z[i] <= 0.0).collect();
    let m_eq = it.jac.nrows();
    let mut m = DMatrix::zeros(it.z.len(), m_eq + active.len());
    m.view_mut((0, 0), (it.z.len(), m_eq)).copy_from(&it.jac.transpose());
    for (c, &i) in active.iter().enumerate() {
        m[(i, m_eq + c)] = 1.0;
    }
    let Ok(lambda) = m.clone().svd(true, true).solve(&it.grad, 1e-12) else {
        return f64::INFINITY;
    };
    let stat = (&it.grad - &m * &lambda).amax();
    let dual = (m_eq..lambda.len()).fold(0.0f64, |acc, k| acc.max(-lambda[k]));
    stat.max(it.cons.amax()).max(dual)
}

fn to_solution(z: &DVector<f64>, kkt: f64, iterations: usize, status: SolveStatus) -> AllocSolution {
    let n = agents(z);
    AllocSolution {
        tensions: (0..n).map(|i| z[i].max(0.0)).collect(),
        directions: (0..n)
            .map(|i| UnitVec3::new_normalize(direction(z, i)).unwrap_or_else(|_| UnitVec3::e3()))
            .collect(),
        kkt_residual: kkt,
        iterations,
        status,
        solve_time: 0.0,
    }
}

fn solution_vector(sol: &AllocSolution) -> DVector<f64> {
    let dirs: Vec<Vec3> = sol.directions.iter().map(|d| d.into_inner()).collect();
    pack(&sol.tensions, &dirs)
}

/// Solves the allocation NLP starting from `p.prev` when present (and sized
/// for `p.n`), otherwise from the cold-start cone. A failed warm start is
/// retried once from the cold-start cone.
///
/// Solver failures do not error: they return the starting allocation with
/// status `Fallback`. Errors are reserved for inputs that admit no starting
/// point at all.
pub fn sqp_solve(p: &AllocProblem<'_>, s: &SqpSettings) -> Result<AllocSolution, AllocError> {
    let start = Instant::now();
    if p.n == 0 {
        return Err(AllocError::NoAgents);
    }
    let warm = p.prev.filter(|prev| prev.n() == p.n);
    let mut sol = match warm {
        Some(prev) => solve_from(p, s, prev),
        None => solve_from(p, s, &initial_guess(&p.u_l, p.n, s.cold_start_half_angle_deg)?),
    };
    if sol.status == SolveStatus::Fallback && warm.is_some() {
        if let Ok(cold) = initial_guess(&p.u_l, p.n, s.cold_start_half_angle_deg) {
            let retry = solve_from(p, s, &cold);
            if retry.status == SolveStatus::Converged {
                sol = AllocSolution { iterations: sol.iterations + retry.iterations, ..retry };
            }
        }
    }
    sol.solve_time = start.elapsed().as_secs_f64();
    Ok(sol)
}

fn solve_from(p: &AllocProblem<'_>, s: &SqpSettings, base: &AllocSolution) -> AllocSolution {
    let base_z = solution_vector(base);
    let fallback = |kkt: f64, iterations: usize| -> AllocSolution {
        AllocSolution {
            kkt_residual: kkt,
            iterations,
            status: SolveStatus::Fallback,
            solve_time: 0.0,
            ..base.clone()
        }
    };

    let n = p.n;
    let mut it = Iterate::new(base_z.clone(), p.mu, &p.u_l);
    let mut active: Vec<bool> = (0..n).map(|i| it.z[i] <= 0.0).collect();
    let mut y = multiplier_estimate(&it.grad, &it.jac);
    let mut penalty = 0.0f64;
    let mut steps = 0;
    let mut polishing: Option<(DVector<f64>, f64)> = None;

    loop {
        let kkt = estimated_kkt(&it);
        if let Some((z, k)) = &polishing {
            // Keep the polished point only if it did not get worse.
            return if kkt <= *k {
                to_solution(&it.z, kkt, steps, SolveStatus::Converged)
            } else {
                to_solution(z, *k, steps - 1, SolveStatus::Converged)
            };
        }
        if kkt <= s.kkt_tol {
            // A point reached by a step sits just inside the tolerance; one
            // more Newton step drives it to round-off.
            if steps == 0 || kkt <= s.kkt_tol * POLISH_RATIO || steps == s.max_iter {
                return to_solution(&it.z, kkt, steps, SolveStatus::Converged);
            }
            polishing = Some((it.z.clone(), kkt));
        }
        if steps == s.max_iter {
            return to_solution(&it.z, kkt, steps, SolveStatus::MaxIter);
        }

        let mut h = lagrangian_hessian(&it.z, p.mu, &y);
        regularize(&mut h, &it.jac, s.hessian_reg_floor);
        let bounds: Vec<LowerBound> = (0..n).map(|i| LowerBound { index: i, lower: -it.z[i] }).collect();
        let Ok(qp) = qp_subproblem(&h, &it.grad, &it.jac, &it.cons, &bounds, &active) else {
            if polishing.is_some() {
                return to_solution(&it.z, kkt, steps, SolveStatus::Converged);
            }
            return fallback(it.cons.amax(), steps);
        };
        y = qp.eq_multipliers;
        active = qp.active;
        let kkt = kkt_residual(&it, &y, &qp.bound_multipliers);
        if kkt <= s.kkt_tol && polishing.is_none() {
            return to_solution(&it.z, kkt, steps, SolveStatus::Converged);
        }

        let d = qp.step;
        penalty = penalty.max(s.penalty_factor * y.amax() + s.penalty_offset);
        let phi0 = it.merit(penalty);
        let slope = (it.grad.dot(&d) - penalty * it.cons.lp_norm(1)).min(0.0);

        let mut step = 1.0;
        let accepted = loop {
            let mut z = &it.z + &d * step;
            project(&mut z, &it.z);
            let trial = Iterate::new(z, p.mu, &p.u_l);
            let target = phi0 + s.armijo_c * step * slope;
            if trial.merit(penalty) <= target {
                break Some(trial);
            }
            if step == 1.0 {
                // Second-order correction against the bilinear balance term.
                let gram = &it.jac * it.jac.transpose();
                if let Some(chol) = gram.cholesky() {
                    let corr = -it.jac.transpose() * chol.solve(&trial.cons);
                    let mut z = &trial.z + corr;
                    project(&mut z, &it.z);
                    let soc = Iterate::new(z, p.mu, &p.u_l);
                    if soc.merit(penalty) <= target {
                        break Some(soc);
                    }
                }
            }
            step *= s.backtrack_factor;
            if step < s.min_step {
                break None;
            }
        };
        steps += 1;
        match (accepted, &polishing) {
            (Some(next), _) => it = next,
            (None, Some((z, k))) => return to_solution(z, *k, steps - 1, SolveStatus::Converged),
            (None, None) => return fallback(kkt, steps),
        }
    }
}
