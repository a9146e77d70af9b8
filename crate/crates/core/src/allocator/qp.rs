//! Equality- and bound-constrained convex QP by a primal-dual active set.
//!
//! Solves `min 0.5 d'Hd + g'd  s.t.  A d = -b,  d[k] >= lower_k` for a
//! handful of simple lower bounds. Each trial working set is solved as one
//! dense saddle-point system; bounds are added while violated and dropped
//! while their multiplier has the wrong sign.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("linearized constraints are inconsistent")]
    QpInfeasible,
    #[error("dimension mismatch in QP data")]
    Dimension,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub index: usize,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub step: DVector<f64>,
    /// Equality multipliers, with stationarity `H d + g = A' y + sum pi_k e_k`.
    pub eq_multipliers: DVector<f64>,
    /// One multiplier per bound, `>= 0` at a solution; zero when inactive.
    pub bound_multipliers: Vec<f64>,
    pub active: Vec<bool>,
}

const FEAS_TOL: f64 = 1e-12;
const DUAL_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-13;

/// Solves the saddle system for a fixed working set. Returns `None` when the
/// system is numerically singular.
fn solve_working_set(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    bounds: &[LowerBound],
    active: &[bool],
) -> Option<QpSolution> {
    let nv = h.nrows();
    let me = a.nrows();
    let working: Vec<usize> = (0..bounds.len()).filter(|&k| active[k]).collect();
    let dim = nv + me + working.len();
    let mut kkt = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    kkt.view_mut((0, 0), (nv, nv)).copy_from(h);
    kkt.view_mut((nv, 0), (me, nv)).copy_from(a);
    kkt.view_mut((0, nv), (nv, me)).copy_from(&a.transpose());
    rhs.rows_mut(0, nv).copy_from(&(-g));
    rhs.rows_mut(nv, me).copy_from(&(-b));
    for (r, &k) in working.iter().enumerate() {
        let row = nv + me + r;
        kkt[(row, bounds[k].index)] = 1.0;
        kkt[(bounds[k].index, row)] = 1.0;
        rhs[row] = bounds[k].lower;
    }

    let scale = kkt.amax().max(1.0);
    let lu = kkt.full_piv_lu();
    let diag = lu.u().diagonal();
    let min_pivot = diag.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if !(min_pivot > PIVOT_TOL * scale) {
        return None;
    }
    let sol = lu.solve(&rhs)?;
    if !sol.iter().all(|x| x.is_finite()) {
        return None;
    }

    let step = sol.rows(0, nv).into_owned();
    let eq_multipliers = -sol.rows(nv, me).into_owned();
    let mut bound_multipliers = vec![0.0; bounds.len()];
    for (r, &k) in working.iter().enumerate() {
        bound_multipliers[k] = -sol[nv + me + r];
    }
    Some(QpSolution {
        step,
        eq_multipliers,
        bound_multipliers,
        active: active.to_vec(),
    })
}

fn worst_violation(sol: &QpSolution, bounds: &[LowerBound]) -> Option<usize> {
    bounds
        .iter()
        .enumerate()
        .filter(|(k, _)| !sol.active[*k])
        .map(|(k, bd)| (k, bd.lower - sol.step[bd.index], FEAS_TOL * (1.0 + bd.lower.abs())))
        .filter(|(_, v, tol)| v > tol)
        .map(|(k, v, _)| (k, v))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(k, _)| k)
}

fn worst_multiplier(sol: &QpSolution) -> Option<usize> {
    sol.bound_multipliers
        .iter()
        .enumerate()
        .filter(|(k, &pi)| sol.active[*k] && pi < -DUAL_TOL)
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(k, _)| k)
}

fn mask(active: &[bool]) -> u64 {
    active
        .iter()
        .enumerate()
        .fold(0u64, |m, (k, &a)| if a { m | (1 << k) } else { m })
}

/// `initial_active` seeds the working set (e.g. the bounds active at the
/// previous SQP iterate); pass all-false for a cold start.
pub fn qp_subproblem(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    bounds: &[LowerBound],
    initial_active: &[bool],
) -> Result<QpSolution, QpError> {
    let nv = h.nrows();
    if h.ncols() != nv || g.len() != nv || a.ncols() != nv || a.nrows() != b.len() || initial_active.len() != bounds.len()
    {
        return Err(QpError::Dimension);
    }
    if bounds.len() > 63 || bounds.iter().any(|bd| bd.index >= nv) {
        return Err(QpError::Dimension);
    }

    let mut active = initial_active.to_vec();
    let mut seen = HashSet::new();
    let max_passes = 4 * bounds.len() + 8;
    for _ in 0..max_passes {
        if !seen.insert(mask(&active)) {
            break;
        }
        let Some(sol) = solve_working_set(h, g, a, b, bounds, &active) else {
            // Singular: a bound made the equality rows dependent.
            break;
        };
        if let Some(k) = worst_violation(&sol, bounds) {
            active[k] = true;
            continue;
        }
        if let Some(k) = worst_multiplier(&sol) {
            active[k] = false;
            continue;
        }
        return Ok(sol);
    }
    enumerate_working_sets(h, g, a, b, bounds)
}

/// Exhaustive fallback for cycling or singular working sets. Convexity makes
/// the KKT point unique in `d`, so the first consistent working set wins.
fn enumerate_working_sets(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    bounds: &[LowerBound],
) -> Result<QpSolution, QpError> {
    let nb = bounds.len();
    if nb > 16 {
        return Err(QpError::QpInfeasible);
    }
    let mut order: Vec<u64> = (0..(1u64 << nb)).collect();
    order.sort_by_key(|m| m.count_ones());
    for m in order {
        let active: Vec<bool> = (0..nb).map(|k| m & (1 << k) != 0).collect();
        if let Some(sol) = solve_working_set(h, g, a, b, bounds, &active) {
            if worst_violation(&sol, bounds).is_none() && worst_multiplier(&sol).is_none() {
                return Ok(sol);
            }
        }
    }
    Err(QpError::QpInfeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unconstrained_minimum_at_origin() {
        let h = DMatrix::identity(3, 3);
        let sol = qp_subproblem(&h, &DVector::zeros(3), &DMatrix::zeros(0, 3), &DVector::zeros(0), &[], &[]).unwrap();
        assert_eq!(sol.step, DVector::zeros(3));
    }

    #[test]
    fn single_equality_by_hand() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![1.0, 0.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let sol = qp_subproblem(&h, &g, &a, &DVector::zeros(1), &[], &[]).unwrap();
        assert!(sol.step.amax() < 1e-15);
        assert_relative_eq!(sol.eq_multipliers[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bound_becomes_active() {
        // min 0.5|d|^2 + d0 - d1 with d0 >= 0.5: optimum d = (0.5, 1), pi = 1.5.
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![1.0, -1.0]);
        let bounds = [LowerBound { index: 0, lower: 0.5 }];
        let sol = qp_subproblem(&h, &g, &DMatrix::zeros(0, 2), &DVector::zeros(0), &bounds, &[false]).unwrap();
        assert_relative_eq!(sol.step, DVector::from_vec(vec![0.5, 1.0]), epsilon = 1e-14);
        assert_relative_eq!(sol.bound_multipliers[0], 1.5, epsilon = 1e-14);
        assert!(sol.active[0]);
    }

    #[test]
    fn wrongly_seeded_bound_is_dropped() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![-1.0, 0.0]);
        let bounds = [LowerBound { index: 0, lower: 0.0 }];
        let sol = qp_subproblem(&h, &g, &DMatrix::zeros(0, 2), &DVector::zeros(0), &bounds, &[true]).unwrap();
        assert_relative_eq!(sol.step[0], 1.0, epsilon = 1e-14);
        assert!(!sol.active[0]);
        assert_eq!(sol.bound_multipliers[0], 0.0);
    }

    #[test]
    fn inconsistent_constraints_are_infeasible() {
        // d0 = 1 and d0 >= 2 cannot both hold.
        let h = DMatrix::identity(1, 1);
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = DVector::from_vec(vec![-1.0]);
        let bounds = [LowerBound { index: 0, lower: 2.0 }];
        let err = qp_subproblem(&h, &DVector::zeros(1), &a, &b, &bounds, &[false]).unwrap_err();
        assert_eq!(err, QpError::QpInfeasible);
    }
}
