//! Non-optimized reference allocator: cable directions follow a fixed
//! world-frame cone and only tension magnitudes are solved for.

use nalgebra::{DMatrix, DVector};

use super::{orthonormal_basis, AllocError, AllocSolution, SolveStatus};
use crate::math::{UnitVec3, Vec3};

/// `n` directions at equal azimuths around `axis`, tilted by `half_angle` (rad).
pub fn cone_directions(axis: &UnitVec3, n: usize, half_angle: f64) -> Vec<UnitVec3> {
    let (b1, b2) = orthonormal_basis(axis);
    let (s, c) = half_angle.sin_cos();
    (0..n)
        .map(|i| {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let v = **axis * c + (b1 * phi.cos() + b2 * phi.sin()) * s;
            UnitVec3::new_normalize(v).expect("cone direction is unit by construction")
        })
        .collect()
}

/// Minimum-norm tensions on the cone about `+e3`; negative tensions are
/// zeroed and the rest re-solved until all are non-negative.
pub fn baseline_allocate(u_l: &Vec3, n: usize, half_angle_deg: f64) -> Result<AllocSolution, AllocError> {
    if n == 0 {
        return Err(AllocError::NoAgents);
    }
    let directions = cone_directions(&UnitVec3::e3(), n, half_angle_deg.to_radians());
    let target = -u_l;
    let mut support: Vec<bool> = vec![true; n];
    let mut tensions = vec![0.0; n];
    loop {
        let cols: Vec<usize> = (0..n).filter(|&i| support[i]).collect();
        if cols.is_empty() {
            break;
        }
        let mut d = DMatrix::zeros(3, cols.len());
        for (c, &i) in cols.iter().enumerate() {
            d.set_column(c, &*directions[i]);
        }
        let pinv = d.pseudo_inverse(1e-12).map_err(|_| AllocError::BaselineInfeasible(f64::INFINITY))?;
        let t: DVector<f64> = pinv * DVector::from_column_slice(target.as_slice());
        tensions.iter_mut().for_each(|x| *x = 0.0);
        let mut negative = false;
        for (c, &i) in cols.iter().enumerate() {
            if t[c] < 0.0 {
                support[i] = false;
                negative = true;
            } else {
                tensions[i] = t[c];
            }
        }
        if !negative {
            break;
        }
    }

    let resultant = tensions
        .iter()
        .zip(&directions)
        .fold(Vec3::zeros(), |acc, (t, d)| acc + **d * *t);
    let residual = (resultant - target).norm();
    if residual > 1e-6 * u_l.norm().max(1.0) {
        return Err(AllocError::BaselineInfeasible(residual));
    }
    Ok(AllocSolution {
        tensions,
        directions,
        kkt_residual: residual,
        iterations: 0,
        status: SolveStatus::Converged,
        solve_time: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spread(sol: &AllocSolution) -> f64 {
        let max = sol.tensions.iter().cloned().fold(f64::MIN, f64::max);
        let min = sol.tensions.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    #[test]
    fn axial_demand_splits_evenly() {
        let sol = baseline_allocate(&Vec3::new(0.0, 0.0, -2.207), 4, 35.0).unwrap();
        for t in &sol.tensions {
            assert_relative_eq!(*t, sol.tensions[0], epsilon = 1e-12);
        }
        assert_relative_eq!(sol.resultant(), Vec3::new(0.0, 0.0, 2.207), epsilon = 1e-12);
    }

    #[test]
    fn lateral_demand_spreads_tensions() {
        let small = baseline_allocate(&Vec3::new(0.1, 0.0, -2.2), 4, 35.0).unwrap();
        let large = baseline_allocate(&Vec3::new(0.4, 0.0, -2.2), 4, 35.0).unwrap();
        assert!(spread(&small) > 0.0);
        assert!(spread(&large) > spread(&small));
    }

    #[test]
    fn clamps_negative_tensions() {
        // Strong lateral pull: the far cable would need to push.
        let sol = baseline_allocate(&Vec3::new(-0.6, 0.0, -1.0), 4, 35.0).unwrap();
        assert!(sol.tensions.iter().all(|&t| t >= 0.0));
        assert_eq!(sol.tensions[2], 0.0);
        assert_relative_eq!(sol.resultant(), Vec3::new(0.6, 0.0, 1.0), epsilon = 1e-9);
    }

    #[test]
    fn upward_demand_is_infeasible() {
        let err = baseline_allocate(&Vec3::new(0.0, 0.0, 2.0), 4, 35.0).unwrap_err();
        assert!(matches!(err, AllocError::BaselineInfeasible(_)));
    }
}
