//! Objective, constraints and Lagrangian curvature of the allocation NLP.
//!
//! The decision vector is `z = [T_1..T_n, alpha_1, .., alpha_n]` (length
//! `4n`). The objective is `0.5 sum T_i^2 + mu sum_{i<j} (alpha_i . alpha_j)^2`,
//! subject to `sum T_i alpha_i + u_L = 0`, `|alpha_i|^2 - 1 = 0` and
//! `T_i >= 0`.

use nalgebra::{DMatrix, DVector};

use crate::math::Vec3;

/// Number of agents encoded in a decision vector.
pub fn agents(z: &DVector<f64>) -> usize {
    debug_assert_eq!(z.len() % 4, 0);
    z.len() / 4
}

#[inline]
pub fn dir_offset(n: usize, i: usize) -> usize {
    n + 3 * i
}

pub fn direction(z: &DVector<f64>, i: usize) -> Vec3 {
    let b = dir_offset(agents(z), i);
    Vec3::new(z[b], z[b + 1], z[b + 2])
}

pub fn pack(tensions: &[f64], dirs: &[Vec3]) -> DVector<f64> {
    let n = tensions.len();
    assert_eq!(n, dirs.len());
    let mut z = DVector::zeros(4 * n);
    for i in 0..n {
        z[i] = tensions[i];
        z.fixed_rows_mut::<3>(dir_offset(n, i)).copy_from(&dirs[i]);
    }
    z
}

/// Objective value and gradient.
pub fn eval_objective(z: &DVector<f64>, mu: f64) -> (f64, DVector<f64>) {
    let n = agents(z);
    let dirs: Vec<Vec3> = (0..n).map(|i| direction(z, i)).collect();
    let mut grad = DVector::zeros(4 * n);
    let mut value = 0.0;
    for i in 0..n {
        value += 0.5 * z[i] * z[i];
        grad[i] = z[i];
    }
    for i in 0..n {
        let mut g = Vec3::zeros();
        for j in 0..n {
            if j == i {
                continue;
            }
            let c = dirs[i].dot(&dirs[j]);
            g += dirs[j] * (2.0 * mu * c);
            if j > i {
                value += mu * c * c;
            }
        }
        grad.fixed_rows_mut::<3>(dir_offset(n, i)).copy_from(&g);
    }
    (value, grad)
}

/// Equality residuals `[force balance (3); unit norms (n)]` and their Jacobian.
pub fn constraints(z: &DVector<f64>, u_l: &Vec3) -> (DVector<f64>, DMatrix<f64>) {
    let n = agents(z);
    let mut c = DVector::zeros(3 + n);
    let mut jac = DMatrix::zeros(3 + n, 4 * n);
    let mut force = *u_l;
    for i in 0..n {
        let t = z[i];
        let a = direction(z, i);
        let b = dir_offset(n, i);
        force += a * t;
        c[3 + i] = a.norm_squared() - 1.0;
        for k in 0..3 {
            jac[(k, i)] = a[k];
            jac[(k, b + k)] = t;
            jac[(3 + i, b + k)] = 2.0 * a[k];
        }
    }
    c.fixed_rows_mut::<3>(0).copy_from(&force);
    (c, jac)
}

/// Hessian of the objective alone.
pub fn objective_hessian(z: &DVector<f64>, mu: f64) -> DMatrix<f64> {
    let n = agents(z);
    let dirs: Vec<Vec3> = (0..n).map(|i| direction(z, i)).collect();
    let mut h = DMatrix::zeros(4 * n, 4 * n);
    for i in 0..n {
        h[(i, i)] = 1.0;
    }
    if mu == 0.0 {
        return h;
    }
    for i in 0..n {
        let bi = dir_offset(n, i);
        for j in 0..n {
            let bj = dir_offset(n, j);
            let block = if i == j {
                let mut s = nalgebra::Matrix3::zeros();
                for (k, d) in dirs.iter().enumerate() {
                    if k != i {
                        s += d * d.transpose();
                    }
                }
                s * (2.0 * mu)
            } else {
                (nalgebra::Matrix3::identity() * dirs[i].dot(&dirs[j]) + dirs[j] * dirs[i].transpose()) * (2.0 * mu)
            };
            h.view_mut((bi, bj), (3, 3)).copy_from(&block);
        }
    }
    h
}

/// Hessian of `J - y^T c` where `y = [force multipliers (3); norm multipliers (n)]`.
pub fn lagrangian_hessian(z: &DVector<f64>, mu: f64, y: &DVector<f64>) -> DMatrix<f64> {
    let n = agents(z);
    let mut h = objective_hessian(z, mu);
    for i in 0..n {
        let b = dir_offset(n, i);
        for k in 0..3 {
            h[(i, b + k)] -= y[k];
            h[(b + k, i)] -= y[k];
            h[(b + k, b + k)] -= 2.0 * y[3 + i];
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parallel_pair() {
        let z = pack(&[1.0, 1.0], &[Vec3::z(), Vec3::z()]);
        let (j, g) = eval_objective(&z, 0.15);
        assert_relative_eq!(j, 1.15, epsilon = 1e-15);
        assert_relative_eq!(direction(&g, 0), Vec3::z() * 0.3, epsilon = 1e-15);
        assert_eq!(g[0], 1.0);
    }

    #[test]
    fn orthogonal_directions_have_no_penalty() {
        let z = pack(&[0.5, 2.0, 1.0], &[Vec3::x(), Vec3::y(), Vec3::z()]);
        let (j, g) = eval_objective(&z, 1.7);
        assert_relative_eq!(j, 0.5 * (0.25 + 4.0 + 1.0), epsilon = 1e-15);
        for i in 0..3 {
            assert_eq!(direction(&g, i), Vec3::zeros());
        }
    }

    #[test]
    fn single_cable_is_feasible() {
        let u = Vec3::new(0.3, -1.2, -2.0);
        let z = pack(&[u.norm()], &[-u / u.norm()]);
        let (c, _) = constraints(&z, &u);
        assert!(c.amax() < 1e-15);
    }

    #[test]
    fn stretched_direction_norm_row() {
        let z = pack(&[1.0], &[Vec3::z() * 1.1]);
        let (c, _) = constraints(&z, &Vec3::new(0.0, 0.0, -1.1));
        assert_relative_eq!(c[3], 0.21, epsilon = 1e-14);
        assert!(c.rows(0, 3).amax() < 1e-15);
    }

    #[test]
    fn jacobian_is_block_structured() {
        let z = pack(&[1.0, 2.0], &[Vec3::x(), Vec3::z()]);
        let (_, a) = constraints(&z, &Vec3::zeros());
        // Norm row of cable 0 touches only its own direction block.
        assert_eq!(a.row(3).iter().filter(|x| **x != 0.0).count(), 1);
        assert_eq!(a[(3, 2)], 2.0);
        assert_eq!(a[(4, 4)], 0.0);
        assert_eq!(a[(2, 7)], 2.0);
    }
}
