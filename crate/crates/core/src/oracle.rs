//! Brute-force reference solvers for small instances.
//!
//! These enumerate supports directly and share no code path with the closed
//! forms in [`crate::prox`] beyond the box clamp and the norm counts.

use thiserror::Error;

use crate::linalg::norm2;
use crate::model::{
    check_dim, count_norms, phi, BoxConstraint, GroupPartition, ModelError, RegularizationParams,
    SmoothObjective,
};

pub const MAX_PROX_DIM: usize = 16;
pub const MAX_GLOBAL_DIM: usize = 12;
const PGD_GRADIENT_MAP_TOL: f64 = 1e-12;
const PGD_MAX_ITERS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dimension {n} exceeds the enumeration limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `Psi(x; s) = 1/2 ||x - s||^2 + tau lambda ||x||_0 + tau mu ||x||_{2,0}`,
/// `+inf` outside the box.
pub fn psi(
    x: &[f64],
    s: &[f64],
    params: &RegularizationParams,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
) -> f64 {
    if !bounds.contains(x) {
        return f64::INFINITY;
    }
    let quad: f64 = x.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum();
    let (l0, l20) = count_norms(x, partition);
    0.5 * quad + params.tau * (params.lambda * l0 as f64 + params.mu * l20 as f64)
}

fn restrict(v: f64, l: f64, u: f64) -> f64 {
    if v < -l {
        -l
    } else if v > u {
        u
    } else {
        v
    }
}

/// Minimizes `Psi(. ; s)` over all `2^n` supports. For a fixed support the
/// smooth part is separable, so the restricted minimizer is the clamp of `s`
/// on the support and zero elsewhere.
///
/// Ties go to the smaller `||x||_0`, then the smaller `||x||_{2,0}`, then the
/// candidate whose zero pattern comes first lexicographically.
pub fn brute_force_prox(
    s: &[f64],
    params: &RegularizationParams,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
) -> Result<(Vec<f64>, f64), OracleError> {
    let n = s.len();
    if n > MAX_PROX_DIM {
        return Err(OracleError::TooLarge { n, limit: MAX_PROX_DIM });
    }
    check_dim(bounds.dim(), n)?;
    check_dim(partition.dim(), n)?;

    let mut best: Option<(Vec<f64>, f64, (usize, usize))> = None;
    for mask in 0u32..(1u32 << n) {
        let candidate: Vec<f64> = (0..n)
            .map(|i| {
                if mask & (1 << i) != 0 {
                    restrict(s[i], bounds.lower()[i], bounds.upper()[i])
                } else {
                    0.0
                }
            })
            .collect();
        let value = psi(&candidate, s, params, bounds, partition);
        let counts = count_norms(&candidate, partition);
        let better = match &best {
            None => true,
            Some((bx, bv, bc)) => {
                value < *bv
                    || (value == *bv
                        && (counts < *bc || (counts == *bc && more_zeros_first(&candidate, bx))))
            }
        };
        if better {
            best = Some((candidate, value, counts));
        }
    }
    let (x, value, _) = best.expect("at least the empty support is enumerated");
    Ok((x, value))
}

fn more_zeros_first(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match (*x == 0.0, *y == 0.0) {
            (true, false) => return true,
            (false, true) => return false,
            _ => {}
        }
    }
    false
}

/// Projected gradient descent with step `1/L` on `f` restricted to the box
/// and to the coordinates in `mask`.
fn restricted_minimize<O: SmoothObjective + ?Sized>(
    objective: &O,
    bounds: &BoxConstraint,
    mask: u32,
) -> Vec<f64> {
    let n = objective.dim();
    let l = objective.smoothness();
    let project = |v: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend((0..n).map(|i| {
            if mask & (1 << i) != 0 {
                restrict(v[i], bounds.lower()[i], bounds.upper()[i])
            } else {
                0.0
            }
        }));
    };
    let mut x = vec![0.0; n];
    let mut next = Vec::with_capacity(n);
    for _ in 0..PGD_MAX_ITERS {
        let g = objective.gradient(&x);
        let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gi / l).collect();
        project(&trial, &mut next);
        let map_norm = l * x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut x, &mut next);
        if map_norm <= PGD_GRADIENT_MAP_TOL {
            break;
        }
    }
    x
}

/// Global minimizer of `phi` by enumerating all supports and minimizing the
/// (convex) loss on each one.
pub fn brute_force_global_min<O: SmoothObjective + ?Sized>(
    objective: &O,
    params: &RegularizationParams,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
) -> Result<(Vec<f64>, f64), OracleError> {
    let n = objective.dim();
    if n > MAX_GLOBAL_DIM {
        return Err(OracleError::TooLarge { n, limit: MAX_GLOBAL_DIM });
    }
    check_dim(bounds.dim(), n)?;
    check_dim(partition.dim(), n)?;

    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1u32 << n) {
        let x = restricted_minimize(objective, bounds, mask);
        let value = phi(&x, objective, params, bounds, partition)?;
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((x, value));
        }
    }
    Ok(best.expect("at least the empty support is enumerated"))
}

/// Support-optimality test: `x` minimizes `f` over feasible points whose
/// support lies inside `supp(x)`. Checked as the fixed-point condition
/// `x = P(x - grad f(x) / L)` in the max norm, where `P` clamps to the box on
/// `supp(x)` and zeroes the rest. For convex `f` this certifies optimality.
pub fn so_point_check<O: SmoothObjective + ?Sized>(
    x: &[f64],
    objective: &O,
    bounds: &BoxConstraint,
    tol: f64,
) -> bool {
    if x.len() != objective.dim() || !bounds.contains(x) {
        return false;
    }
    let l = objective.smoothness();
    let g = objective.gradient(x);
    let mut gap = 0.0f64;
    for i in 0..x.len() {
        let projected = if x[i] != 0.0 {
            restrict(x[i] - g[i] / l, bounds.lower()[i], bounds.upper()[i])
        } else {
            0.0
        };
        gap = gap.max((projected - x[i]).abs());
    }
    gap <= tol
}

/// Euclidean norm of the restricted gradient map, exposed for diagnostics.
pub fn so_residual<O: SmoothObjective + ?Sized>(x: &[f64], objective: &O, bounds: &BoxConstraint) -> f64 {
    let l = objective.smoothness();
    let g = objective.gradient(x);
    let r: Vec<f64> = (0..x.len())
        .map(|i| {
            let p = if x[i] != 0.0 {
                restrict(x[i] - g[i] / l, bounds.lower()[i], bounds.upper()[i])
            } else {
                0.0
            };
            p - x[i]
        })
        .collect();
    norm2(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::objectives::{make_least_squares, SeparableQuadratic};

    #[test]
    fn prox_oracle_reference_instance() {
        let p = GroupPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let b = BoxConstraint::symmetric(3, 10.0).unwrap();
        let params = RegularizationParams::new(0.5, 1.5, 1.0).unwrap();
        let (x, v) = brute_force_prox(&[3.0, 0.1, 1.2], &params, &b, &p).unwrap();
        assert_eq!(x, vec![3.0, 0.0, 0.0]);
        assert!((v - 2.725).abs() < 1e-12);
    }

    #[test]
    fn prox_oracle_trivial_cases() {
        let p = GroupPartition::contiguous(4, 2).unwrap();
        let b = BoxConstraint::symmetric(4, 3.0).unwrap();
        let params = RegularizationParams::new(0.3, 0.2, 1.0).unwrap();
        assert_eq!(brute_force_prox(&[0.0; 4], &params, &b, &p).unwrap(), (vec![0.0; 4], 0.0));

        let free = RegularizationParams::new(0.0, 0.0, 1.0).unwrap();
        let s = [1.0, -2.0, 0.5, 2.5];
        assert_eq!(brute_force_prox(&s, &free, &b, &p).unwrap(), (s.to_vec(), 0.0));
    }

    #[test]
    fn prox_oracle_rejects_large_inputs() {
        let n = MAX_PROX_DIM + 1;
        let params = RegularizationParams::new(0.1, 0.1, 1.0).unwrap();
        let r = brute_force_prox(
            &vec![0.0; n],
            &params,
            &BoxConstraint::unbounded(n),
            &GroupPartition::singletons(n),
        );
        assert_eq!(r, Err(OracleError::TooLarge { n, limit: MAX_PROX_DIM }));
    }

    #[test]
    fn global_min_at_origin() {
        let f = SeparableQuadratic::new(vec![0.0; 3]);
        let params = RegularizationParams::new(0.2, 0.4, 0.5).unwrap();
        let (x, v) = brute_force_global_min(
            &f,
            &params,
            &BoxConstraint::symmetric(3, 1.0).unwrap(),
            &GroupPartition::singletons(3),
        )
        .unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn global_min_unpenalized_least_squares() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let truth = [0.5, -1.0];
        let b = a.mul_vec(&truth);
        let f = make_least_squares(a, b).unwrap();
        let params = RegularizationParams::new(0.0, 0.0, 0.1).unwrap();
        let (x, v) = brute_force_global_min(
            &f,
            &params,
            &BoxConstraint::symmetric(2, 100.0).unwrap(),
            &GroupPartition::singletons(2),
        )
        .unwrap();
        assert!((x[0] - 0.5).abs() < 1e-10 && (x[1] + 1.0).abs() < 1e-10, "{x:?}");
        assert!(v.abs() < 1e-20);
    }

    #[test]
    fn so_check_detects_perturbation() {
        let f = SeparableQuadratic::new(vec![2.0, 0.0, -0.5]);
        let b = BoxConstraint::symmetric(3, 1.0).unwrap();
        assert!(so_point_check(&[1.0, 0.0, -0.5], &f, &b, 1e-12));
        assert!(so_point_check(&[1.0, 0.0, 0.0], &f, &b, 1e-12));
        assert!(!so_point_check(&[0.7, 0.0, -0.5], &f, &b, 1e-6));
        assert!(!so_point_check(&[1.5, 0.0, 0.0], &f, &b, 1e-6));

        let zero = SeparableQuadratic::new(vec![0.0; 3]);
        assert!(so_point_check(&[0.0; 3], &zero, &b, 0.0));
    }
}
