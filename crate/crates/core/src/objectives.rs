//! Concrete smooth losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{axpy, dot, norm2, DenseMatrix};
use crate::model::SmoothObjective;

/// Multiplicative safety margin applied to the Lanczos estimate.
pub const SMOOTHNESS_INFLATION: f64 = 1.001;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("design has {rows} rows but observation has length {len}")]
    Dimension { rows: usize, len: usize },
    #[error("design matrix is empty")]
    Empty,
    #[error("design matrix is zero, no valid step size exists")]
    ZeroMatrix,
}

/// `f(x) = 1/2 ||A x - b||^2`.
#[derive(Debug, Clone)]
pub struct LeastSquaresObjective {
    design: DenseMatrix,
    observation: Vec<f64>,
    smoothness: f64,
}

pub fn make_least_squares(
    design: DenseMatrix,
    observation: Vec<f64>,
) -> Result<LeastSquaresObjective, ObjectiveError> {
    if design.rows() != observation.len() {
        return Err(ObjectiveError::Dimension {
            rows: design.rows(),
            len: observation.len(),
        });
    }
    let smoothness = estimate_smoothness(&design)?;
    Ok(LeastSquaresObjective {
        design,
        observation,
        smoothness,
    })
}

impl LeastSquaresObjective {
    pub fn design(&self) -> &DenseMatrix {
        &self.design
    }

    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.design.mul_vec(x);
        r.iter_mut().zip(&self.observation).for_each(|(ri, bi)| *ri -= bi);
        r
    }
}

impl SmoothObjective for LeastSquaresObjective {
    fn dim(&self) -> usize {
        self.design.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * dot(&r, &r)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let r = self.residual(x);
        (0.5 * dot(&r, &r), self.design.tr_mul_vec(&r))
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }
}

/// `f(x) = 1/2 ||x - c||^2`, with `L = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableQuadratic {
    pub center: Vec<f64>,
}

impl SeparableQuadratic {
    pub fn new(center: Vec<f64>) -> Self {
        Self { center }
    }
}

impl SmoothObjective for SeparableQuadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| a - c).collect()
    }

    fn smoothness(&self) -> f64 {
        1.0
    }

    fn strong_convexity(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Upper estimate of `||A^T A||_2` from Lanczos iteration with full
/// reorthogonalization on `v -> A^T (A v)`, inflated by
/// [`SMOOTHNESS_INFLATION`]. Stops when the top Ritz value changes by at most
/// `1e-10` relative or the Krylov space is exhausted.
///
/// The start vector is drawn from a fixed-seed generator so that repeated
/// calls agree and no structured matrix can make it orthogonal to the top
/// eigenvector by accident.
pub fn estimate_smoothness(design: &DenseMatrix) -> Result<f64, ObjectiveError> {
    let n = design.cols();
    if n == 0 || design.rows() == 0 {
        return Err(ObjectiveError::Empty);
    }
    if design.as_slice().iter().all(|&v| v == 0.0) {
        return Err(ObjectiveError::ZeroMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_1a_b0);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scale = norm2(&v);
    v.iter_mut().for_each(|x| *x /= scale);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut av = vec![0.0; design.rows()];
    let mut estimate = 0.0f64;
    for _ in 0..POWER_MAX_ITERS.min(n) {
        let mut w = vec![0.0; n];
        design.mul_vec_into(&v, &mut av);
        design.tr_mul_vec_into(&av, &mut w);
        alpha.push(dot(&w, &v));
        basis.push(v);
        // Two Gram-Schmidt passes keep the basis orthogonal to working precision.
        for _ in 0..2 {
            for q in &basis {
                axpy(-dot(&w, q), q, &mut w);
            }
        }
        let ritz = tridiagonal_max_eigenvalue(&alpha, &beta);
        let change = (ritz - estimate).abs();
        estimate = ritz;
        let b = norm2(&w);
        if change <= POWER_TOL * ritz || b <= f64::EPSILON * ritz {
            break;
        }
        beta.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
    if !(estimate > 0.0) {
        return Err(ObjectiveError::ZeroMatrix);
    }
    Ok(estimate * SMOOTHNESS_INFLATION)
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`, by Sturm-sequence bisection.
fn tridiagonal_max_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let radius = |i: usize| {
        let left = if i > 0 { beta[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < k { beta[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..k).map(|i| alpha[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..k).map(|i| alpha[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    // Number of eigenvalues strictly below `x`.
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..k {
            let off = if i > 0 { beta[i - 1] * beta[i - 1] / d } else { 0.0 };
            d = alpha[i] - x - off;
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    while hi - lo > 2.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) < k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
