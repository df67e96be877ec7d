//! Closed-form proximal and thresholding operators.
//!
//! The penalty is `tau (lambda ||x||_0 + mu ||x||_{2,0})` plus the indicator
//! of the box, so its prox at `s` minimizes
//!
//! ```text
//! Psi(x; s) = 1/2 ||x - s||^2 + tau lambda ||x||_0 + tau mu ||x||_{2,0} + delta_box(x)
//! ```
//!
//! Everything here writes literal `0.0` for discarded coordinates, and every
//! threshold comparison is strict, so boundary ties resolve to zero.

use thiserror::Error;

use crate::model::{BoxConstraint, GroupPartition, RegularizationParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error("lambda * tau must be positive for the magnitude bound, got {0}")]
    DegenerateThreshold(f64),
    #[error("every coordinate is forced to zero by the box")]
    AllForcedZero,
}

/// Componentwise clamp of `s` onto `[-l, u]`.
pub fn project_box(s: &[f64], bounds: &BoxConstraint) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    project_box_into(s, bounds, &mut out);
    out
}

pub fn project_box_into(s: &[f64], bounds: &BoxConstraint, out: &mut [f64]) {
    assert_eq!(s.len(), bounds.dim());
    assert_eq!(out.len(), s.len());
    for (((o, &si), &l), &u) in out.iter_mut().zip(s).zip(bounds.lower()).zip(bounds.upper()) {
        *o = si.clamp(-l, u);
    }
}

/// Keeps coordinate `i` (at its projected value) iff removing it would cost
/// more than `gamma` in `||x - s||^2`. Returns `(x, gain)` where
/// `gain_i = s_i^2 - (p_i - s_i)^2`.
fn threshold_with_gain(s: &[f64], gamma: f64, bounds: &BoxConstraint) -> (Vec<f64>, Vec<f64>) {
    let p = project_box(s, bounds);
    let gain: Vec<f64> = s
        .iter()
        .zip(&p)
        .map(|(&si, &pi)| {
            let d = pi - si;
            si * si - d * d
        })
        .collect();
    let x = p
        .iter()
        .zip(&gain)
        .map(|(&pi, &g)| if g > gamma { pi } else { 0.0 })
        .collect();
    (x, gain)
}

/// Element-wise hard threshold over the box: `p_i` if
/// `s_i^2 - (p_i - s_i)^2 > gamma`, else `0`, with `p = project_box(s)`.
///
/// With `gamma = 2 lambda tau` this is a member of the prox of
/// `tau lambda ||.||_0 + delta_box`.
pub fn hard_threshold_l0(s: &[f64], gamma: f64, bounds: &BoxConstraint) -> Vec<f64> {
    threshold_with_gain(s, gamma, bounds).0
}

/// Group hard threshold: `z` if `||z|| > gamma`, else zeros.
pub fn hard_threshold_group(z: &[f64], gamma: f64) -> Vec<f64> {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > gamma {
        z.to_vec()
    } else {
        vec![0.0; z.len()]
    }
}

/// Group threshold radius `sqrt(2 tau (lambda k + mu))` for a group with `k`
/// surviving coordinates.
pub fn group_threshold(params: &RegularizationParams, k: usize) -> f64 {
    (2.0 * params.tau * (params.lambda * k as f64 + params.mu)).sqrt()
}

/// Sparse-group prox. Returns `(z, x)` where `z` is the element-wise
/// thresholded point and `x` the final output.
///
/// A group keeps `z_G` iff doing so lowers `Psi`, i.e. iff
/// `sum_{j in G, z_j != 0} (gain_j - 2 lambda tau) > 2 tau mu`. When no
/// coordinate of the group is clipped by the box, `gain_j = z_j^2` and this
/// is exactly `hard_threshold_group(z_G, group_threshold(params, ||z_G||_0))`.
/// When clipping is active the norm test alone underestimates the benefit of
/// keeping the group, so the gain form is used throughout.
pub fn prox_sparse_group_parts(
    s: &[f64],
    params: &RegularizationParams,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(s.len(), partition.dim());
    let gamma = params.element_threshold();
    let group_price = 2.0 * params.tau * params.mu;
    let (z, gain) = threshold_with_gain(s, gamma, bounds);
    let mut x = z.clone();
    for group in partition.iter() {
        let surplus: f64 = group
            .iter()
            .filter(|&&j| z[j] != 0.0)
            .map(|&j| gain[j] - gamma)
            .sum();
        if surplus <= group_price {
            for &j in group {
                x[j] = 0.0;
            }
        }
    }
    (z, x)
}

/// A minimizer of `Psi(. ; s)`.
pub fn prox_sparse_group(
    s: &[f64],
    params: &RegularizationParams,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
) -> Vec<f64> {
    prox_sparse_group_parts(s, params, bounds, partition).1
}

/// Lower bound on the magnitude of any nonzero coordinate the element-wise
/// threshold can produce.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaBound {
    pub delta: f64,
    /// `per_coordinate[i]` is `None` for forced-zero coordinates.
    pub per_coordinate: Vec<Option<f64>>,
    pub forced_zero: Vec<usize>,
}

pub fn compute_delta(bounds: &BoxConstraint, lambda: f64, tau: f64) -> Result<DeltaBound, ProxError> {
    let lt = lambda * tau;
    if !(lt > 0.0) {
        return Err(ProxError::DegenerateThreshold(lt));
    }
    let root = (2.0 * lt).sqrt();
    let per_coordinate: Vec<Option<f64>> = bounds
        .lower()
        .iter()
        .zip(bounds.upper())
        .map(|(&l, &u)| match (l == 0.0, u == 0.0) {
            (true, true) => None,
            (true, false) => Some(u.min(root)),
            (false, true) => Some(l.min(root)),
            (false, false) => Some(l.min(u).min(root)),
        })
        .collect();
    let delta = per_coordinate
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if delta == f64::INFINITY {
        return Err(ProxError::AllForcedZero);
    }
    Ok(DeltaBound {
        delta,
        per_coordinate,
        forced_zero: bounds.forced_zero_set(),
    })
}
