//! Proximal iterative hard thresholding with sparse-group thresholding, its
//! stopping rule, and runtime checks of the convergence guarantees.
//!
//! One iteration from `x` computes the gradient step `s = x - tau grad f(x)`,
//! the box-aware element threshold `z = H(s; 2 lambda tau)`, and then decides
//! group by group whether to keep `z_G` (see [`prox_sparse_group_parts`]).
//! With `mu = 0` every surviving group is kept and the method is plain PIHT.

use std::time::Instant;

use thiserror::Error;

use crate::linalg::{dist2, norm2, norm_inf};
use crate::model::{
    check_dim, count_norms, phi_with_value, support, BoxConstraint, GroupPartition, IterateRecord,
    ModelError, RegularizationParams, SmoothObjective, SolveTrace, TerminationStatus,
};
use crate::prox::{project_box, prox_sparse_group, prox_sparse_group_parts, DeltaBound};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("gradient has a non-finite entry at index {index}")]
    NonFiniteGradient { index: usize },
    #[error("step fraction must lie in (0, 1), got {0}")]
    TauFraction(f64),
    #[error("objective smoothness constant must be positive and finite, got {0}")]
    Smoothness(f64),
    #[error("trace has no per-iteration records; solve with record_trace enabled")]
    MissingRecords,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauPolicy {
    Explicit(f64),
    /// `tau = fraction / L`.
    FractionOfInverseL(f64),
}

impl Default for TauPolicy {
    fn default() -> Self {
        Self::FractionOfInverseL(0.99)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu: f64,
    pub tau_policy: TauPolicy,
    /// Stop when `||x^k - x^{k-1}|| / max(1, ||x^k||)` falls to this.
    pub rel_change_tol: f64,
    /// Stop when `f(x^k)` falls to this. `-inf` disables the test.
    pub objective_target: f64,
    pub max_iterations: usize,
    pub record_trace: bool,
    pub stationarity_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            mu: 0.01,
            tau_policy: TauPolicy::default(),
            rel_change_tol: 1e-6,
            objective_target: f64::NEG_INFINITY,
            max_iterations: 100,
            record_trace: false,
            stationarity_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn with_weights(lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            ..Self::default()
        }
    }

    /// Resolves the step size against smoothness constant `l`.
    pub fn params(&self, l: f64) -> Result<RegularizationParams, SolverError> {
        let tau = match self.tau_policy {
            TauPolicy::Explicit(tau) => tau,
            TauPolicy::FractionOfInverseL(fraction) => {
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(SolverError::TauFraction(fraction));
                }
                if !(l > 0.0 && l.is_finite()) {
                    return Err(SolverError::Smoothness(l));
                }
                fraction / l
            }
        };
        Ok(RegularizationParams::new(self.lambda, self.mu, tau)?)
    }
}

/// Intermediate quantities of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateDiagnostics {
    /// `x - tau grad f(x)`
    pub s_tau: Vec<f64>,
    /// `project_box(s_tau) - s_tau`
    pub d_tau: Vec<f64>,
    /// Element-thresholded point before the group decision.
    pub z: Vec<f64>,
}

fn gradient_step(x: &[f64], grad: &[f64], tau: f64) -> Result<Vec<f64>, SolverError> {
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(SolverError::NonFiniteGradient { index });
    }
    Ok(x.iter().zip(grad).map(|(xi, gi)| xi - tau * gi).collect())
}

/// One iteration from `x`.
pub fn step<O: SmoothObjective + ?Sized>(
    x: &[f64],
    objective: &O,
    params: &RegularizationParams,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
) -> Result<(Vec<f64>, IterateDiagnostics), SolverError> {
    check_inputs(x, objective, bounds, partition)?;
    let s_tau = gradient_step(x, &objective.gradient(x), params.tau)?;
    let d_tau = project_box(&s_tau, bounds)
        .iter()
        .zip(&s_tau)
        .map(|(p, s)| p - s)
        .collect();
    let (z, next) = prox_sparse_group_parts(&s_tau, params, bounds, partition);
    Ok((next, IterateDiagnostics { s_tau, d_tau, z }))
}

fn check_inputs<O: SmoothObjective + ?Sized>(
    x: &[f64],
    objective: &O,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
) -> Result<(), ModelError> {
    check_dim(objective.dim(), x.len())?;
    check_dim(bounds.dim(), x.len())?;
    check_dim(partition.dim(), x.len())
}

fn min_nonzero_magnitude(x: &[f64]) -> f64 {
    x.iter()
        .filter(|v| **v != 0.0)
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

fn same_support(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (*x != 0.0) == (*y != 0.0))
}

fn record(
    k: usize,
    x: &[f64],
    phi: f64,
    step_norm: f64,
    partition: &GroupPartition,
    start: Instant,
) -> IterateRecord {
    let (l0, l20) = count_norms(x, partition);
    IterateRecord {
        k,
        phi,
        step_norm,
        support: support(x),
        l0,
        l20,
        min_nonzero: min_nonzero_magnitude(x),
        elapsed: start.elapsed(),
    }
}

/// Runs the iteration from `x0` (projected onto the box first) until one of
/// the stopping tests fires.
pub fn solve<O: SmoothObjective + ?Sized>(
    objective: &O,
    config: &SolverConfig,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
    x0: &[f64],
) -> Result<SolveTrace, SolverError> {
    check_inputs(x0, objective, bounds, partition)?;
    let lipschitz = objective.smoothness();
    let params = config.params(lipschitz)?;
    let mut warnings = Vec::new();
    if params.tau * lipschitz >= 1.0 {
        warnings.push(format!(
            "tau * L = {} >= 1: sufficient decrease and convergence are not guaranteed",
            params.tau * lipschitz
        ));
    }

    let start = Instant::now();
    let mut x = project_box(x0, bounds);
    let (mut f, mut grad) = objective.value_and_gradient(&x);
    let initial_phi = phi_with_value(f, &x, &params, bounds, partition);
    let mut current_phi;
    let mut records = Vec::new();
    if config.record_trace {
        records.push(record(0, &x, initial_phi, 0.0, partition, start));
    }

    let mut k = 0;
    let mut support_changes = 0;
    let status = loop {
        let s = gradient_step(&x, &grad, params.tau)?;
        let next = prox_sparse_group(&s, &params, bounds, partition);
        k += 1;
        let step_norm = dist2(&next, &x);
        if !same_support(&next, &x) {
            support_changes += 1;
        }
        x = next;
        (f, grad) = objective.value_and_gradient(&x);
        current_phi = phi_with_value(f, &x, &params, bounds, partition);
        if config.record_trace {
            records.push(record(k, &x, current_phi, step_norm, partition, start));
        }

        if step_norm / norm2(&x).max(1.0) <= config.rel_change_tol {
            break TerminationStatus::RelativeChange;
        }
        if f <= config.objective_target {
            break TerminationStatus::ObjectiveTarget;
        }
        if k >= config.max_iterations {
            break TerminationStatus::MaxIterations;
        }
    };

    Ok(SolveTrace {
        records,
        status,
        final_iterate: x,
        iterations: k,
        initial_phi,
        final_phi: current_phi,
        support_changes,
        tau: params.tau,
        elapsed: start.elapsed(),
        warnings,
    })
}

/// `x` is feasible and reproduces itself under one prox-gradient step, to
/// `tol (1 + ||x||_inf)` in the max norm.
pub fn check_tau_stationary<O: SmoothObjective + ?Sized>(
    x: &[f64],
    objective: &O,
    params: &RegularizationParams,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
    tol: f64,
) -> bool {
    if check_inputs(x, objective, bounds, partition).is_err() || !bounds.contains(x) {
        return false;
    }
    let Ok(s) = gradient_step(x, &objective.gradient(x), params.tau) else {
        return false;
    };
    let p = prox_sparse_group(&s, params, bounds, partition);
    let gap = x
        .iter()
        .zip(&p)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    gap <= tol * (1.0 + norm_inf(x))
}

/// Result of checking the per-step decrease
/// `phi(x^{k-1}) - phi(x^k) >= (1/tau - L)/2 ||x^k - x^{k-1}||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseAudit {
    pub holds: bool,
    /// Iterate indices `k` whose arrival step violated the inequality.
    pub failed_steps: Vec<usize>,
    /// Smallest `drop - required` over all steps.
    pub worst_margin: f64,
}

pub fn verify_sufficient_decrease(
    trace: &SolveTrace,
    lipschitz: f64,
    tau: f64,
) -> Result<DecreaseAudit, SolverError> {
    if trace.records.is_empty() {
        return Err(SolverError::MissingRecords);
    }
    let eta = (1.0 / tau - lipschitz) / 2.0;
    let mut failed_steps = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for pair in trace.records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let drop = prev.phi - cur.phi;
        let required = eta * cur.step_norm * cur.step_norm;
        let margin = drop - required;
        worst_margin = worst_margin.min(margin);
        let slack = 1e-10 * (1.0 + prev.phi.abs());
        if !(margin >= -slack) {
            failed_steps.push(cur.k);
        }
    }
    Ok(DecreaseAudit {
        holds: failed_steps.is_empty(),
        failed_steps,
        worst_margin,
    })
}

/// Support-change count against its theoretical cap, plus the magnitude
/// floor on nonzero coordinates and on steps that change the support.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportAudit {
    pub change_count: usize,
    /// `2 (phi(x^0) - phi_final) / (delta^2 (1/tau - L))`
    pub bound: f64,
    pub within_bound: bool,
    /// Every nonzero coordinate of every iterate `k >= 1` has magnitude `>= delta`.
    pub magnitudes_above_delta: bool,
    /// Every support-changing step taken from an iterate `k >= 1` has length `>= delta`.
    pub change_steps_above_delta: bool,
    /// The final objective only approximates the limit because the run was capped.
    pub approximate: bool,
}

impl SupportAudit {
    pub fn passed(&self) -> bool {
        self.within_bound && self.magnitudes_above_delta && self.change_steps_above_delta
    }
}

pub fn support_change_audit(
    trace: &SolveTrace,
    delta: &DeltaBound,
    lipschitz: f64,
    tau: f64,
) -> Result<SupportAudit, SolverError> {
    let records = &trace.records;
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return Err(SolverError::MissingRecords);
    };
    let d = delta.delta;
    let mut change_count = 0;
    let mut change_steps_above_delta = true;
    for pair in records.windows(2) {
        if pair[0].support != pair[1].support {
            change_count += 1;
            if pair[0].k >= 1 && pair[1].step_norm < d {
                change_steps_above_delta = false;
            }
        }
    }
    let magnitudes_above_delta = records.iter().skip(1).all(|r| r.min_nonzero >= d);
    let bound = 2.0 * (first.phi - last.phi) / (d * d * (1.0 / tau - lipschitz));
    Ok(SupportAudit {
        change_count,
        bound,
        within_bound: change_count as f64 <= bound,
        magnitudes_above_delta,
        change_steps_above_delta,
        approximate: trace.status == TerminationStatus::MaxIterations,
    })
}
