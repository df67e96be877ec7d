//! Domain types shared across the crate: group partitions, box constraints,
//! regularization weights, the smooth-loss interface, and solve traces.
//!
//! Indices are zero-based throughout.

use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("index {index} appears in more than one group")]
    Overlap { index: usize },
    #[error("index {index} is not covered by any group")]
    Gap { index: usize },
    #[error("group {group} is empty")]
    EmptyGroup { group: usize },
    #[error("index {index} is out of range for dimension {n}")]
    OutOfRange { index: usize, n: usize },
    #[error("group width {width} does not divide dimension {n}")]
    Width { width: usize, n: usize },
    #[error("bound at index {index} must be non-negative, got {value}")]
    NegativeBound { index: usize, value: f64 },
    #[error("bound vectors have different lengths ({lower} vs {upper})")]
    BoundLengths { lower: usize, upper: usize },
    #[error("invalid regularization parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::Dimension { expected, got })
    }
}

/// Non-overlapping groups covering every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    n: usize,
}

impl GroupPartition {
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self, ModelError> {
        validate_partition(n, &groups)?;
        Ok(Self { groups, n })
    }

    /// Consecutive groups of `width` coordinates: {0..w}, {w..2w}, ...
    pub fn contiguous(n: usize, width: usize) -> Result<Self, ModelError> {
        if width == 0 || n % width != 0 {
            return Err(ModelError::Width { width, n });
        }
        let groups = (0..n / width)
            .map(|g| (g * width..(g + 1) * width).collect())
            .collect();
        Ok(Self { groups, n })
    }

    /// Every coordinate in its own group.
    pub fn singletons(n: usize) -> Self {
        Self {
            groups: (0..n).map(|i| vec![i]).collect(),
            n,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.groups.iter().map(Vec::as_slice)
    }
}

/// Accepts iff the groups are non-empty, pairwise disjoint and cover `0..n`.
pub fn validate_partition(n: usize, groups: &[Vec<usize>]) -> Result<(), ModelError> {
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(ModelError::EmptyGroup { group: g });
        }
        for &i in group {
            let slot = owner
                .get_mut(i)
                .ok_or(ModelError::OutOfRange { index: i, n })?;
            if slot.is_some() {
                return Err(ModelError::Overlap { index: i });
            }
            *slot = Some(g);
        }
    }
    match owner.iter().position(Option::is_none) {
        Some(index) => Err(ModelError::Gap { index }),
        None => Ok(()),
    }
}

/// Feasible set `{x : -lower <= x <= upper}` with non-negative, possibly
/// infinite, magnitudes. The origin is always feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraint {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxConstraint {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        if lower.len() != upper.len() {
            return Err(ModelError::BoundLengths {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        for (index, &value) in lower.iter().chain(upper.iter()).enumerate() {
            // NaN fails this test as well.
            if !(value >= 0.0) {
                return Err(ModelError::NegativeBound {
                    index: index % lower.len(),
                    value,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// `l = u = magnitude` in every coordinate.
    pub fn symmetric(n: usize, magnitude: f64) -> Result<Self, ModelError> {
        Self::new(vec![magnitude; n], vec![magnitude; n])
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Magnitudes `l`; coordinate `i` may go down to `-l[i]`.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&xi, (&l, &u))| -l <= xi && xi <= u)
    }

    /// Coordinates pinned to zero, `{i : l_i = u_i = 0}`.
    pub fn forced_zero_set(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.lower[i] == 0.0 && self.upper[i] == 0.0)
            .collect()
    }

    /// The common magnitude when `l = u` is constant, for labelling.
    pub fn uniform_magnitude(&self) -> Option<f64> {
        let first = *self.lower.first()?;
        let uniform = self
            .lower
            .iter()
            .chain(&self.upper)
            .all(|&v| v == first);
        uniform.then_some(first)
    }
}

/// Penalty weights and step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationParams {
    pub lambda: f64,
    pub mu: f64,
    pub tau: f64,
}

impl RegularizationParams {
    pub fn new(lambda: f64, mu: f64, tau: f64) -> Result<Self, ModelError> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(ModelError::Parameter { name: "lambda", value: lambda });
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(ModelError::Parameter { name: "mu", value: mu });
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(ModelError::Parameter { name: "tau", value: tau });
        }
        Ok(Self { lambda, mu, tau })
    }

    /// Element threshold `2 lambda tau` on `s_i^2 - d_i^2`.
    pub fn element_threshold(&self) -> f64 {
        2.0 * self.lambda * self.tau
    }

    pub fn with_tau(self, tau: f64) -> Result<Self, ModelError> {
        Self::new(self.lambda, self.mu, tau)
    }
}

/// A smooth loss `f` with Lipschitz-continuous gradient.
pub trait SmoothObjective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Both at once; implementations sharing work between the two override it.
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }

    /// Upper bound `L` on the gradient's Lipschitz constant.
    fn smoothness(&self) -> f64;

    fn strong_convexity(&self) -> Option<f64> {
        None
    }
}

/// `(||x||_0, ||x||_{2,0})`: nonzero entries and nonzero groups.
pub fn count_norms(x: &[f64], partition: &GroupPartition) -> (usize, usize) {
    let l0 = x.iter().filter(|&&v| v != 0.0).count();
    let l20 = partition
        .iter()
        .filter(|g| g.iter().any(|&i| x[i] != 0.0))
        .count();
    (l0, l20)
}

pub fn support(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter_map(|(i, &v)| (v != 0.0).then_some(i))
        .collect()
}

/// Composite objective `f(x) + lambda ||x||_0 + mu ||x||_{2,0}`, or `+inf`
/// outside the box.
pub fn phi<O: SmoothObjective + ?Sized>(
    x: &[f64],
    objective: &O,
    params: &RegularizationParams,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
) -> Result<f64, ModelError> {
    check_dim(objective.dim(), x.len())?;
    check_dim(bounds.dim(), x.len())?;
    check_dim(partition.dim(), x.len())?;
    Ok(phi_with_value(objective.value(x), x, params, bounds, partition))
}

/// `phi` when `f(x)` is already known.
pub(crate) fn phi_with_value(
    f: f64,
    x: &[f64],
    params: &RegularizationParams,
    bounds: &BoxConstraint,
    partition: &GroupPartition,
) -> f64 {
    if !bounds.contains(x) {
        return f64::INFINITY;
    }
    let (l0, l20) = count_norms(x, partition);
    f + params.lambda * l0 as f64 + params.mu * l20 as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationStatus {
    RelativeChange,
    ObjectiveTarget,
    MaxIterations,
}

impl TerminationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RelativeChange => "relative_change",
            Self::ObjectiveTarget => "objective_target",
            Self::MaxIterations => "max_iterations",
        }
    }
}

impl std::fmt::Display for TerminationStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State of iterate `x^k`. Record 0 describes the (projected) starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub phi: f64,
    /// `||x^k - x^{k-1}||`, zero for `k = 0`.
    pub step_norm: f64,
    pub support: Vec<usize>,
    pub l0: usize,
    pub l20: usize,
    /// Smallest `|x_i|` over the support, `+inf` for the zero vector.
    pub min_nonzero: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    /// Empty unless the solve was asked to record.
    pub records: Vec<IterateRecord>,
    pub status: TerminationStatus,
    pub final_iterate: Vec<f64>,
    pub iterations: usize,
    pub initial_phi: f64,
    pub final_phi: f64,
    pub support_changes: usize,
    pub tau: f64,
    pub elapsed: Duration,
    pub warnings: Vec<String>,
}
