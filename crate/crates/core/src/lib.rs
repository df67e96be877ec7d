//! Sparse-group `l0` regularized minimization over box constraints by
//! proximal iterative hard thresholding.
//!
//! The problem is
//!
//! ```text
//! minimize  f(x) + lambda ||x||_0 + mu ||x||_{2,0}   subject to  -l <= x <= u
//! ```
//!
//! where `f` is smooth and convex, `||x||_{2,0}` counts the nonzero groups of
//! a fixed partition, and `l, u >= 0` may be infinite.
//!
//! - [`model`]: partitions, boxes, parameters, the composite objective.
//! - [`prox`]: projection, hard thresholds and the sparse-group prox.
//! - [`solver`]: the iteration, stopping rule and convergence audits.
//! - [`objectives`]: least squares and a separable quadratic.
//! - [`oracle`]: brute-force references for small instances.
//! - [`harness`]: instance generation, metrics, file formats and suites.

pub mod harness;
pub mod linalg;
pub mod model;
pub mod objectives;
pub mod oracle;
pub mod prox;
pub mod solver;

pub use linalg::DenseMatrix;
pub use model::{
    count_norms, phi, validate_partition, BoxConstraint, GroupPartition, IterateRecord,
    ModelError, RegularizationParams, SmoothObjective, SolveTrace, TerminationStatus,
};
pub use objectives::{estimate_smoothness, make_least_squares, LeastSquaresObjective, SeparableQuadratic};
pub use prox::{
    compute_delta, hard_threshold_group, hard_threshold_l0, project_box, prox_sparse_group,
    DeltaBound,
};
pub use solver::{
    check_tau_stationary, solve, step, support_change_audit, verify_sufficient_decrease,
    SolverConfig, TauPolicy,
};
