//! Single audited runs, regularization selection, and benchmark suites.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::instance::{gen_e1, E1Params, ExperimentInstance};
use super::io::{read_vector, write_results_file};
use super::metrics::{metric_err, metric_psnr};
use super::HarnessError;
use crate::model::{SmoothObjective, SolveTrace, TerminationStatus};
use crate::oracle::so_point_check;
use crate::prox::compute_delta;
use crate::solver::{
    check_tau_stationary, solve, support_change_audit, verify_sufficient_decrease, SolverConfig,
};

/// A run counts as a successful recovery when `err` is at most this.
pub const SUCCESS_ERR: f64 = 0.05;

/// Offset from the base seed to the instance used for regularization tuning,
/// so the tuning instance never coincides with an evaluation seed.
pub const PILOT_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

const X0_STREAM: u64 = 0x5851_f42d_4c95_7f2d;

/// Geometric grid `10^-4, 10^-3.5, ..., 10^0`.
pub fn auto_reg_grid() -> Vec<f64> {
    (0..=8).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPoint {
    Zeros,
    Ones,
    NegOnes,
    Randn,
    File(PathBuf),
}

impl InitialPoint {
    pub fn label(&self) -> String {
        match self {
            Self::Zeros => "zeros".into(),
            Self::Ones => "ones".into(),
            Self::NegOnes => "neg-ones".into(),
            Self::Randn => "randn".into(),
            Self::File(p) => format!("file:{}", p.display()),
        }
    }

    /// `Randn` draws from a stream derived from `seed`.
    pub fn materialize(&self, n: usize, seed: u64) -> Result<Vec<f64>, HarnessError> {
        Ok(match self {
            Self::Zeros => vec![0.0; n],
            Self::Ones => vec![1.0; n],
            Self::NegOnes => vec![-1.0; n],
            Self::Randn => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed ^ X0_STREAM);
                (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
            }
            Self::File(path) => {
                let x = read_vector(path)?;
                if x.len() != n {
                    return Err(HarnessError::Config(format!(
                        "{} holds {} values, expected {n}",
                        path.display(),
                        x.len()
                    )));
                }
                x
            }
        })
    }
}

impl FromStr for InitialPoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zeros" | "0" => Ok(Self::Zeros),
            "ones" | "1" | "+1" => Ok(Self::Ones),
            "neg-ones" | "-1" => Ok(Self::NegOnes),
            "randn" => Ok(Self::Randn),
            other => match other.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(format!(
                    "unknown initial point {other:?}; expected zeros, ones, neg-ones, randn or file:PATH"
                )),
            },
        }
    }
}

/// One row of the results table, plus the audit outcomes that are not
/// serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub w: usize,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub lambda: f64,
    pub mu: f64,
    pub tau: f64,
    pub x0: String,
    pub box_label: String,
    pub iters: usize,
    pub time_s: f64,
    pub err: f64,
    pub psnr: f64,
    pub phi_final: f64,
    pub support_changes: usize,
    pub status: TerminationStatus,
    pub success: bool,
    pub audit: RunAudit,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunAudit {
    /// `None` when the run was not recorded.
    pub sufficient_decrease: Option<bool>,
    /// `None` when not recorded or when `lambda tau = 0` leaves no magnitude bound.
    pub support_bound: Option<bool>,
    /// `None` unless the run stopped on relative change.
    pub stationary: Option<bool>,
    /// Support-optimality of the final iterate; `None` unless the run
    /// stopped on relative change.
    pub support_optimal: Option<bool>,
}

impl RunAudit {
    /// Audits that ran all passed. Only meaningful when `tau L < 1`.
    pub fn passed(&self) -> bool {
        [
            self.sufficient_decrease,
            self.support_bound,
            self.stationary,
            self.support_optimal,
        ]
            .iter()
            .all(|a| a.unwrap_or(true))
    }
}

pub fn box_label(inst: &ExperimentInstance) -> String {
    match inst.bounds.uniform_magnitude() {
        Some(mag) => format!("{mag}"),
        None => "custom".into(),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub trace: SolveTrace,
}

/// Solves `inst` from `x0` and audits the run against the convergence theory.
pub fn run_instance(
    inst: &ExperimentInstance,
    config: &SolverConfig,
    x0: &InitialPoint,
) -> Result<RunOutcome, HarnessError> {
    run_with_objective(inst, &inst.objective()?, config, x0)
}

/// [`run_instance`] with a prebuilt objective for `inst`, so that several
/// runs on one instance share a single smoothness estimate.
pub fn run_with_objective<O: SmoothObjective + ?Sized>(
    inst: &ExperimentInstance,
    objective: &O,
    config: &SolverConfig,
    x0: &InitialPoint,
) -> Result<RunOutcome, HarnessError> {
    let start = x0.materialize(inst.n(), inst.seed)?;
    let trace = solve(objective, config, &inst.bounds, &inst.partition, &start)?;
    let lipschitz = objective.smoothness();
    let params = config.params(lipschitz)?;
    let x = &trace.final_iterate;
    let err = metric_err(x, &inst.ground_truth)?;

    let mut audit = RunAudit::default();
    if !trace.records.is_empty() {
        audit.sufficient_decrease =
            Some(verify_sufficient_decrease(&trace, lipschitz, params.tau)?.holds);
        if let Ok(delta) = compute_delta(&inst.bounds, params.lambda, params.tau) {
            audit.support_bound =
                Some(support_change_audit(&trace, &delta, lipschitz, params.tau)?.passed());
        }
    }
    if trace.status == TerminationStatus::RelativeChange {
        audit.stationary = Some(check_tau_stationary(
            x,
            objective,
            &params,
            &inst.bounds,
            &inst.partition,
            config.stationarity_tol,
        ));
        audit.support_optimal = Some(so_point_check(
            x,
            objective,
            &inst.bounds,
            config.stationarity_tol,
        ));
    }

    let record = RunRecord {
        n: inst.n(),
        m: inst.m(),
        s: inst.sparsity(),
        w: inst.group_width,
        sigma: inst.sigma,
        seed: inst.seed,
        lambda: params.lambda,
        mu: params.mu,
        tau: params.tau,
        x0: x0.label(),
        box_label: box_label(inst),
        iters: trace.iterations,
        time_s: trace.elapsed.as_secs_f64(),
        err,
        psnr: metric_psnr(x, &inst.ground_truth)?,
        phi_final: trace.final_phi,
        support_changes: trace.support_changes,
        status: trace.status,
        success: err <= SUCCESS_ERR,
        audit,
    };
    Ok(RunOutcome { record, trace })
}

/// Picks the `(lambda, mu)` pair with the smallest relative error on `pilot`.
/// Ties keep the earlier pair in `lambda`-major order.
pub fn auto_regularize(
    pilot: &ExperimentInstance,
    base: &SolverConfig,
    x0: &InitialPoint,
    lambdas: &[f64],
    mus: &[f64],
) -> Result<(f64, f64), HarnessError> {
    let objective = pilot.objective()?;
    let start = x0.materialize(pilot.n(), pilot.seed)?;
    let pairs: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| mus.iter().map(move |&m| (l, m)))
        .collect();
    let errs = pairs
        .par_iter()
        .map(|&(lambda, mu)| {
            let config = SolverConfig {
                lambda,
                mu,
                record_trace: false,
                ..base.clone()
            };
            let trace = solve(&objective, &config, &pilot.bounds, &pilot.partition, &start)?;
            metric_err(&trace.final_iterate, &pilot.ground_truth)
        })
        .collect::<Result<Vec<f64>, HarnessError>>()?;
    let best = errs
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &e)| match best {
            Some((_, b)) if b <= e => best,
            _ => Some((i, e)),
        })
        .ok_or_else(|| HarnessError::Config("empty regularization grid".into()))?;
    Ok(pairs[best.0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteName {
    Dims,
    Inits,
    Boxes,
    GroupSizes,
    Sparsity,
}

impl FromStr for SuiteName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dims" => Ok(Self::Dims),
            "inits" => Ok(Self::Inits),
            "boxes" => Ok(Self::Boxes),
            "group_sizes" | "group-sizes" => Ok(Self::GroupSizes),
            "sparsity" => Ok(Self::Sparsity),
            other => Err(format!(
                "unknown suite {other:?}; expected dims, inits, boxes, group_sizes or sparsity"
            )),
        }
    }
}

/// Element-sparse only (`mu = 0`) or sparse-group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Piht,
    SparseGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub suite: SuiteName,
    pub dims: Vec<usize>,
    pub m_ratio: f64,
    pub s_ratios: Vec<f64>,
    pub widths: Vec<usize>,
    pub boxes: Vec<f64>,
    pub inits: Vec<InitialPoint>,
    pub sigma: f64,
    pub repetitions: usize,
    pub base_seed: u64,
    /// Weights here are used as-is unless `auto_reg` is set.
    pub solver: SolverConfig,
    pub auto_reg: bool,
}

impl SuiteConfig {
    /// The experiment layout each suite reproduces.
    pub fn defaults(suite: SuiteName) -> Self {
        let base = Self {
            suite,
            dims: vec![5000],
            m_ratio: 0.25,
            s_ratios: vec![0.05],
            widths: vec![4],
            boxes: vec![5.0],
            inits: vec![InitialPoint::Zeros],
            sigma: 0.01,
            repetitions: 10,
            base_seed: 1,
            solver: SolverConfig::default(),
            auto_reg: false,
        };
        let sweep: Vec<f64> = (1..=17).step_by(2).map(|p| p as f64 / 100.0).collect();
        match suite {
            SuiteName::Dims => Self {
                dims: vec![5000, 7000, 9000, 11000, 13000, 15000],
                ..base
            },
            SuiteName::Inits => Self {
                dims: vec![5000],
                inits: vec![
                    InitialPoint::Zeros,
                    InitialPoint::NegOnes,
                    InitialPoint::Ones,
                    InitialPoint::Randn,
                ],
                ..base
            },
            SuiteName::Boxes => Self {
                dims: vec![8000],
                m_ratio: 0.5,
                sigma: 0.001,
                s_ratios: sweep,
                boxes: vec![5.0, 6.0, 10.0],
                ..base
            },
            SuiteName::GroupSizes => Self {
                dims: vec![8000],
                m_ratio: 0.25,
                s_ratios: vec![0.14],
                widths: vec![2, 4, 5, 8, 10, 16, 20, 32, 64, 80, 160],
                ..base
            },
            SuiteName::Sparsity => Self {
                dims: vec![8000],
                m_ratio: 0.5,
                sigma: 0.001,
                s_ratios: sweep,
                ..base
            },
        }
    }

    /// Configurations in output order.
    pub fn plan(&self) -> Result<Vec<PlannedRun>, HarnessError> {
        let first = |v: &[f64], what: &str| {
            v.first()
                .copied()
                .ok_or_else(|| HarnessError::Config(format!("no {what} given")))
        };
        let n0 = *self
            .dims
            .first()
            .ok_or_else(|| HarnessError::Config("no dimension given".into()))?;
        let w0 = *self
            .widths
            .first()
            .ok_or_else(|| HarnessError::Config("no group width given".into()))?;
        let s0 = first(&self.s_ratios, "sparsity ratio")?;
        let b0 = first(&self.boxes, "box magnitude")?;
        let x00 = self
            .inits
            .first()
            .cloned()
            .ok_or_else(|| HarnessError::Config("no initial point given".into()))?;
        let shape = |n, s, w, b| E1Params::from_ratios(n, self.m_ratio, s, w, self.sigma, b);
        let sg = |shape, x0| PlannedRun {
            shape,
            x0,
            method: Method::SparseGroup,
        };
        let both = |shape: E1Params| {
            [Method::Piht, Method::SparseGroup].map(|method| PlannedRun {
                shape,
                x0: x00.clone(),
                method,
            })
        };
        let plan = match self.suite {
            SuiteName::Dims => self
                .dims
                .iter()
                .map(|&n| sg(shape(n, s0, w0, b0), x00.clone()))
                .collect(),
            SuiteName::Inits => self
                .inits
                .iter()
                .map(|x0| sg(shape(n0, s0, w0, b0), x0.clone()))
                .collect(),
            SuiteName::Boxes => self
                .boxes
                .iter()
                .flat_map(|&b| self.s_ratios.iter().map(move |&s| (b, s)))
                .map(|(b, s)| sg(shape(n0, s, w0, b), x00.clone()))
                .collect(),
            SuiteName::GroupSizes => self
                .widths
                .iter()
                .flat_map(|&w| both(shape(n0, s0, w, b0)))
                .collect(),
            SuiteName::Sparsity => self
                .s_ratios
                .iter()
                .flat_map(|&s| both(shape(n0, s, w0, b0)))
                .collect(),
        };
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub shape: E1Params,
    pub x0: InitialPoint,
    pub method: Method,
}

/// Resolves `(lambda, mu)` for one planned configuration.
pub fn select_weights(
    planned: &PlannedRun,
    base: &SolverConfig,
    auto_reg: bool,
    pilot_seed: u64,
) -> Result<(f64, f64), HarnessError> {
    if !auto_reg {
        let mu = match planned.method {
            Method::Piht => 0.0,
            Method::SparseGroup => base.mu,
        };
        return Ok((base.lambda, mu));
    }
    let pilot = gen_e1(&planned.shape, pilot_seed)?;
    let grid = auto_reg_grid();
    let mus = match planned.method {
        Method::Piht => vec![0.0],
        Method::SparseGroup => grid.clone(),
    };
    auto_regularize(&pilot, base, &planned.x0, &grid, &mus)
}

/// Runs every configuration for `repetitions` seeds (`base_seed`,
/// `base_seed + 1`, ...), auditing each run, and optionally writes the table.
pub fn run_suite(config: &SuiteConfig, output: Option<&Path>) -> Result<Vec<RunRecord>, HarnessError> {
    let plan = config.plan()?;
    let pilot_seed = config.base_seed.wrapping_add(PILOT_SEED_OFFSET);
    let weights = plan
        .iter()
        .map(|p| select_weights(p, &config.solver, config.auto_reg, pilot_seed))
        .collect::<Result<Vec<_>, _>>()?;

    // Runs that share a shape also share the instance and its objective.
    let mut shapes: Vec<(E1Params, Vec<usize>)> = Vec::new();
    for (i, p) in plan.iter().enumerate() {
        match shapes.iter_mut().find(|(s, _)| *s == p.shape) {
            Some((_, members)) => members.push(i),
            None => shapes.push((p.shape, vec![i])),
        }
    }
    let jobs: Vec<(usize, u64)> = (0..shapes.len())
        .flat_map(|j| (0..config.repetitions as u64).map(move |r| (j, config.base_seed.wrapping_add(r))))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(j, seed)| {
            let (shape, members) = &shapes[j];
            let inst = gen_e1(shape, seed)?;
            let objective = inst.objective()?;
            members
                .iter()
                .map(|&i| {
                    let (lambda, mu) = weights[i];
                    let solver = SolverConfig {
                        lambda,
                        mu,
                        record_trace: true,
                        ..config.solver.clone()
                    };
                    let record = run_with_objective(&inst, &objective, &solver, &plan[i].x0)?.record;
                    Ok((i, seed, record))
                })
                .collect::<Result<Vec<_>, HarnessError>>()
        })
        .collect::<Result<Vec<_>, HarnessError>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    rows.sort_by_key(|&(i, seed, _)| (i, seed.wrapping_sub(config.base_seed)));
    let records: Vec<RunRecord> = rows.into_iter().map(|(_, _, r)| r).collect();

    if let Some(path) = output {
        write_results_file(path, &records)?;
    }
    Ok(records)
}
