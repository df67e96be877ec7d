//! Random recovery instances `b = A x* + sigma xi`.
//!
//! All randomness comes from `ChaCha20Rng::seed_from_u64(seed)`, drawn in a
//! fixed order: the design column by column, then the active groups, then
//! their values, then the noise. Identical parameters and seed reproduce the
//! instance bit for bit.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::HarnessError;
use crate::linalg::{norm2, DenseMatrix};
use crate::model::{BoxConstraint, GroupPartition};
use crate::objectives::{make_least_squares, LeastSquaresObjective};

/// Range of the nonzero ground-truth entries.
pub const VALUE_RANGE: (f64, f64) = (0.1, 5.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentInstance {
    pub design: DenseMatrix,
    pub observation: Vec<f64>,
    pub ground_truth: Vec<f64>,
    /// Unknown for instances read back from disk.
    pub sigma: Option<f64>,
    pub group_width: usize,
    pub bounds: BoxConstraint,
    pub partition: GroupPartition,
    pub seed: u64,
}

impl ExperimentInstance {
    pub fn n(&self) -> usize {
        self.design.cols()
    }

    pub fn m(&self) -> usize {
        self.design.rows()
    }

    pub fn sparsity(&self) -> usize {
        self.ground_truth.iter().filter(|v| **v != 0.0).count()
    }

    pub fn group_sparsity(&self) -> usize {
        self.partition
            .iter()
            .filter(|g| g.iter().any(|&i| self.ground_truth[i] != 0.0))
            .count()
    }

    pub fn objective(&self) -> Result<LeastSquaresObjective, HarnessError> {
        Ok(make_least_squares(self.design.clone(), self.observation.clone())?)
    }

    /// Unit columns, a ground truth made of whole groups (at most one of them
    /// partially filled) with entries in [`VALUE_RANGE`].
    pub fn check_invariants(&self) -> Result<(), HarnessError> {
        for (j, col) in self.design.columns().enumerate() {
            if (norm2(col) - 1.0).abs() > 1e-12 {
                return Err(HarnessError::Instance(format!("column {j} is not unit norm")));
            }
        }
        let partial = self
            .partition
            .iter()
            .filter(|g| {
                let nonzero = g.iter().filter(|&&i| self.ground_truth[i] != 0.0).count();
                nonzero != 0 && nonzero != g.len()
            })
            .count();
        if partial > 1 {
            return Err(HarnessError::Instance(format!(
                "{partial} groups are partially active, at most one allowed"
            )));
        }
        let (lo, hi) = VALUE_RANGE;
        if let Some(i) = self
            .ground_truth
            .iter()
            .position(|&v| v != 0.0 && !(lo..=hi).contains(&v))
        {
            return Err(HarnessError::Instance(format!("ground truth entry {i} out of range")));
        }
        Ok(())
    }
}

/// Shape of an E1-style instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct E1Params {
    pub n: usize,
    pub m: usize,
    pub group_width: usize,
    pub sparsity: usize,
    pub sigma: f64,
    pub box_magnitude: f64,
}

impl E1Params {
    /// `m = m_ratio n` and `s = s_ratio n`, both rounded to the nearest integer.
    pub fn from_ratios(n: usize, m_ratio: f64, s_ratio: f64, w: usize, sigma: f64, box_magnitude: f64) -> Self {
        let m = ((m_ratio * n as f64).round() as usize).max(1);
        let s = (s_ratio * n as f64).round() as usize;
        Self {
            n,
            m,
            group_width: w,
            sparsity: s,
            sigma,
            box_magnitude,
        }
    }
}

fn gaussian_design(rng: &mut ChaCha20Rng, m: usize, n: usize) -> DenseMatrix {
    let data: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
    let mut a = DenseMatrix::from_col_major(m, n, data).expect("sized above");
    a.normalize_columns();
    a
}

fn observe(rng: &mut ChaCha20Rng, a: &DenseMatrix, x: &[f64], sigma: f64) -> Vec<f64> {
    let mut b = a.mul_vec(x);
    for bi in b.iter_mut() {
        let xi: f64 = rng.sample(StandardNormal);
        *bi += sigma * xi;
    }
    b
}

/// Gaussian design with unit columns, `ceil(s / w)` groups active with
/// values uniform on `[0.1, 5]`, and box `l = u = box_magnitude`.
///
/// When `w` does not divide `s`, the last sampled group only has its first
/// `s mod w` coordinates active, so that `||x*||_0 = s` exactly.
pub fn gen_e1(params: &E1Params, seed: u64) -> Result<ExperimentInstance, HarnessError> {
    let E1Params {
        n,
        m,
        group_width: w,
        sparsity: s,
        sigma,
        box_magnitude,
    } = *params;
    if w == 0 || n % w != 0 {
        return Err(HarnessError::Config(format!("group width {w} must divide n = {n}")));
    }
    if s > n {
        return Err(HarnessError::Config(format!("sparsity {s} exceeds n = {n}")));
    }
    if m == 0 {
        return Err(HarnessError::Config("m must be positive".into()));
    }
    if !(sigma >= 0.0) {
        return Err(HarnessError::Config(format!("sigma must be non-negative, got {sigma}")));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let design = gaussian_design(&mut rng, m, n);
    let mut active = index::sample(&mut rng, n / w, s.div_ceil(w)).into_vec();
    let partial = (s % w != 0).then(|| *active.last().expect("s > 0 here"));
    active.sort_unstable();
    let (lo, hi) = VALUE_RANGE;
    let mut ground_truth = vec![0.0; n];
    for g in active {
        let width = if Some(g) == partial { s % w } else { w };
        for v in &mut ground_truth[g * w..g * w + width] {
            *v = lo + (hi - lo) * rng.random::<f64>();
        }
    }
    let observation = observe(&mut rng, &design, &ground_truth, sigma);
    let instance = ExperimentInstance {
        design,
        observation,
        ground_truth,
        sigma: Some(sigma),
        group_width: w,
        bounds: BoxConstraint::symmetric(n, box_magnitude)?,
        partition: GroupPartition::contiguous(n, w)?,
        seed,
    };
    instance.check_invariants()?;
    Ok(instance)
}

/// Instance around a user-supplied signal: Gaussian unit-column design with
/// `m` rows, noise `sigma`, contiguous groups of width `w`.
pub fn instance_from_signal(
    ground_truth: Vec<f64>,
    m: usize,
    w: usize,
    sigma: f64,
    box_magnitude: f64,
    seed: u64,
) -> Result<ExperimentInstance, HarnessError> {
    let n = ground_truth.len();
    if w == 0 || n % w != 0 {
        return Err(HarnessError::Config(format!("group width {w} must divide n = {n}")));
    }
    if m == 0 {
        return Err(HarnessError::Config("m must be positive".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let design = gaussian_design(&mut rng, m, n);
    let observation = observe(&mut rng, &design, &ground_truth, sigma);
    Ok(ExperimentInstance {
        design,
        observation,
        ground_truth,
        sigma: Some(sigma),
        group_width: w,
        bounds: BoxConstraint::symmetric(n, box_magnitude)?,
        partition: GroupPartition::contiguous(n, w)?,
        seed,
    })
}
