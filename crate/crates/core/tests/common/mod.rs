#![allow(dead_code)]

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use psgb_core::{
    make_least_squares, BoxConstraint, DenseMatrix, GroupPartition, LeastSquaresObjective,
    RegularizationParams,
};

#[derive(Debug, Clone)]
pub struct ProxCase {
    pub s: Vec<f64>,
    pub bounds: BoxConstraint,
    pub partition: GroupPartition,
    pub params: RegularizationParams,
}

pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

/// Zero, infinite, or a finite positive bound.
pub fn random_bound(rng: &mut impl Rng) -> f64 {
    match rng.random_range(0..5) {
        0 => 0.0,
        1 => f64::INFINITY,
        _ => rng.random_range(0.05..4.0),
    }
}

pub fn random_box(rng: &mut impl Rng, n: usize) -> BoxConstraint {
    let (lower, upper) = (0..n).map(|_| (random_bound(rng), random_bound(rng))).unzip();
    BoxConstraint::new(lower, upper).unwrap()
}

/// Groups of 1 to `max_size` indices over a shuffled `0..n`.
pub fn random_partition(rng: &mut impl Rng, n: usize, max_size: usize) -> GroupPartition {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut groups = Vec::new();
    let mut rest = &idx[..];
    while !rest.is_empty() {
        let k = rng.random_range(1..=max_size).min(rest.len());
        let (head, tail) = rest.split_at(k);
        groups.push(head.to_vec());
        rest = tail;
    }
    GroupPartition::new(n, groups).unwrap()
}

pub fn random_prox_case(rng: &mut impl Rng, max_n: usize) -> ProxCase {
    let n = rng.random_range(1..=max_n);
    let tau = log_uniform(rng, 1e-3, 10.0);
    let lambda = log_uniform(rng, 1e-3, 10.0);
    let mu = log_uniform(rng, 1e-3, 10.0);
    // Scale s with sqrt(tau) so that thresholds neither always nor never bite.
    let scale = (2.0 * tau * lambda).sqrt() * 2.0;
    let s = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    ProxCase {
        s,
        bounds: random_box(rng, n),
        partition: random_partition(rng, n, 4),
        params: RegularizationParams::new(lambda, mu, tau).unwrap(),
    }
}

pub fn prox_case_strategy(max_n: usize) -> impl Strategy<Value = ProxCase> {
    any::<u64>().prop_map(move |seed| random_prox_case(&mut ChaCha20Rng::seed_from_u64(seed), max_n))
}

pub fn random_matrix(rng: &mut impl Rng, m: usize, n: usize) -> DenseMatrix {
    let data = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::from_col_major(m, n, data).unwrap()
}

pub fn random_least_squares(rng: &mut impl Rng, m: usize, n: usize) -> LeastSquaresObjective {
    let a = random_matrix(rng, m, n);
    let b = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    make_least_squares(a, b).unwrap()
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}
