mod common;

use common::{random_box, random_least_squares, random_partition, rng};
use proptest::prelude::*;
use psgb_core::objectives::SeparableQuadratic;
use psgb_core::{
    check_tau_stationary, compute_delta, count_norms, phi, project_box, solve, step, BoxConstraint,
    GroupPartition, LeastSquaresObjective, RegularizationParams, SmoothObjective, SolverConfig,
    support_change_audit, TauPolicy, TerminationStatus,
};
use rand::Rng;

struct Problem {
    objective: LeastSquaresObjective,
    bounds: BoxConstraint,
    partition: GroupPartition,
    lambda: f64,
    mu: f64,
}

fn problem(seed: u64, n: usize) -> Problem {
    let mut r = rng(seed);
    let m = r.random_range(n / 2 + 1..=n + 4);
    Problem {
        objective: random_least_squares(&mut r, m, n),
        bounds: random_box(&mut r, n),
        partition: random_partition(&mut r, n, 4),
        lambda: 10f64.powf(r.random_range(-3.0..-0.5)),
        mu: 10f64.powf(r.random_range(-3.0..-0.5)),
    }
}

/// Element-wise hard thresholding iteration written directly from its
/// coordinate formula.
fn reference_piht(p: &Problem, x0: &[f64], tau: f64, iters: usize) -> Vec<Vec<f64>> {
    let (l, u) = (p.bounds.lower(), p.bounds.upper());
    let mut x: Vec<f64> = (0..x0.len()).map(|i| x0[i].clamp(-l[i], u[i])).collect();
    let mut out = Vec::new();
    for _ in 0..iters {
        let g = p.objective.gradient(&x);
        x = (0..x.len())
            .map(|i| {
                let s = x[i] - tau * g[i];
                let proj = s.clamp(-l[i], u[i]);
                let d = proj - s;
                if s * s - d * d > 2.0 * p.lambda * tau {
                    proj
                } else {
                    0.0
                }
            })
            .collect();
        out.push(x.clone());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_group_weight_reproduces_piht(seed in any::<u64>(), n in 2usize..24) {
        let p = problem(seed, n);
        let x0: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 / 6.0 - 1.0).collect();
        let tau = 0.99 / p.objective.smoothness();
        let reference = reference_piht(&p, &x0, tau, 25);
        for (k, expect) in reference.iter().enumerate() {
            let config = SolverConfig {
                lambda: p.lambda,
                mu: 0.0,
                rel_change_tol: 0.0,
                max_iterations: k + 1,
                ..SolverConfig::default()
            };
            let trace = solve(&p.objective, &config, &p.bounds, &p.partition, &x0).unwrap();
            prop_assert_eq!(&trace.final_iterate, expect, "iteration {}", trace.iterations);
            if trace.status == TerminationStatus::RelativeChange {
                break;
            }
        }
    }

    #[test]
    fn objective_never_increases(seed in any::<u64>(), n in 2usize..24) {
        let p = problem(seed, n);
        let config = SolverConfig {
            lambda: p.lambda,
            mu: p.mu,
            max_iterations: 300,
            record_trace: true,
            ..SolverConfig::default()
        };
        let x0 = vec![1.0; n];
        let trace = solve(&p.objective, &config, &p.bounds, &p.partition, &x0).unwrap();
        for w in trace.records.windows(2) {
            prop_assert!(w[1].phi <= w[0].phi + 1e-12 * (1.0 + w[0].phi.abs()));
        }
    }

    #[test]
    fn support_settles_before_convergence(seed in any::<u64>(), n in 2usize..24) {
        let p = problem(seed, n);
        let config = SolverConfig {
            lambda: p.lambda,
            mu: p.mu,
            max_iterations: 5000,
            record_trace: true,
            ..SolverConfig::default()
        };
        let trace = solve(&p.objective, &config, &p.bounds, &p.partition, &vec![0.0; n]).unwrap();
        prop_assume!(trace.status == TerminationStatus::RelativeChange);
        let l = p.objective.smoothness();
        if let Ok(delta) = compute_delta(&p.bounds, p.lambda, trace.tau) {
            let audit = support_change_audit(&trace, &delta, l, trace.tau).unwrap();
            prop_assert!(audit.passed(), "{audit:?}");
        }
        // A support change moves some coordinate by at least delta, far more
        // than the relative-change tolerance allows on these problems.
        let last = &trace.records[trace.records.len() - 2..];
        prop_assert_eq!(&last[0].support, &last[1].support);
    }

    #[test]
    fn steps_are_feasible_with_projected_nonzeros(seed in any::<u64>(), n in 2usize..24) {
        let p = problem(seed, n);
        let tau = 0.99 / p.objective.smoothness();
        let params = RegularizationParams::new(p.lambda, p.mu, tau).unwrap();
        let mut x = project_box(&vec![0.5; n], &p.bounds);
        for _ in 0..20 {
            let (next, diag) = step(&x, &p.objective, &params, &p.bounds, &p.partition).unwrap();
            let proj = project_box(&diag.s_tau, &p.bounds);
            prop_assert!(p.bounds.contains(&next));
            for i in 0..n {
                prop_assert_eq!(diag.d_tau[i], proj[i] - diag.s_tau[i]);
                prop_assert!(next[i] == 0.0 || next[i] == proj[i]);
            }
            if next == x {
                prop_assert!(check_tau_stationary(&x, &p.objective, &params, &p.bounds, &p.partition, 0.0));
                break;
            }
            x = next;
        }
    }

    #[test]
    fn zero_counts_shrink_under_restriction(
        x in prop::collection::vec(prop_oneof![Just(0.0), -3.0..3.0f64], 1..20),
        mask_seed in any::<u64>(),
    ) {
        let n = x.len();
        let partition = random_partition(&mut rng(mask_seed), n, 4);
        let (l0, l20) = count_norms(&x, &partition);
        prop_assert_eq!(l0, x.iter().filter(|v| **v != 0.0).count());
        prop_assert!(l20 <= l0 && l0 <= n);
        let mut r = rng(mask_seed ^ 1);
        let restricted: Vec<f64> = x.iter().map(|&v| if r.random_bool(0.5) { v } else { 0.0 }).collect();
        let (r0, r20) = count_norms(&restricted, &partition);
        prop_assert!(r0 <= l0 && r20 <= l20);
    }
}

#[test]
fn worked_step_keeps_only_the_first_coordinate() {
    let tau = 0.9;
    let c: Vec<f64> = [3.0, 0.1, 1.2].iter().map(|v| v / tau).collect();
    let f = SeparableQuadratic::new(c);
    let params = RegularizationParams::new(0.5 / tau, 1.5 / tau, tau).unwrap();
    let bounds = BoxConstraint::symmetric(3, 10.0).unwrap();
    let partition = GroupPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
    let (next, diag) = step(&[0.0; 3], &f, &params, &bounds, &partition).unwrap();
    for (s, e) in diag.s_tau.iter().zip([3.0, 0.1, 1.2]) {
        assert!((s - e).abs() < 1e-12);
    }
    assert!((next[0] - 3.0).abs() < 1e-12);
    assert_eq!(&next[1..], &[0.0, 0.0]);
}

#[test]
fn worked_objective_value() {
    let f = SeparableQuadratic::new(vec![3.0, 0.1, 1.2]);
    let params = RegularizationParams::new(0.5, 1.5, 1.0).unwrap();
    let bounds = BoxConstraint::symmetric(3, 10.0).unwrap();
    let partition = GroupPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
    let value = phi(&[3.0, 0.0, 0.0], &f, &params, &bounds, &partition).unwrap();
    assert!((value - 2.725).abs() < 1e-12);
    assert_eq!(phi(&[11.0, 0.0, 0.0], &f, &params, &bounds, &partition).unwrap(), f64::INFINITY);
}

#[test]
fn explicit_large_step_is_flagged() {
    let p = problem(3, 6);
    let config = SolverConfig {
        tau_policy: TauPolicy::Explicit(2.0 / p.objective.smoothness()),
        ..SolverConfig::default()
    };
    let trace = solve(&p.objective, &config, &p.bounds, &p.partition, &[0.0; 6]).unwrap();
    assert_eq!(trace.warnings.len(), 1);
}
