mod common;

use common::{random_least_squares, random_matrix, rng};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use psgb_core::linalg::dot;
use psgb_core::{estimate_smoothness, make_least_squares, DenseMatrix, SmoothObjective};
use rand::Rng;

/// Largest eigenvalue of `A^T A` from a dense symmetric eigensolve.
pub fn exact_gram_norm(a: &DenseMatrix) -> f64 {
    let m = DMatrix::from_column_slice(a.rows(), a.cols(), a.as_slice());
    let gram = m.transpose() * &m;
    SymmetricEigen::new(gram).eigenvalues.max()
}

fn central_difference<O: SmoothObjective>(f: &O, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + x[i].abs());
            y[i] = x[i] + h;
            let up = f.value(&y);
            y[i] = x[i] - h;
            let down = f.value(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn random_point(r: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), m in 1usize..25, n in 1usize..35) {
        let mut r = rng(seed);
        let f = random_least_squares(&mut r, m, n);
        let x = random_point(&mut r, n, 3.0);
        let g = f.gradient(&x);
        let fd = central_difference(&f, &x);
        let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (a, b) in g.iter().zip(&fd) {
            prop_assert!((a - b).abs() <= 1e-6 * scale, "analytic {a}, finite difference {b}");
        }
    }

    #[test]
    fn descent_lemma_and_convexity(seed in any::<u64>(), m in 1usize..25, n in 1usize..35) {
        let mut r = rng(seed);
        let f = random_least_squares(&mut r, m, n);
        let l = f.smoothness();
        for _ in 0..16 {
            let x = random_point(&mut r, n, 4.0);
            let z = random_point(&mut r, n, 4.0);
            let d: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
            let (fx, gx) = f.value_and_gradient(&x);
            let fz = f.value(&z);
            let linear = fx + dot(&gx, &d);
            let tol = 1e-10 * (1.0 + fx.abs() + fz.abs());
            prop_assert!(fz <= linear + 0.5 * l * dot(&d, &d) + tol);
            prop_assert!(fz >= linear - tol);
        }
    }

    #[test]
    fn smoothness_bounds_the_spectrum(seed in any::<u64>(), m in 1usize..=64, n in 1usize..=64) {
        let a = random_matrix(&mut rng(seed), m, n);
        let exact = exact_gram_norm(&a);
        let est = estimate_smoothness(&a).unwrap();
        prop_assert!(est >= exact, "estimate {est} below exact {exact}");
        prop_assert!(est <= 1.001 * exact * (1.0 + 1e-9));
    }
}

#[test]
fn smoothness_on_a_wide_matrix() {
    let a = random_matrix(&mut rng(50_80), 50, 80);
    let exact = exact_gram_norm(&a);
    let est = estimate_smoothness(&a).unwrap();
    assert!(est >= exact && est <= 1.001 * exact * (1.0 + 1e-9));
}

#[test]
fn identity_least_squares_values() {
    let f = make_least_squares(DenseMatrix::identity(2), vec![1.0, 0.0]).unwrap();
    assert_eq!(f.value(&[0.0, 0.0]), 0.5);
    assert_eq!(f.gradient(&[0.0, 0.0]), vec![-1.0, 0.0]);
    let l = f.smoothness();
    assert!((1.0..=1.001).contains(&l));
}
