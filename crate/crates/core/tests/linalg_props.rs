mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rlck_mor::linalg::{factorize, orth, orth_against, solve_lyapunov_dense, svd, try_orth_against};

fn orthonormality_defect(k: &DMatrix<f64>) -> f64 {
    (k.tr_mul(k) - DMatrix::identity(k.ncols(), k.ncols())).norm()
}

/// Largest distance of a column of `a` from `span(k)` (orthonormal `k`).
fn span_gap(a: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    let resid = a - k * k.tr_mul(a);
    (0..a.ncols())
        .map(|j| resid.column(j).norm() / a.column(j).norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

#[test]
fn factorization_residual_on_random_50x50() {
    let mut rng = rng(3);
    let a = gaussian_matrix(&mut rng, 50, 50) + DMatrix::identity(50, 50) * 10.0;
    let rhs = gaussian_matrix(&mut rng, 50, 3);
    let y = factorize(&a).unwrap().solve(&rhs);
    assert!((&a * y - &rhs).norm() <= 1e-10 * rhs.norm());
}

#[test]
fn orth_random_100x6() {
    let mut rng = rng(4);
    let m = gaussian_matrix(&mut rng, 100, 6);
    let k = orth(&m).unwrap();
    assert_eq!(k.ncols(), 6);
    assert!(orthonormality_defect(&k) <= 1e-12);
    assert!(span_gap(&m, &k) <= 1e-12);
}

#[test]
fn orth_against_perpendicular_block_matches_orth() {
    let mut basis = DMatrix::zeros(6, 2);
    basis[(0, 0)] = 1.0;
    basis[(1, 1)] = 1.0;
    let mut rng = rng(5);
    let mut block = gaussian_matrix(&mut rng, 6, 3);
    block.rows_mut(0, 2).fill(0.0);
    let a = orth_against(&block, &basis).unwrap();
    let b = orth(&block).unwrap();
    assert_eq!(a.ncols(), b.ncols());
    assert!(span_gap(&a, &b) <= 1e-12 && span_gap(&b, &a) <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn orth_against_properties(seed in any::<u64>(), n in 8usize..60, kb in 1usize..5, kn in 1usize..5) {
        let mut rng = rng(seed);
        let basis = orth(&gaussian_matrix(&mut rng, n, kb)).unwrap();
        let block = gaussian_matrix(&mut rng, n, kn);
        let out = orth_against(&block, &basis).unwrap();
        prop_assert!(basis.tr_mul(&out).norm() <= 1e-10);
        prop_assert!(orthonormality_defect(&out) <= 1e-12);
    }

    #[test]
    fn orth_is_idempotent(seed in any::<u64>(), n in 4usize..40, k in 1usize..6, dup in 0usize..3) {
        let mut rng = rng(seed);
        let base = gaussian_matrix(&mut rng, n, k);
        let mut m = DMatrix::zeros(n, k + dup);
        m.columns_mut(0, k).copy_from(&base);
        for d in 0..dup {
            m.set_column(k + d, &(base.column(d % k) * 2.0));
        }
        let once = orth(&m).unwrap();
        let twice = orth(&once).unwrap();
        prop_assert_eq!(once.ncols(), k.min(n));
        prop_assert_eq!(twice.ncols(), once.ncols());
        prop_assert!(span_gap(&twice, &once) <= 1e-12);
    }

    #[test]
    fn span_members_deflate_completely(seed in any::<u64>(), n in 5usize..30, k in 1usize..4) {
        let mut rng = rng(seed);
        let basis = orth(&gaussian_matrix(&mut rng, n, k)).unwrap();
        let inside = &basis * gaussian_matrix(&mut rng, k, 3);
        prop_assert_eq!(try_orth_against(&inside, &basis).ncols(), 0);
    }

    #[test]
    fn svd_reconstructs(seed in any::<u64>(), rows in 1usize..25, cols in 1usize..10) {
        let mut rng = rng(seed);
        let m = gaussian_matrix(&mut rng, rows, cols);
        let s = svd(&m).unwrap();
        let rebuilt = &s.u * DMatrix::from_diagonal(&s.sigma) * &s.v_t;
        prop_assert!((rebuilt - &m).norm() <= 1e-10 * m.norm());
        prop_assert!(s.sigma.iter().zip(s.sigma.iter().skip(1)).all(|(a, b)| a >= b));
        prop_assert!(s.sigma.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn lyapunov_matches_kronecker(seed in any::<u64>(), k in 1usize..=30, rank in 1usize..4) {
        let mut rng = rng(seed);
        let a = random_stable(&mut rng, k);
        let f = gaussian_matrix(&mut rng, k, rank);
        let w = &f * f.transpose();
        let x = solve_lyapunov_dense(&a, &w).unwrap();
        prop_assert!(rel_fro(&x, &lyapunov_kronecker(&a, &w)) <= 1e-8);
        prop_assert!((&a * &x + &x * a.transpose() + &w).norm() <= 1e-8 * w.norm());
        prop_assert_eq!(&x, &x.transpose());
        let floor = -1e-10 * x.norm();
        let eig = x.clone().symmetric_eigen().eigenvalues;
        prop_assert!(eig.iter().all(|&l| l >= floor));
    }
}
