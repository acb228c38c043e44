mod common;

use approx::assert_abs_diff_eq;
use binwave::linalg::{
    matrix_exponential_unitary, svd_truncate, svd_truncate_with, unitarity_error, Truncation,
};
use binwave::tensor::{contract, kron, kron_all};
use binwave::{ComplexTensor, C64};
use common::random_matrix;
use faer::{Mat, Side};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn max_abs_diff(a: &ComplexTensor, b: &ComplexTensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn random_hermitian(rng: &mut StdRng, n: usize) -> ComplexTensor {
    let m = random_matrix(rng, n, n);
    m.add(&m.dagger().unwrap()).unwrap().scale_real(0.5)
}

fn triple_loop(a: &ComplexTensor, b: &ComplexTensor) -> ComplexTensor {
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    for i in 0..m {
        for j in 0..n {
            for l in 0..k {
                out[i * n + j] += a.at(i, l) * b.at(l, j);
            }
        }
    }
    ComplexTensor::new(vec![m, n], out).unwrap()
}

#[test]
fn contract_matches_triple_loop() {
    let mut rng = StdRng::seed_from_u64(1);
    let a = random_matrix(&mut rng, 3, 4);
    let b = random_matrix(&mut rng, 4, 2);
    let c = contract(&a, &b, &[(1, 0)]).unwrap();
    assert!(max_abs_diff(&c, &triple_loop(&a, &b)) < 1e-14);
}

#[test]
fn truncation_error_equals_dropped_weight() {
    let mut rng = StdRng::seed_from_u64(2);
    let m = random_matrix(&mut rng, 8, 8);
    // reference spectrum from the eigenvalues of M†M
    let mh = m.dagger().unwrap().matmul(&m).unwrap();
    let gram = Mat::<C64>::from_fn(8, 8, |i, j| mh.at(i, j));
    let mut eig = gram.self_adjoint_eigenvalues(Side::Lower).unwrap();
    eig.sort_by(|a, b| b.total_cmp(a));
    let dropped: f64 = eig[3..].iter().sum();

    let svd = svd_truncate(&m, 3, 0.0).unwrap();
    assert_eq!(svd.rank(), 3);
    for (s, e) in svd.singular_values.iter().zip(&eig) {
        assert_abs_diff_eq!(s * s, *e, epsilon = 1e-10);
    }
    assert_abs_diff_eq!(svd.discarded_weight, dropped, epsilon = 1e-10);
    let err = m.sub(&svd.reconstruct()).unwrap().frobenius_norm();
    assert_abs_diff_eq!(err * err, dropped, epsilon = 1e-10);
}

#[test]
fn kron_identities() {
    let i2 = ComplexTensor::identity(2);
    assert_eq!(kron(&i2, &i2).unwrap(), ComplexTensor::identity(4));
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let g = ComplexTensor::column(&[one, zero]).unwrap();
    let e = ComplexTensor::column(&[zero, one]).unwrap();
    assert_eq!(kron(&g, &e).unwrap().data(), &[zero, one, zero, zero]);
}

#[test]
fn hermitian_exponential_unitary() {
    let mut rng = StdRng::seed_from_u64(3);
    let h = random_hermitian(&mut rng, 8);
    let u = matrix_exponential_unitary(&h).unwrap();
    assert!(unitarity_error(&u).unwrap() < 1e-12);
}

#[test]
fn exponential_matches_taylor_series() {
    let mut rng = StdRng::seed_from_u64(4);
    let h = random_hermitian(&mut rng, 6).scale_real(0.3);
    let u = matrix_exponential_unitary(&h).unwrap();
    let mih = h.scale(C64::new(0.0, -1.0));
    let mut term = ComplexTensor::identity(6);
    let mut sum = term.clone();
    for k in 1..40 {
        term = term.matmul(&mih).unwrap().scale_real(1.0 / k as f64);
        sum = sum.add(&term).unwrap();
    }
    assert!(max_abs_diff(&u, &sum) < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_reconstructs_without_truncation(seed in any::<u64>(), m in 1usize..10, n in 1usize..10) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, m, n);
        let svd = svd_truncate_with(&a, &Truncation::exact()).unwrap();
        prop_assert!(a.sub(&svd.reconstruct()).unwrap().frobenius_norm() < 1e-10);
        prop_assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(svd.singular_values.iter().all(|&s| s >= 0.0));
        let r = svd.rank();
        let ll = svd.left.dagger().unwrap().matmul(&svd.left).unwrap();
        let rr = svd.right.matmul(&svd.right.dagger().unwrap()).unwrap();
        prop_assert!(ll.sub(&ComplexTensor::identity(r)).unwrap().frobenius_norm() < 1e-10);
        prop_assert!(rr.sub(&ComplexTensor::identity(r)).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn rank_deficient_svd_reconstructs(seed in any::<u64>(), m in 2usize..9, n in 2usize..9, k in 1usize..3) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, m, k).matmul(&random_matrix(&mut rng, k, n)).unwrap();
        let svd = svd_truncate_with(&a, &Truncation::exact()).unwrap();
        prop_assert!(a.sub(&svd.reconstruct()).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn contract_is_bilinear(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, 3, 5);
        let b = random_matrix(&mut rng, 5, 4);
        let alpha = C64::new(re, im);
        let lhs = contract(&a.scale(alpha), &b, &[(1, 0)]).unwrap();
        let rhs = contract(&a, &b, &[(1, 0)]).unwrap().scale(alpha);
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn exponential_inverse(seed in any::<u64>(), n in 1usize..9) {
        let mut rng = StdRng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n);
        let u = matrix_exponential_unitary(&h).unwrap();
        let v = matrix_exponential_unitary(&h.scale_real(-1.0)).unwrap();
        prop_assert!(max_abs_diff(&u.matmul(&v).unwrap(), &ComplexTensor::identity(n)) < 1e-10);
        prop_assert!(unitarity_error(&u).unwrap() < 1e-12);
    }

    #[test]
    fn exponential_half_steps_compose(seed in any::<u64>(), n in 1usize..9) {
        let mut rng = StdRng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n);
        let u = matrix_exponential_unitary(&h).unwrap();
        let half = matrix_exponential_unitary(&h.scale_real(0.5)).unwrap();
        prop_assert!(max_abs_diff(&half.matmul(&half).unwrap(), &u) < 1e-12);
    }

    #[test]
    fn kron_is_associative(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, 2, 3);
        let b = random_matrix(&mut rng, 3, 2);
        let c = random_matrix(&mut rng, 2, 2);
        let left = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let right = kron(&a, &kron(&b, &c).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&left, &right) < 1e-14);
        prop_assert!(max_abs_diff(&left, &kron_all(&[&a, &b, &c]).unwrap()) < 1e-14);
    }
}
