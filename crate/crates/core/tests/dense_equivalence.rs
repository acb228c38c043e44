mod common;

use binwave::correlations::{correlation_2op_2t, correlation_4op_2t};
use binwave::evolution::evolve;
use binwave::model::{
    hamiltonian_1tls, hamiltonian_1tls_feedback, hamiltonian_2tls_mar, hamiltonian_2tls_nmar,
};
use binwave::params::{Pump, SimParams};
use binwave::ComplexTensor;
use common::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const TOL: f64 = 1e-8;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn markovian_single_emitter_matches_dense(seed in any::<u64>(), n in 1usize..=5, m in 0usize..=3) {
        let mut rng = StdRng::seed_from_u64(seed);
        let dt = [0.05, 0.1, 0.2][rng.gen_range(0..3)];
        let p = unrestricted(SimParams {
            delta_t: dt,
            t_max: n as f64 * dt,
            gamma_l: vec![rng.gen_range(0.0..1.5)],
            gamma_r: vec![rng.gen_range(0.0..1.5)],
            detuning: rng.gen_range(-2.0..2.0),
            ..SimParams::default()
        });
        let pump = random_pump(&mut rng, n);
        let sys0 = random_system(&mut rng, vec![2]);
        let field = random_field(&mut rng, m.min(n), p.bin_dim());
        let err = compare(&hamiltonian_1tls(&p).unwrap(), &pump, &sys0, field, &p);
        prop_assert!(err < TOL, "deviation {err:e}");
    }

    #[test]
    fn markovian_two_emitters_match_dense(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = StdRng::seed_from_u64(seed);
        let p = unrestricted(SimParams {
            d_sys: vec![2, 2],
            delta_t: 0.1,
            t_max: n as f64 * 0.1,
            gamma_l: vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
            gamma_r: vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
            phi: rng.gen_range(-3.2..3.2),
            ..SimParams::default()
        });
        let pump = random_pump(&mut rng, n);
        let sys0 = random_system(&mut rng, vec![2, 2]);
        let err = compare(&hamiltonian_2tls_mar(&p).unwrap(), &pump, &sys0, vec![], &p);
        prop_assert!(err < TOL, "deviation {err:e}");
    }

    #[test]
    fn mirror_feedback_matches_dense(seed in any::<u64>(), d in 1usize..=3, extra in 1usize..=7, three_level in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let d_t = if three_level { 3 } else { 2 };
        let budget = if three_level { 7 } else { 11 };
        let n = (d + extra).min(budget - d).max(1);
        let dt = 0.1;
        let p = unrestricted(SimParams {
            d_t: vec![d_t],
            delta_t: dt,
            t_max: n as f64 * dt,
            tau: d as f64 * dt,
            phi: rng.gen_range(-3.2..3.2),
            gamma_l: vec![rng.gen_range(0.0..1.5)],
            gamma_r: vec![rng.gen_range(0.0..1.5)],
            detuning: rng.gen_range(-1.0..1.0),
            ..SimParams::default()
        });
        let pump = random_pump(&mut rng, n);
        let sys0 = random_system(&mut rng, vec![2]);
        let m = rng.gen_range(0..=n.min(3));
        let field = random_field(&mut rng, m, d_t);
        let err = compare(&hamiltonian_1tls_feedback(&p).unwrap(), &pump, &sys0, field, &p);
        prop_assert!(err < TOL, "deviation {err:e}");
    }

    #[test]
    fn delayed_two_emitters_match_dense(seed in any::<u64>(), d in 1usize..=2, extra in 0usize..=2) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = (d + extra).min(5 - d);
        let dt = 0.1;
        let p = unrestricted(SimParams {
            d_sys: vec![2, 2],
            delta_t: dt,
            t_max: n as f64 * dt,
            tau: d as f64 * dt,
            phi: rng.gen_range(-3.2..3.2),
            gamma_l: vec![rng.gen_range(0.0..1.5), rng.gen_range(0.0..1.5)],
            gamma_r: vec![rng.gen_range(0.0..1.5), rng.gen_range(0.0..1.5)],
            ..SimParams::default()
        });
        let pump = random_pump(&mut rng, n);
        let sys0 = random_system(&mut rng, vec![2, 2]);
        let err = compare(&hamiltonian_2tls_nmar(&p).unwrap(), &pump, &sys0, vec![], &p);
        prop_assert!(err < TOL, "deviation {err:e}");
    }
}

#[test]
fn general_correlations_match_dense() {
    let mut rng = StdRng::seed_from_u64(7);
    let p = unrestricted(SimParams {
        t_max: 0.4,
        delta_t: 0.1,
        ..SimParams::default()
    });
    let pump = Pump::Cw { omega: 1.3 };
    let sys0 = random_system(&mut rng, vec![2]);
    let h = hamiltonian_1tls(&p).unwrap();
    let rec = evolve(&h, &pump, &sys0, vec![], &p).unwrap();
    let run = dense_run(&h.schedule(&pump, &p).unwrap(), &sys0, &[], &p);
    let psi = run.last();
    let ops: Vec<ComplexTensor> = (0..4).map(|_| random_matrix(&mut rng, 4, 4)).collect();
    let g = correlation_2op_2t(&rec, &ops[0], &ops[1]).unwrap();
    let g4 = correlation_4op_2t(&rec, &ops[0], &ops[1], &ops[2], &ops[3]).unwrap();
    for i in 0..g.n_rows() {
        for k in 0..g.values[i].len() {
            let (si, sj) = (run.bin_site(i as i64), run.bin_site((i + k) as i64));
            let (e2, e4) = if k == 0 {
                let ab = ops[0].matmul(&ops[1]).unwrap();
                let abcd = ab.matmul(&ops[2]).unwrap().matmul(&ops[3]).unwrap();
                (
                    psi.expectation(&[(&ab, si)]),
                    psi.expectation(&[(&abcd, si)]),
                )
            } else {
                let ad = ops[0].matmul(&ops[3]).unwrap();
                let bc = ops[1].matmul(&ops[2]).unwrap();
                (
                    psi.expectation(&[(&ops[0], si), (&ops[1], sj)]),
                    psi.expectation(&[(&ad, si), (&bc, sj)]),
                )
            };
            assert!((g.values[i][k] * 0.1 - e2).norm() < TOL);
            assert!((g4.values[i][k] * 0.01 - e4).norm() < TOL);
        }
    }
}
