mod common;

use binwave::evolution::evolve;
use binwave::linalg::unitarity_error;
use binwave::model::{
    build_propagator, excitation_operator, generator_hermiticity, hamiltonian_1tls,
    hamiltonian_1tls_feedback, hamiltonian_2tls_mar, hamiltonian_2tls_nmar, lift, noise_operators,
    sigma_minus, Hamiltonian, Role,
};
use binwave::observables::population;
use binwave::oracles::dde_two_tls;
use binwave::params::{Pump, SimParams};
use binwave::states::{tls_excited, tls_ground, SystemState};
use binwave::tensor::kron_all;
use binwave::ComplexTensor;
use proptest::prelude::*;

fn max_abs(a: &ComplexTensor) -> f64 {
    a.data().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn commutator(a: &ComplexTensor, b: &ComplexTensor) -> ComplexTensor {
    a.matmul(b).unwrap().sub(&b.matmul(a).unwrap()).unwrap()
}

fn two_emitters(p: SimParams) -> SimParams {
    SimParams {
        d_sys: vec![2, 2],
        gamma_l: vec![0.5, 0.5],
        gamma_r: vec![0.5, 0.5],
        ..p
    }
}

fn mirror(p: SimParams) -> SimParams {
    SimParams {
        d_t: vec![2],
        tau: 0.5,
        ..p
    }
}

fn all_scenarios(p: &SimParams) -> Vec<(Hamiltonian, SimParams)> {
    let one = p.clone();
    let fb = mirror(p.clone());
    let two = two_emitters(p.clone());
    let two_d = SimParams {
        tau: 0.5,
        ..two.clone()
    };
    vec![
        (hamiltonian_1tls(&one).unwrap(), one),
        (hamiltonian_1tls_feedback(&fb).unwrap(), fb),
        (hamiltonian_2tls_mar(&two).unwrap(), two),
        (hamiltonian_2tls_nmar(&two_d).unwrap(), two_d),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generators_hermitian_and_propagators_unitary(
        omega in -10.0f64..10.0,
        detuning in -3.0f64..3.0,
        phi in -3.2f64..3.2,
        three_level in any::<bool>(),
    ) {
        let d = if three_level { 3 } else { 2 };
        let p = SimParams { detuning, phi, d_t: vec![d, d], ..SimParams::default() };
        for (h, _) in all_scenarios(&p) {
            prop_assert!(generator_hermiticity(&h, omega).unwrap() < 1e-14);
            let u = h.propagator(omega).unwrap();
            prop_assert!(unitarity_error(u.gate()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn undriven_generators_conserve_excitations(phi in -3.2f64..3.2, detuning in -3.0f64..3.0, g in 0.0f64..2.0) {
        let p = SimParams { phi, detuning, gamma_r: vec![g], gamma_l: vec![2.0 - g], ..SimParams::default() };
        for (h, q) in all_scenarios(&p) {
            let n = excitation_operator(&h, &q).unwrap();
            prop_assert!(max_abs(&commutator(&h.generator(0.0), &n)) < 1e-12);
            let u = h.propagator(0.0).unwrap();
            prop_assert!(max_abs(&commutator(u.gate(), &n)) < 1e-12);
        }
    }

    #[test]
    fn half_steps_compose(omega in -5.0f64..5.0, phi in -3.2f64..3.2) {
        let p = SimParams { phi, ..SimParams::default() };
        for (h, _) in all_scenarios(&p) {
            let g = h.generator(omega);
            let full = build_propagator(&g, &h.roles, &h.dims).unwrap();
            let half = build_propagator(&g.scale_real(0.5), &h.roles, &h.dims).unwrap();
            let twice = half.gate().matmul(half.gate()).unwrap();
            prop_assert!(max_abs(&twice.sub(full.gate()).unwrap()) < 1e-12);
        }
    }
}

#[test]
fn driven_generator_breaks_excitation_conservation() {
    let p = SimParams::default();
    let h = hamiltonian_1tls(&p).unwrap();
    let n = excitation_operator(&h, &p).unwrap();
    assert!(max_abs(&commutator(&h.generator(1.0), &n)) > 1e-3);
}

#[test]
fn chiral_limit_leaves_left_channel_untouched() {
    let p = SimParams {
        gamma_r: vec![1.0],
        gamma_l: vec![0.0],
        ..SimParams::default()
    };
    let h = hamiltonian_1tls(&p).unwrap();
    let a_left = lift(
        &lift(
            &noise_operators(2, p.delta_t).unwrap().annihilate,
            1,
            &p.d_t,
        )
        .unwrap(),
        1,
        &h.dims,
    )
    .unwrap();
    for omega in [0.0, 2.0] {
        let g = h.generator(omega);
        assert_eq!(max_abs(&commutator(&g, &a_left)), 0.0);
        assert_eq!(max_abs(&commutator(&g, &a_left.dagger().unwrap())), 0.0);
    }
}

#[test]
fn feedback_without_return_coupling_is_padded_markovian_gate() {
    let p = SimParams {
        d_t: vec![3],
        gamma_r: vec![0.8],
        gamma_l: vec![0.0],
        tau: 0.25,
        detuning: 0.4,
        ..SimParams::default()
    };
    let h = hamiltonian_1tls_feedback(&p).unwrap();
    // √γ_R(σ⁺⊗ΔB + σ⁻⊗ΔB†) + Δ·Δt σ⁺σ⁻ + Ω·Δt(σ⁺ + σ⁻) on emitter ⊗ bin
    let sm = sigma_minus(2);
    let sp = sm.dagger().unwrap();
    let b = noise_operators(3, p.delta_t).unwrap().annihilate;
    let bd = b.dagger().unwrap();
    let id3 = ComplexTensor::identity(3);
    let omega = 1.7;
    let g2 = kron_all(&[&sp, &b])
        .unwrap()
        .add(&kron_all(&[&sm, &bd]).unwrap())
        .unwrap()
        .scale_real(0.8f64.sqrt())
        .add(
            &kron_all(&[&sp.matmul(&sm).unwrap(), &id3])
                .unwrap()
                .scale_real(0.4 * p.delta_t),
        )
        .unwrap()
        .add(
            &kron_all(&[&sp.add(&sm).unwrap(), &id3])
                .unwrap()
                .scale_real(omega * p.delta_t),
        )
        .unwrap();
    let u2 = build_propagator(&g2, &[Role::System, Role::PresentBin], &[2, 3]).unwrap();
    let padded = kron_all(&[u2.gate(), &id3]).unwrap();
    let u3 = h.propagator(omega).unwrap();
    assert!(max_abs(&u3.gate().sub(&padded).unwrap()) < 1e-12);
}

#[test]
fn two_emitter_gate_is_identity_without_coupling() {
    let p = SimParams {
        d_sys: vec![2, 2],
        gamma_l: vec![0.0, 0.0],
        gamma_r: vec![0.0, 0.0],
        ..SimParams::default()
    };
    let u = hamiltonian_2tls_mar(&p).unwrap().propagator(0.0).unwrap();
    assert!(max_abs(&u.gate().sub(&ComplexTensor::identity(16)).unwrap()) < 1e-15);
}

#[test]
fn single_step_population_follows_linear_decay() {
    for (gamma, dt) in [(1.0, 0.05), (0.5, 0.02), (2.0, 0.01)] {
        let p = SimParams {
            delta_t: dt,
            t_max: dt,
            gamma_r: vec![gamma / 2.0],
            gamma_l: vec![gamma / 2.0],
            ..SimParams::default()
        };
        let rec = evolve(
            &hamiltonian_1tls(&p).unwrap(),
            &Pump::None,
            &tls_excited(),
            vec![],
            &p,
        )
        .unwrap();
        let pop = population(&rec, 0).unwrap();
        let x = gamma * dt;
        assert!((pop.values[1] - (1.0 - x)).abs() <= x * x);
    }
}

#[test]
fn rate_scaling_collapses_onto_gamma_t() {
    let base = SimParams {
        t_max: 4.0,
        ..SimParams::default()
    };
    let fast = SimParams {
        delta_t: base.delta_t / 4.0,
        t_max: base.t_max / 4.0,
        gamma_l: vec![2.0],
        gamma_r: vec![2.0],
        ..SimParams::default()
    };
    let run = |p: &SimParams| {
        let rec = evolve(
            &hamiltonian_1tls(p).unwrap(),
            &Pump::None,
            &tls_excited(),
            vec![],
            p,
        )
        .unwrap();
        population(&rec, 0).unwrap()
    };
    let a = run(&base);
    let b = run(&fast);
    assert_eq!(a.len(), b.len());
    for (k, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
        assert!((x - y).abs() < 1e-12);
        assert!((a.times[k] - 4.0 * b.times[k]).abs() < 1e-12);
    }
}

fn two_emitter_run(p: &SimParams, h: &Hamiltonian) -> (Vec<f64>, Vec<f64>) {
    let sys0 = SystemState::product(&[tls_excited(), tls_ground()]).unwrap();
    let rec = evolve(h, &Pump::None, &sys0, vec![], p).unwrap();
    (
        population(&rec, 0).unwrap().values,
        population(&rec, 1).unwrap().values,
    )
}

#[test]
fn zero_delay_pair_matches_amplitude_equations() {
    for phi in [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
        let p = SimParams {
            phi,
            t_max: 10.0,
            ..two_emitters(SimParams::default())
        };
        let (n1, n2) = two_emitter_run(&p, &hamiltonian_2tls_mar(&p).unwrap());
        let oracle = dde_two_tls(1.0, 0.0, phi, &p.times().unwrap()).unwrap();
        let tol = 2.0 * p.delta_t;
        assert!(common::max_diff(&n1, oracle.component(0).unwrap()) < tol);
        assert!(common::max_diff(&n2, oracle.component(1).unwrap()) < tol);
        if phi == std::f64::consts::PI {
            assert!((n1.last().unwrap() - 0.25).abs() < 0.01);
            assert!((n2.last().unwrap() - 0.25).abs() < 0.01);
        }
    }
}

#[test]
fn shortest_delay_approaches_zero_delay_pair() {
    let p = SimParams {
        phi: 1.0,
        t_max: 6.0,
        ..two_emitters(SimParams::default())
    };
    let q = SimParams {
        tau: p.delta_t,
        ..p.clone()
    };
    let (a1, a2) = two_emitter_run(&p, &hamiltonian_2tls_mar(&p).unwrap());
    let (b1, b2) = two_emitter_run(&q, &hamiltonian_2tls_nmar(&q).unwrap());
    assert!(common::max_diff(&a1, &b1) < 2.0 * p.delta_t);
    assert!(common::max_diff(&a2, &b2) < 2.0 * p.delta_t);
}

#[test]
fn delayed_pair_matches_amplitude_equations() {
    let p = SimParams {
        phi: std::f64::consts::PI,
        tau: 0.5,
        t_max: 8.0,
        ..two_emitters(SimParams::default())
    };
    let (n1, n2) = two_emitter_run(&p, &hamiltonian_2tls_nmar(&p).unwrap());
    let times = p.times().unwrap();
    let oracle = dde_two_tls(1.0, 0.5, p.phi, &times).unwrap();
    assert!(common::max_diff(&n1, oracle.component(0).unwrap()) < 2.0 * p.delta_t);
    assert!(common::max_diff(&n2, oracle.component(1).unwrap()) < 2.0 * p.delta_t);
    for (t, v) in times.iter().zip(&n2) {
        if *t < 0.5 - 1e-9 {
            assert!(*v < 1e-20);
        }
    }
}

#[test]
fn mismatched_parameters_are_rejected() {
    let p = SimParams::default();
    assert!(hamiltonian_1tls_feedback(&p).is_err());
    assert!(hamiltonian_2tls_mar(&p).is_err());
    assert!(hamiltonian_1tls_feedback(&SimParams {
        tau: 0.0,
        ..mirror(p.clone())
    })
    .is_err());
    assert!(hamiltonian_2tls_nmar(&two_emitters(p.clone())).is_err());
    let h = hamiltonian_1tls(&p).unwrap();
    let bad = ComplexTensor::identity(3);
    assert!(build_propagator(&bad, &h.roles, &h.dims).is_err());
    assert!(build_propagator(&h.static_part, &[Role::System], &[8]).is_err());
}
