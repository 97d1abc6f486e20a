mod common;

use linengine::floquet::{check_stability, static_green_inverse, FloquetSolver};
use linengine::validate::{conjugation_error, translation_error};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn inv(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.clone().try_inverse().unwrap()
}

#[test]
fn undriven_network_reduces_to_static_green_function() {
    let cfg = common::driven_pair(0.0);
    let solver = FloquetSolver::new(&cfg);
    for w in [0.3, 1.0, 4.2] {
        let node = solver.solve(w).unwrap();
        let s = Complex64::new(cfg.sigma(), w);
        let g = inv(&static_green_inverse(&cfg, s).unwrap());
        assert!((node.coeff(0).unwrap() - &g).norm() <= 1e-12 * g.norm());
        for n in 1..=cfg.numerics.n_max as i32 {
            assert_eq!(node.coeff(n).unwrap().norm(), 0.0);
            assert_eq!(node.coeff(-n).unwrap().norm(), 0.0);
        }
    }
}

#[test]
fn first_harmonic_matches_first_order_perturbation() {
    let eps = 1e-4;
    let cfg = common::driven_pair(eps);
    let wd = cfg.network.drive_freq;
    let solver = FloquetSolver::new(&cfg);
    let v1 = cfg.network.harmonic(1).unwrap().map(|x| Complex64::new(x, 0.0));
    for w in [0.5, 1.0, 3.7] {
        let node = solver.solve(w).unwrap();
        let s = Complex64::new(cfg.sigma(), w);
        let g0 = inv(&static_green_inverse(&cfg, s).unwrap());
        for n in [1i32, -1] {
            let shift = Complex64::new(0.0, n as f64 * wd);
            let gn = inv(&static_green_inverse(&cfg, s + shift).unwrap());
            let expect = -(gn * &v1 * &g0);
            let got = node.coeff(n).unwrap();
            let rel = (got - &expect).norm() / expect.norm();
            assert!(rel < 1e-3, "n = {n}, w = {w}: {rel:e}");
        }
        let a0 = node.coeff(0).unwrap();
        assert!((a0 - &g0).norm() / g0.norm() < 1e-6);
    }
}

#[test]
fn bundled_configs_are_stable() {
    for name in ["single_thermal.toml", "thermal_pair.toml", "squeezed_pair.toml"] {
        let rep = check_stability(&common::bundled(name)).unwrap();
        assert!(rep.pass && rep.stiffness_positive, "{name}: {rep:?}");
    }
}

#[test]
fn strong_drive_fails_the_stability_test() {
    let rep = check_stability(&common::single(5.0, 1.0)).unwrap();
    assert!(!rep.pass);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conjugation_and_translation_hold(w in 0.05f64..20.0, eps in 0.0f64..0.4) {
        let cfg = common::driven_pair(eps);
        prop_assert!(conjugation_error(&cfg, &[w]).unwrap() <= 1e-10);
        prop_assert!(translation_error(&cfg, &[w]).unwrap() <= 1e-8);
    }

    #[test]
    fn harmonics_decay(w in 0.05f64..20.0) {
        let cfg = common::driven_pair(0.3);
        let node = FloquetSolver::new(&cfg).solve(w).unwrap();
        prop_assert!(node.converged);
        let a0 = node.coeff(0).unwrap().norm();
        let a4 = node.coeff(4).unwrap().norm().max(node.coeff(-4).unwrap().norm());
        prop_assert!(a4 < 1e-3 * a0);
    }
}
