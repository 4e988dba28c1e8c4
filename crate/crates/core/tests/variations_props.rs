mod common;

use common::{one_center, three_body};
use proptest::prelude::*;
use singlab::variations::{
    circle_average_log, circle_average_log_quadrature, displacement_potential, log_mean_value, log_mean_value_quadrature, phi_alpha,
    BasePath, BlowUp,
};

fn rotate(v: &[f64], a: f64) -> Vec<f64> {
    vec![a.cos() * v[0] - a.sin() * v[1], a.sin() * v[0] + a.cos() * v[1]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn displacement_potential_homogeneity(lam in 0.1..10.0f64, mu in 0.1..10.0f64, a in 0.3..2.8f64, k in 0usize..3) {
        let alpha = [0.5, 1.0, 1.5][k];
        let s = one_center(alpha);
        let zeta = [1.0, 0.0];
        let delta = [0.5 * a.cos(), 0.5 * a.sin()];
        let base = displacement_potential(&s, &zeta, &delta).unwrap();
        let scaled = displacement_potential(&s, &[lam, 0.0], &[mu * delta[0], mu * delta[1]]).unwrap();
        let expect = lam.powf(-1.0 - alpha / 2.0) * mu.powf(1.0 - alpha / 2.0) * base;
        prop_assert!((scaled - expect).abs() <= 1e-8 * expect.abs(), "{} {}", scaled, expect);
    }

    #[test]
    fn displacement_potential_rotation(rot in 0.0..6.28f64, a in 0.3..2.8f64) {
        let s = one_center(1.0);
        let zeta = [1.3, 0.2];
        let delta = rotate(&[0.4, 0.0], a);
        let base = displacement_potential(&s, &zeta, &delta).unwrap();
        let turned = displacement_potential(&s, &rotate(&zeta, rot), &rotate(&delta, rot)).unwrap();
        prop_assert!((base - turned).abs() <= 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn log_mean_values_match_quadrature(y in 0.5..5.0f64, frac in 0.05..0.95f64, x in prop::array::uniform2(-2.0..2.0f64), z in 0.1..3.0f64) {
        let zz = 0.5 * y * frac;
        let a = log_mean_value(y, zz).unwrap();
        prop_assert!((a - log_mean_value_quadrature(y, zz).unwrap()).abs() <= 1e-10);
        let r = x[0].hypot(x[1]);
        prop_assume!((r - z).abs() > 1e-3);
        let b = circle_average_log(x, z).unwrap();
        prop_assert!((b - circle_average_log_quadrature(x, z).unwrap()).abs() <= 1e-10);
    }
}

#[test]
fn phi_sign_dichotomy() {
    for alpha in [0.5, 1.0, 1.5] {
        assert!(phi_alpha(alpha, std::f64::consts::PI).unwrap() < 0.0);
        assert!(phi_alpha(alpha, 0.05).unwrap() > 0.0);
        let at_zero = phi_alpha(alpha, 0.0).unwrap();
        if alpha >= 1.0 {
            assert_eq!(at_zero, f64::INFINITY);
        } else {
            assert!(at_zero > 0.0);
        }
    }
}

#[test]
fn blow_up_is_a_zero_energy_solution() {
    let h = 3f64.sqrt() / 2.0;
    for (s, dir) in [(one_center(1.0), vec![0.6, 0.8]), (three_body(1.0), vec![1.0, 0.0, -0.5, h, -0.5, -h])] {
        let q = BlowUp::parabolic(&s, &dir).unwrap();
        for t in [0.1, 0.5, 2.0] {
            assert!(q.energy(&s, t).abs() <= 1e-10, "{}", q.energy(&s, t));
            let dt = 1e-4 * t;
            let (a, b, c) = (q.point(t - dt), q.point(t), q.point(t + dt));
            let g = s.gradient(0.0, &b).unwrap();
            for k in 0..b.len() {
                let acc = (a[k] - 2.0 * b[k] + c[k]) / (dt * dt);
                assert!((acc - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()), "{acc} {}", g[k]);
            }
        }
    }
}
