mod common;

use common::{one_center, three_body};
use proptest::prelude::*;
use singlab::integrator::integrate;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kepler_energy_and_angular_momentum(e in 0.0..0.6f64, phase in 0.0..6.28f64) {
        let s = one_center(1.0);
        // periapsis 1 - e, semi-major axis 1
        let r = 1.0 - e;
        let speed = ((1.0 + e) / (1.0 - e)).sqrt();
        let x0 = [r * phase.cos(), r * phase.sin()];
        let v0 = [-speed * phase.sin(), speed * phase.cos()];
        let sol = integrate(&s, &x0, &v0, (0.0, 6.0), 1e-12).unwrap();
        let e0 = sol.energy(&s)[0];
        prop_assert!(sol.max_energy_drift(&s) <= 1e-9 * e0.abs());
        let c0 = sol.angular_momentum(0);
        for j in 0..sol.len() {
            prop_assert!((sol.angular_momentum(j) - c0).abs() <= 1e-9);
        }
    }

    #[test]
    fn reversibility(vx in -0.5..0.5f64, vy in -0.5..0.5f64) {
        let s = three_body(1.0);
        let x0 = [1.0, 0.0, -0.5, 0.9, -0.5, -0.9];
        let v0 = [vx, vy, 0.0, -vy, -vx, 0.0];
        let fwd = integrate(&s, &x0, &v0, (0.0, 0.5), 1e-12).unwrap();
        prop_assume!(!fwd.halted_on_collision());
        let (_, x1, v1) = fwd.last();
        let back_v: Vec<f64> = v1.iter().map(|v| -v).collect();
        let back = integrate(&s, x1, &back_v, (0.0, 0.5), 1e-12).unwrap();
        let (_, x2, _) = back.last();
        for (a, b) in x2.iter().zip(&x0) {
            prop_assert!((a - b).abs() <= 1e-8, "{} {}", a, b);
        }
    }

    #[test]
    fn scaling_covariance(lam in 0.5..2.0f64) {
        // x(t) solves the equations iff λx(λ^{-(2+α)/2} t) does
        let alpha = 1.0;
        let s = one_center(alpha);
        let x0 = [1.0, 0.0];
        let v0 = [0.1, 1.1];
        let a = integrate(&s, &x0, &v0, (0.0, 1.0), 1e-12).unwrap();
        let k = lam.powf((2.0 + alpha) / 2.0);
        let xs: Vec<f64> = x0.iter().map(|v| lam * v).collect();
        let vs: Vec<f64> = v0.iter().map(|v| lam / k * v).collect();
        let b = integrate(&s, &xs, &vs, (0.0, k), 1e-12).unwrap();
        let (_, xa, _) = a.last();
        let (_, xb, _) = b.last();
        for (p, q) in xa.iter().zip(xb) {
            prop_assert!((lam * p - q).abs() <= 1e-8 * lam, "{} {}", lam * p, q);
        }
    }
}

#[test]
fn energy_error_tracks_tolerance() {
    let s = three_body(1.0);
    let x0 = [1.0, 0.0, -0.5, 0.9, -0.5, -0.9];
    let v0 = [0.0, 0.3, -0.2, -0.1, 0.2, -0.2];
    for tol in [1e-8, 1e-10, 1e-12] {
        let sol = integrate(&s, &x0, &v0, (0.0, 1.0), tol).unwrap();
        let h0 = sol.energy(&s)[0];
        assert!(sol.max_energy_drift(&s) <= 50.0 * tol * (1.0 + h0.abs()), "{tol}: {}", sol.max_energy_drift(&s));
    }
}
