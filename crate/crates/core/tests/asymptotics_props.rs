mod common;

use common::{spec, Fixture};
use proptest::prelude::*;
use singlab::asymptotics::{events_isolated, fit_sundman, CollisionKind};

/// Two bodies falling together from rest along direction `theta`.
fn two_body_infall(alpha: f64, m1: f64, m2: f64, theta: f64) -> Fixture {
    let s = spec(&format!(r#"{{"kind": "nbody", "alpha": {alpha}, "dim": 2, "masses": [{m1}, {m2}]}}"#));
    let (c, sn) = (theta.cos(), theta.sin());
    let (a, b) = (m2 / (m1 + m2), m1 / (m1 + m2));
    Fixture::run(s, &[a * c, a * sn, -b * c, -b * sn], &[0.0; 4], (0.0, 10.0), 1e-13)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn exponent_is_universal(k in 0usize..3, m1 in 0.2..5.0f64, m2 in 0.2..5.0f64, theta in 0.0..6.28f64) {
        let alpha = [0.5, 1.0, 1.5][k];
        let f = two_body_infall(alpha, m1, m2, theta);
        prop_assert_eq!(f.events.len(), 1);
        let ev = &f.events[0];
        prop_assert_eq!(ev.kind, CollisionKind::Total);
        let fit = fit_sundman(ev, &f.solution, &f.spec).unwrap();
        let expected = 2.0 / (2.0 + alpha);
        prop_assert!((fit.exponent.unwrap() - expected).abs() <= 1e-3, "{:?}", fit.exponent);
        let (bp, bk) = (fit.b_potential.unwrap(), fit.b_kinetic.unwrap());
        prop_assert!((bp - bk).abs() <= 1e-3 * bp, "{} {}", bp, bk);
        let (lo, hi) = (fit.phi_min.unwrap(), fit.phi_max.unwrap());
        prop_assert!(lo > 0.0 && lo <= hi && hi.is_finite());
        let last = *fit.series.phi.last().unwrap();
        prop_assert!((last - (2.0 * bp).sqrt()).abs() <= 1e-3 * last, "{} {}", last, bp);
        let width = f.solution.times[fit.window.1] - f.solution.times[fit.window.0];
        prop_assert!(events_isolated(&f.events, width));
    }
}

#[test]
fn angular_velocity_decays_on_binary_fixture() {
    let f = common::binary_collision(1.0);
    let ev = &f.events[0];
    let fit = fit_sundman(ev, &f.solution, &f.spec).unwrap();
    let ang = &fit.series.angular;
    assert!(ang.iter().all(|v| v.is_finite()));
    assert!(ang.last().unwrap().abs() <= 1e-6);
}
