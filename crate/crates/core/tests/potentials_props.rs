mod common;

use common::spec;
use proptest::prelude::*;
use singlab::PotentialSpec;

fn homogeneous_kinds() -> Vec<(PotentialSpec, f64)> {
    vec![
        (spec(r#"{"kind": "one-center", "alpha": 1.0, "dim": 2}"#), 1.0),
        (spec(r#"{"kind": "one-center", "alpha": 0.5, "dim": 3}"#), 0.5),
        (spec(r#"{"kind": "nbody", "alpha": 1.5, "dim": 2, "masses": [1, 2, 3]}"#), 1.5),
        (spec(r#"{"kind": "quadratic-form", "alpha": 1.0, "dim": 2, "matrix": [[2, 0], [0, 1]]}"#), 1.0),
        (spec(r#"{"kind": "hip-hop", "alpha": 1.0, "n_gon": 3}"#), 1.0),
    ]
}

fn direction(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
}

fn off_delta(s: &PotentialSpec, x: &[f64]) -> bool {
    s.singular_distance(x) > 1e-2 * s.metric().norm(x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn euler_identity(k in 0usize..5, raw in direction(6), r in 0.01..10.0f64) {
        let (s, alpha) = &homogeneous_kinds()[k];
        let x: Vec<f64> = raw.iter().take(s.size()).map(|v| v * r).collect();
        prop_assume!(s.metric().norm(&x) > 0.0 && off_delta(s, &x));
        let u = s.evaluate(0.0, &x).unwrap();
        let g = s.gradient(0.0, &x).unwrap();
        let gx = s.metric().dot(&g, &x);
        prop_assert!((gx + alpha * u).abs() <= 1e-10 * u, "{} {}", gx, u);
    }

    #[test]
    fn gradient_matches_differences(k in 0usize..5, raw in direction(6)) {
        let (s, _) = &homogeneous_kinds()[k];
        let x: Vec<f64> = raw.iter().take(s.size()).copied().collect();
        prop_assume!(s.metric().norm(&x) > 0.1 && off_delta(s, &x));
        let partial = s.partial_x(0.0, &x).unwrap();
        let h = 1e-6 * s.metric().norm(&x);
        for i in 0..x.len() {
            let mut p = x.clone();
            p[i] += h;
            let up = s.evaluate(0.0, &p).unwrap();
            p[i] -= 2.0 * h;
            let um = s.evaluate(0.0, &p).unwrap();
            let fd = (up - um) / (2.0 * h);
            let scale = partial.iter().map(|v| v.abs()).fold(0.0, f64::max);
            prop_assert!((fd - partial[i]).abs() <= 1e-6 * scale, "{} vs {}", fd, partial[i]);
        }
    }

    #[test]
    fn homogeneous_scaling(k in 0usize..5, raw in direction(6), lam in 0.01..100.0f64) {
        let (s, alpha) = &homogeneous_kinds()[k];
        let x: Vec<f64> = raw.iter().take(s.size()).copied().collect();
        prop_assume!(off_delta(s, &x));
        let u = s.evaluate(0.0, &x).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v * lam).collect();
        let ul = s.evaluate(0.0, &y).unwrap();
        prop_assert!((ul - lam.powf(-alpha) * u).abs() <= 1e-12 * ul.abs());
    }

    #[test]
    fn logarithmic_scaling(raw in direction(4), lam in 0.01..100.0f64) {
        let s = spec(r#"{"kind": "log-nbody", "dim": 2, "masses": [1, 2]}"#);
        prop_assume!(off_delta(&s, &raw));
        let u = s.evaluate(0.0, &raw).unwrap();
        let y: Vec<f64> = raw.iter().map(|v| v * lam).collect();
        let m = s.log_coefficient(0.0);
        let expect = u - m * lam.ln();
        prop_assert!((s.evaluate(0.0, &y).unwrap() - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }

    #[test]
    fn collision_set_is_a_cone(a in prop::array::uniform2(-2.0..2.0f64), c in prop::array::uniform2(-2.0..2.0f64)) {
        let s = spec(r#"{"kind": "nbody", "alpha": 1.0, "dim": 2, "masses": [1, 1, 1]}"#);
        let xi = [a[0], a[1], a[0], a[1], c[0], c[1]];
        for lam in [-2.0, 0.5, 3.0] {
            let y: Vec<f64> = xi.iter().map(|v| v * lam).collect();
            prop_assert_eq!(s.singular_distance(&y), 0.0);
        }
    }
}

#[test]
fn hip_hop_constant_matches_sine_sum() {
    for (n, alpha) in [(2usize, 1.0), (3, 1.0), (5, 0.5)] {
        let expect: f64 = (1..n).map(|k| (k as f64 * std::f64::consts::PI / n as f64).sin().powf(-alpha)).sum();
        let got = singlab::potentials::hip_hop_constant(n, alpha);
        assert!((got - expect).abs() <= 1e-12 * expect, "{n}: {got} {expect}");
    }
    assert_eq!(singlab::potentials::hip_hop_constant(2, 1.0), 1.0);
}
