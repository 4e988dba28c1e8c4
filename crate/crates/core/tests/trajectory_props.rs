mod common;

use common::{one_center, three_body};
use proptest::prelude::*;
use singlab::integrator::homothetic_collision_orbit;
use singlab::metric::MassMetric;
use singlab::trajectory::Path;

fn random_path(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.2..2.0f64, 2), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn action_is_additive(points in random_path(12), cut in 1usize..11) {
        let grid = Path::uniform_grid(0.0, 1.0, 11);
        let p = Path::new(MassMetric::unit(1, 2), grid, points).unwrap();
        let s = one_center(1.0);
        let whole = p.action(&s).unwrap();
        let parts = p.action_between(&s, 0, cut).unwrap() + p.action_between(&s, cut, 11).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs());
    }

    #[test]
    fn kinetic_action_survives_linear_refinement(points in random_path(6), extra in prop::collection::vec(0.01..0.99f64, 1..8)) {
        let p = Path::new(MassMetric::unit(1, 2), Path::uniform_grid(0.0, 1.0, 5), points).unwrap();
        let q = p.refined_with(&extra).unwrap();
        let (a, b) = (p.kinetic_action(), q.kinetic_action());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn radial_split_reconstructs(points in random_path(8)) {
        let p = Path::new(MassMetric::unit(1, 2), Path::uniform_grid(0.0, 1.0, 7), points).unwrap();
        let split = p.radial_split();
        for (j, x) in p.points().iter().enumerate() {
            let s = split.s[j].as_ref().unwrap();
            for k in 0..2 {
                prop_assert!((split.r[j] * s[k] - x[k]).abs() <= 1e-14 * split.r[j]);
            }
        }
    }
}

#[test]
fn inertia_derivative_changes_sign_across_homothetic_collision() {
    let s = three_body(1.0);
    let h = 3f64.sqrt() / 2.0;
    let raw = [1.0, 0.0, -0.5, h, -0.5, -h];
    let r = s.metric().norm(&raw);
    let s_bar: Vec<f64> = raw.iter().map(|v| v / r).collect();
    let before: Vec<f64> = (0..=50).map(|k| -1.0 + 0.98 * k as f64 / 50.0).collect();
    let pre = homothetic_collision_orbit(&s, &s_bar, 0.0, &before).unwrap().to_path().unwrap();
    // the ejection branch is the time reverse of the infall
    let after: Vec<f64> = before.iter().rev().map(|t| -t).collect();
    let post = Path::new(s.metric().clone(), after, pre.points().iter().rev().cloned().collect()).unwrap();
    let di_pre = pre.inertia_series().unwrap().di;
    let di_post = post.inertia_series().unwrap().di;
    assert!(di_pre.iter().all(|v| *v < 0.0));
    assert!(di_post.iter().all(|v| *v > 0.0));
}

#[test]
fn path_csv_round_trip() {
    let m = MassMetric::unit(1, 2);
    let p = Path::from_fn(m.clone(), Path::uniform_grid(0.0, 1.0, 5), |t| vec![t, t * t]).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let q = Path::read_csv(m, buf.as_slice()).unwrap();
    assert_eq!(p.grid(), q.grid());
    assert_eq!(p.points(), q.points());
}
