mod common;

use common::three_body;
use proptest::prelude::*;
use singlab::minimizer::{local_minimize, BoundaryCondition, DiscreteAction, MinimizerSettings, PathObjective};
use singlab::regularization::EtaCutoff;
use singlab::subspace::Subspace;
use singlab::trajectory::Path;

fn nodes() -> impl Strategy<Value = Vec<Vec<f64>>> {
    // three bodies kept apart: body i lives near (2i, 0)
    prop::collection::vec(prop::collection::vec(-0.3..0.3f64, 6), 7).prop_map(|mut v| {
        for p in &mut v {
            for i in 0..3 {
                p[2 * i] += 2.0 * i as f64;
            }
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_matches_differences(points in nodes(), cut in prop::bool::ANY) {
        let grid = Path::uniform_grid(0.0, 1.0, 6);
        let mut action = DiscreteAction::new(three_body(1.0), grid).unwrap();
        if cut {
            action = action.with_cutoff(EtaCutoff::new(2.0).unwrap());
        }
        let mut g = vec![vec![0.0; 6]; 7];
        action.evaluate(&points, Some(&mut g)).unwrap();
        let h = 1e-6;
        for j in [0, 3, 6] {
            for k in [0, 3, 5] {
                let mut p = points.clone();
                p[j][k] += h;
                let fp = action.evaluate(&p, None).unwrap();
                p[j][k] -= 2.0 * h;
                let fm = action.evaluate(&p, None).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                prop_assert!((fd - g[j][k]).abs() <= 1e-5 * (1.0 + g[j][k].abs()), "{} {}", fd, g[j][k]);
            }
        }
    }

    #[test]
    fn action_is_translation_invariant(points in nodes(), shift in prop::array::uniform2(-5.0..5.0f64)) {
        let grid = Path::uniform_grid(0.0, 1.0, 6);
        let action = DiscreteAction::new(three_body(1.0), grid).unwrap();
        let moved: Vec<Vec<f64>> = points.iter().map(|p| p.iter().enumerate().map(|(k, v)| v + shift[k % 2]).collect()).collect();
        let a = action.evaluate(&points, None).unwrap();
        let b = action.evaluate(&moved, None).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }
}

#[test]
fn minimizer_is_translation_equivariant() {
    let s = three_body(1.0);
    let metric = s.metric().clone();
    let grid = Path::uniform_grid(0.0, 1.0, 20);
    let a = [0.0, 0.0, 2.0, 0.0, 4.0, 0.0];
    let b = [0.0, 1.0, 2.0, 1.2, 4.0, 0.8];
    let init = Path::linear(metric.clone(), grid.clone(), &a, &b).unwrap();
    let shift = |p: &[f64]| -> Vec<f64> { p.iter().enumerate().map(|(k, v)| v + if k % 2 == 0 { 3.0 } else { -1.0 }).collect() };
    let moved = Path::new(metric, grid.clone(), init.points().iter().map(|p| shift(p)).collect()).unwrap();
    let action = DiscreteAction::new(s, grid).unwrap();
    let settings = MinimizerSettings::default();
    let r1 = local_minimize(&action, &init, &BoundaryCondition::FixedEnds, &settings).unwrap();
    let r2 = local_minimize(&action, &moved, &BoundaryCondition::FixedEnds, &settings).unwrap();
    assert!(r1.converged && r2.converged);
    assert!((r1.action - r2.action).abs() <= 1e-8 * r1.action);
    for (p, q) in r1.path.points().iter().zip(r2.path.points()) {
        let sp = shift(p);
        for (u, v) in sp.iter().zip(q) {
            assert!((u - v).abs() <= 1e-5, "{u} {v}");
        }
    }
}

#[test]
fn subspace_ends_stay_on_their_subspaces() {
    let s = common::one_center(1.0);
    let metric = s.metric().clone();
    let grid = Path::uniform_grid(0.0, 1.0, 30);
    let start = Subspace::from_spanning(&metric, &[vec![1.0, 0.0]]).unwrap();
    let end = Subspace::from_spanning(&metric, &[vec![0.0, 1.0]]).unwrap();
    let init = Path::linear(metric, grid.clone(), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
    let action = DiscreteAction::new(s, grid).unwrap();
    let bc = BoundaryCondition::SubspaceEnds { start: start.clone(), end: end.clone() };
    let r = local_minimize(&action, &init, &bc, &MinimizerSettings::default()).unwrap();
    let pts = r.path.points();
    assert!(start.distance(&pts[0]) <= 1e-12);
    assert!(end.distance(pts.last().unwrap()) <= 1e-12);
    assert!(r.action <= action.evaluate(init.points(), None).unwrap());
}
