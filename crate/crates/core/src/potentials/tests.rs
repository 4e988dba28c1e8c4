use std::sync::Arc;

use approx::assert_relative_eq;

use super::*;
use crate::spline::TimeFunction;

fn one_center(alpha: f64) -> PotentialSpec {
    PotentialSpec::new(Arc::new(CentralPower::kepler_like(2, alpha).unwrap()))
}

fn fd_gradient(spec: &PotentialSpec, t: f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6 * spec.metric().norm(x);
    let mut y = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for k in 0..x.len() {
        y[k] = x[k] + h;
        let fp = spec.evaluate(t, &y).unwrap();
        y[k] = x[k] - h;
        let fm = spec.evaluate(t, &y).unwrap();
        y[k] = x[k];
        g[k] = (fp - fm) / (2.0 * h) / spec.metric().coord_mass(k);
    }
    g
}

#[test]
fn one_center_value_and_gradient() {
    let spec = one_center(1.0);
    assert_eq!(spec.evaluate(0.0, &[1.0, 0.0]).unwrap(), 1.0);
    let g = spec.gradient(0.0, &[1.0, 0.0]).unwrap();
    assert_relative_eq!(g[0], -1.0, epsilon = 1e-15);
    assert_eq!(g[1], 0.0);
    assert_eq!(spec.limit_potential(0.0, &[1.0, 0.0]).unwrap(), 1.0);
}

#[test]
fn two_body_unit_separation() {
    let spec = PotentialSpec::new(Arc::new(PairPower::homogeneous(MassMetric::unit(2, 2), 1.0).unwrap()));
    assert_eq!(spec.evaluate(0.0, &[0.0, 0.0, 1.0, 0.0]).unwrap(), 1.0);
    assert!(matches!(spec.evaluate(0.0, &[0.0, 0.0, 0.0, 0.0]), Err(Error::SingularConfiguration { .. })));
}

#[test]
fn log_one_center_values() {
    let spec = PotentialSpec::new(Arc::new(CentralLog::new(MassMetric::unit(1, 2), TimeFunction::Constant(1.0)).unwrap()));
    let x = [(-1.0f64).exp(), 0.0];
    assert_relative_eq!(spec.evaluate(0.0, &x).unwrap(), 1.0, epsilon = 1e-15);
    let g = spec.gradient(0.0, &[2.0, 0.0]).unwrap();
    assert_relative_eq!(g[0], -0.5, epsilon = 1e-15);
}

#[test]
fn quasi_homogeneous_gradient_matches_differences() {
    let spec = PotentialSpec::new(Arc::new(CentralPower::new(MassMetric::unit(1, 2), vec![(1.0, 1.0), (1.0, 0.5)]).unwrap()));
    let g = spec.gradient(0.0, &[1.0, 0.0]).unwrap();
    let fd = fd_gradient(&spec, 0.0, &[1.0, 0.0]);
    assert_relative_eq!(g[0], -1.5, epsilon = 1e-14);
    assert_relative_eq!(g[0], fd[0], max_relative = 1e-8);
    assert_eq!(spec.limit_potential(0.0, &[1.0, 0.0]).unwrap(), 1.0);
}

#[test]
fn time_dependent_mass_partial_t() {
    let metric = MassMetric::unit(2, 2);
    let couplings = vec![TimeFunction::affine(1.0, 0.1), TimeFunction::Constant(1.0)];
    let spec = PotentialSpec::new(Arc::new(PairPower::with_couplings(metric, couplings, vec![(1.0, 1.0)]).unwrap()));
    let x = [0.0, 0.0, 1.0, 0.0];
    let dt = spec.partial_t(0.0, &x).unwrap();
    let h = 1e-6;
    let fd = (spec.evaluate(h, &x).unwrap() - spec.evaluate(-h, &x).unwrap()) / (2.0 * h);
    assert_relative_eq!(dt, 0.1, epsilon = 1e-12);
    assert_relative_eq!(dt, fd, epsilon = 1e-9);
}

#[test]
fn u1_violation_is_flagged() {
    let metric = MassMetric::unit(2, 2);
    let couplings = vec![TimeFunction::affine(1.0, 0.1), TimeFunction::Constant(1.0)];
    let spec = PotentialSpec::new(Arc::new(PairPower::with_couplings(metric, couplings, vec![(1.0, 1.0)]).unwrap()))
        .with_constants(Constants { c1: Some(1e-3), ..Constants::default() });
    assert!(matches!(spec.partial_t(0.0, &[0.0, 0.0, 1.0, 0.0]), Err(Error::AssumptionViolation { .. })));
}

#[test]
fn hip_hop_constant_n2() {
    assert_relative_eq!(hip_hop_constant(2, 1.0), 1.0, epsilon = 1e-15);
    let k3 = 2.0 / (std::f64::consts::PI / 3.0).sin();
    assert_relative_eq!(hip_hop_constant(3, 1.0), k3, epsilon = 1e-14);
}

#[test]
fn homogeneous_nbody_passes_assumptions() {
    let spec = PotentialSpec::new(Arc::new(PairPower::homogeneous(MassMetric::new(vec![1.0, 2.0, 3.0], 2).unwrap(), 1.0).unwrap()));
    let settings = CheckSettings { sampler: Sampler { count: 60, ..Sampler::default() }, w_plane: None };
    let report = spec.check_assumptions(&settings);
    assert!(report.all_passed(), "{:#?}", report.failures());
    assert_eq!(report.get("U2h").unwrap().worst_margin, 0.0);
}

#[test]
fn quasi_homogeneous_strict_u2h_with_zero_constants() {
    let spec = PotentialSpec::new(Arc::new(PairPower::new(MassMetric::unit(3, 2), vec![(1.0, 1.0), (0.5, 0.5)]).unwrap()));
    let settings = CheckSettings { sampler: Sampler { count: 60, ..Sampler::default() }, w_plane: None };
    let report = spec.check_assumptions(&settings);
    assert!(report.all_passed(), "{:#?}", report.failures());
    assert!(report.get("U2h").unwrap().worst_margin > 0.0);
    let fit = spec.fit_constants(&settings.sampler);
    assert_eq!(fit.c2, 0.0);
}

#[test]
fn quadratic_form_eigenspace_u7h() {
    // A = diag(2, 2, 5, 7): W = span(e1, e2) sits in the double eigenspace.
    let mut a = vec![vec![0.0; 4]; 4];
    for (i, v) in [2.0, 2.0, 5.0, 7.0].into_iter().enumerate() {
        a[i][i] = v;
    }
    let spec = PotentialSpec::new(Arc::new(QuadraticForm::new(MassMetric::unit(1, 4), 1.0, a).unwrap()));
    let settings = CheckSettings {
        sampler: Sampler { count: 100, ..Sampler::default() },
        w_plane: Some([vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]),
    };
    let report = spec.check_assumptions(&settings);
    assert!(report.get("U6").unwrap().passed);
    assert!(report.get("U7h").unwrap().passed, "{:?}", report.get("U7h"));
}

#[test]
fn quadratic_form_without_symmetry_fails_u6() {
    let mut a = vec![vec![0.0; 3]; 3];
    for (i, v) in [1.0, 3.0, 5.0].into_iter().enumerate() {
        a[i][i] = v;
    }
    let spec = PotentialSpec::new(Arc::new(QuadraticForm::new(MassMetric::unit(1, 3), 1.0, a).unwrap()));
    let settings = CheckSettings {
        sampler: Sampler { count: 40, ..Sampler::default() },
        w_plane: Some([vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]),
    };
    assert!(!spec.check_assumptions(&settings).get("U6").unwrap().passed);
}

#[test]
fn log_two_body_u7l_constant() {
    let metric = MassMetric::new(vec![2.0, 2.0], 2).unwrap();
    let spec = PotentialSpec::new(Arc::new(PairLog::new(metric).unwrap()));
    // relative plane {x_1 = -x_2}
    let settings = CheckSettings {
        sampler: Sampler { count: 60, ..Sampler::default() },
        w_plane: Some([vec![1.0, 0.0, -1.0, 0.0], vec![0.0, 1.0, 0.0, -1.0]]),
    };
    let report = spec.check_assumptions(&settings);
    for name in ["U0", "U2l", "U3l", "U4l", "U5", "U6", "U7l"] {
        assert!(report.get(name).unwrap().passed, "{name}: {:?}", report.get(name));
    }
}

#[test]
fn hip_hop_assumptions() {
    let spec = PotentialSpec::new(Arc::new(HipHop::new(2, 1.0).unwrap()));
    let settings = CheckSettings { sampler: Sampler { count: 40, ..Sampler::default() }, w_plane: None };
    let report = spec.check_assumptions(&settings);
    assert!(report.all_passed(), "{:#?}", report.failures());
}

#[test]
fn registry_builds_documented_kinds() {
    let reg = PotentialRegistry::default();
    let spec = reg
        .from_json(r#"{"kind": "nbody", "alpha": 1.0, "dim": 2, "masses": [1, 1], "constants": {"C2": 0.0, "gamma": 1.0}}"#)
        .unwrap();
    assert_eq!(spec.evaluate(0.0, &[0.0, 0.0, 1.0, 0.0]).unwrap(), 1.0);
    assert!(reg.from_json(r#"{"kind": "nbody", "alpha": 1.0, "bogus": 1}"#).is_err());
    assert!(matches!(reg.from_json(r#"{"kind": "nope"}"#), Err(Error::UnknownName { .. })));
    let q = reg.from_json(r#"{"kind": "quasi-homogeneous", "alpha": 1.0, "beta": 0.5, "lambda": 1.0}"#).unwrap();
    assert_relative_eq!(q.evaluate(0.0, &[1.0, 0.0]).unwrap(), 2.0);
    let err = reg.from_json(r#"{"kind": "subspace-distance", "alpha": 1.0, "dim": 3, "subspaces": [[[1, 0, 0], [0, 1, 0]]]}"#);
    assert!(err.is_err(), "codimension one must be rejected");
}

#[test]
fn anisotropic_gradient_matches_differences() {
    let shape: ShapeFnAlias = Arc::new(|s: &[f64]| 2.0 + s[0] * s[1]);
    let spec = PotentialSpec::new(Arc::new(
        AnisotropicHomogeneous::new("aniso", MassMetric::unit(1, 2), 1.0, shape, Vec::new()).unwrap(),
    ));
    let x = [0.3, -0.7];
    let g = spec.gradient(0.0, &x).unwrap();
    let fd = fd_gradient(&spec, 0.0, &x);
    for k in 0..2 {
        assert_relative_eq!(g[k], fd[k], max_relative = 1e-6);
    }
}

type ShapeFnAlias = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
