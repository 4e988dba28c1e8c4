#![allow(dead_code)]

use singlab::asymptotics::{detect_collisions, CollisionEvent, DetectSettings};
use singlab::integrator::{integrate, OdeSolution};
use singlab::potentials::PotentialRegistry;
use singlab::PotentialSpec;

pub fn spec(json: &str) -> PotentialSpec {
    PotentialRegistry::default().from_json(json).expect("fixture potential")
}

/// `|x|^{-α}` in the plane.
pub fn one_center(alpha: f64) -> PotentialSpec {
    spec(&format!(r#"{{"kind": "one-center", "alpha": {alpha}, "dim": 2}}"#))
}

/// `-log|x|` in the plane, with `C₂ = 1` so that (U2) holds on `|x| ≤ 1`.
pub fn log_one_center() -> PotentialSpec {
    spec(r#"{"kind": "log-one-center", "dim": 2, "constants": {"C2": 1.0}}"#)
}

pub fn three_body(alpha: f64) -> PotentialSpec {
    spec(&format!(r#"{{"kind": "nbody", "alpha": {alpha}, "dim": 2, "masses": [1, 1, 1]}}"#))
}

pub struct Fixture {
    pub spec: PotentialSpec,
    pub solution: OdeSolution,
    pub events: Vec<CollisionEvent>,
}

impl Fixture {
    pub fn run(spec: PotentialSpec, x0: &[f64], v0: &[f64], span: (f64, f64), tol: f64) -> Self {
        let solution = integrate(&spec, x0, v0, span, tol).expect("integration");
        let events = detect_collisions(&solution, &spec, &DetectSettings::default()).expect("detection");
        Self { spec, solution, events }
    }
}

/// Zero-energy radial infall from `r = 1`, the time reverse of an ejection.
pub fn kepler_ejection(alpha: f64) -> Fixture {
    Fixture::run(one_center(alpha), &[1.0, 0.0], &[-(2f64.sqrt()), 0.0], (0.0, 1.0), 1e-13)
}

/// Infall from rest at `r = 1` under `-log|x|`.
pub fn log_infall() -> Fixture {
    Fixture::run(log_one_center(), &[1.0, 0.0], &[0.0, 0.0], (0.0, 2.0), 1e-13)
}

/// Bodies 1 and 2 fall together from rest while body 3 waits far away.
pub fn binary_collision(alpha: f64) -> Fixture {
    Fixture::run(three_body(alpha), &[0.5, 0.0, -0.5, 0.0, 0.0, 10.0], &[0.0; 6], (0.0, 5.0), 1e-13)
}

/// `|x|^{-1} + |x|^{-1/2}`, zero-energy infall from `r = 1`.
pub fn quasi_homogeneous_infall() -> Fixture {
    let spec = spec(r#"{"kind": "quasi-homogeneous", "alpha": 1.0, "beta": 0.5, "dim": 2}"#);
    Fixture::run(spec, &[1.0, 0.0], &[-2.0, 0.0], (0.0, 1.0), 1e-13)
}

/// Two equal bodies falling together from rest.
pub fn log_two_body() -> Fixture {
    let spec = spec(r#"{"kind": "log-nbody", "dim": 2, "masses": [1, 1]}"#);
    Fixture::run(spec, &[0.5, 0.0, -0.5, 0.0], &[0.0; 4], (0.0, 10.0), 1e-12)
}
