//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p singlab --test acceptance`. Criteria listed in
//! `KNOWN_RED` are reported but do not fail the run.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singlab::asymptotics::{events_isolated, fit_sundman, fit_sundman_log, series_at_radius, SundmanFit};
use singlab::clusters::{build_lattice, reduce_partial_collision};
use singlab::integrator::{integrate_to_grid, IntegratorSettings};
use singlab::minimizer::{local_minimize, BoundaryCondition, DiscreteAction, MinimizerSettings, PathObjective};
use singlab::potentials::PotentialRegistry;
use singlab::regularization::{epsilon_sweep, eta, eta_prime, u_eps, EtaCutoff, PenalizedProblem, SweepSettings};
use singlab::variations::{
    average_phi, averaged_log_action_bound, circle_average_log, circle_average_log_quadrature, displacement_potential,
    log_mean_value, log_mean_value_quadrature, phi_alpha, variation_report, AverageScheme, AveragingSettings,
    SampledPath,
};
use singlab::{MassMetric, Path};

use common::*;

/// Criteria that are known not to hold; see the decisions ledger.
const KNOWN_RED: &[usize] = &[8];

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn power_fit(alpha: f64) -> SundmanFit {
    let f = kepler_ejection(alpha);
    assert_eq!(f.events.len(), 1, "one collision expected");
    fit_sundman(&f.events[0], &f.solution, &f.spec).expect("fit")
}

fn c1_sundman_exponent() -> Check {
    let t = Instant::now();
    let fit = power_fit(1.0);
    let secs = t.elapsed().as_secs_f64();
    let (e, k) = (fit.exponent.unwrap(), fit.k.unwrap());
    let k_exact = 3.0 / 2f64.sqrt();
    let mut pass = (e - 2.0 / 3.0).abs() <= 1e-3 && ((k - k_exact) / k_exact).abs() <= 1e-3 && secs <= 5.0;
    let mut detail = format!("α=1: p={e:.8} K={k:.8} ({secs:.2}s)");
    for (alpha, expect) in [(0.5, 0.8), (1.5, 4.0 / 7.0)] {
        let e = power_fit(alpha).exponent.unwrap();
        pass &= (e - expect).abs() <= 1e-2;
        detail += &format!("; α={alpha}: p={e:.6} vs {expect:.6}");
    }
    Check::new(pass, detail)
}

fn c2_limit_consistency() -> Check {
    let fit = power_fit(1.0);
    let (bp, bk) = (fit.b_potential.unwrap(), fit.b_kinetic.unwrap());
    let pass = (bp - bk).abs() <= 1e-3 && (bp - 1.0).abs() <= 1e-3 && (bk - 1.0).abs() <= 1e-3;
    Check::new(pass, format!("b(r^αU)={bp:.10} b(ṙ²r^α/2)={bk:.10}"))
}

fn c3_log_law() -> Check {
    let f = log_infall();
    let fit = fit_sundman_log(&f.events[0], &f.solution, &f.spec).expect("log fit");
    let m0 = fit.m0.unwrap();
    let kin = series_at_radius(&fit, &fit.series.kinetic, 1e-8);
    let radii = [1e-5, 1e-6, 1e-7, 1e-8];
    let rho: Vec<f64> = radii.iter().map(|&r| series_at_radius(&fit, &fit.series.ratio, r)).collect();
    let improving = rho.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs());
    let last = rho[rho.len() - 1];
    let pass = (kin - m0).abs() <= 1e-4 && (last - 1.0).abs() <= 0.1 && improving;
    Check::new(pass, format!("ṙ²/(-2log r)={kin:.8} (M0={m0}); ρ at 1e-5..1e-8 = {rho:.5?}"))
}

fn c4_averaging_kernel() -> Check {
    let phi = phi_alpha(1.0, PI).unwrap();
    let mut pass = (phi + 1.5 * PI).abs() <= 1e-8;
    let mut detail = format!("Φ₁(π)+3π/2={:.1e}", phi + 1.5 * PI);
    for alpha in [0.5, 1.0, 1.5] {
        let t = Instant::now();
        let a = average_phi(alpha, AverageScheme::Series).unwrap();
        let b = average_phi(alpha, AverageScheme::Double).unwrap();
        let secs = t.elapsed().as_secs_f64();
        pass &= a < 0.0 && b < 0.0 && (a - b).abs() <= 1e-6 && secs <= 10.0;
        detail += &format!("; α={alpha}: {a:.9} / {b:.9} ({secs:.2}s)");
    }
    Check::new(pass, detail)
}

fn c5_mean_values() -> Check {
    let mut worst_lemma: f64 = 0.0;
    let mut worst_circle: f64 = 0.0;
    for i in 0..10 {
        let z = 0.1 + 0.3 * i as f64;
        for j in 0..10 {
            let y = 2.0 * z * (1.0 + 0.4 * j as f64);
            let d = (log_mean_value(y, z).unwrap() - log_mean_value_quadrature(y, z).unwrap()).abs();
            worst_lemma = worst_lemma.max(d);
            let rho = 0.05 + 0.45 * j as f64;
            let x = [rho * (0.7 * i as f64).cos(), rho * (0.7 * i as f64).sin()];
            let d = (circle_average_log(x, z).unwrap() - circle_average_log_quadrature(x, z).unwrap()).abs();
            worst_circle = worst_circle.max(d);
        }
    }
    Check::new(
        worst_lemma <= 1e-10 && worst_circle <= 1e-10,
        format!("max deviation {worst_lemma:.1e} (log y+2z cos), {worst_circle:.1e} (circle)"),
    )
}

fn c6_homogeneity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let alpha = [0.5, 1.0, 1.5][k % 3];
        let spec = one_center(alpha);
        let zeta = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let delta = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let lam: f64 = rng.random_range(1e-3..10.0);
        let mu: f64 = rng.random_range(1e-3..10.0);
        let s = displacement_potential(&spec, &zeta, &delta).unwrap();
        let scaled = displacement_potential(&spec, &zeta.map(|v| lam * v), &delta.map(|v| mu * v)).unwrap();
        let expect = lam.powf(-1.0 - alpha / 2.0) * mu.powf(1.0 - alpha / 2.0) * s;
        worst = worst.max(((scaled - expect) / expect).abs());
    }
    Check::new(worst <= 1e-8, format!("max relative error {worst:.1e} over 100 draws"))
}

fn c7_collision_exclusion() -> Check {
    let rep = variation_report(1.0, &AveragingSettings::default()).unwrap();
    let ratios: Vec<f64> = rep
        .delta_grid
        .iter()
        .zip(&rep.action_differentials)
        .map(|(d, a)| a / d.sqrt() / rep.circle_average)
        .collect();
    let negative = rep.action_differentials.iter().all(|a| *a < 0.0);
    let last = ratios[ratios.len() - 1];
    let pass = negative && (last - 1.0).abs() <= 0.05;
    Check::new(
        pass,
        format!("averages {}; ΔA/(|δ|^½·avg S) = {ratios:.4?}", sci(&rep.action_differentials)),
    )
}

fn c8_log_exclusion() -> Check {
    let f = log_two_body();
    let fit = fit_sundman_log(&f.events[0], &f.solution, &f.spec).unwrap();
    let base = SampledPath::from_solution(&f.solution, fit.gap).unwrap();
    let plane = f.events[0].subspace.as_ref().unwrap().orthogonal_complement();
    let rep = averaged_log_action_bound(&base, &f.spec, &plane, &[1e-2, 1e-3, 1e-4], 0.2, 0.0).unwrap();
    let pot: Vec<f64> = rep.averages.iter().map(|a| a.mean.potential).collect();
    Check::new(
        rep.fit.c < 0.0,
        format!(
            "c={:.4} (potential part alone c={:.4}, averaged potential {}, kinetic exponent {:.3})",
            rep.fit.c,
            rep.potential_fit.c,
            sci(&pot),
            rep.kinetic_exponent
        ),
    )
}

fn c9_regularization() -> Check {
    let knots = [(0.5, 0.5, 1.0), (1.0, 1.0, 1.0), (2.0, 1.75, 0.5), (3.0, 2.0, 0.0), (10.0, 2.0, 0.0)];
    let mut pass = knots.iter().all(|&(s, v, d)| eta(s).unwrap() == v && eta_prime(s).unwrap() == d);
    pass &= (eta(1.0 + 1e-12).unwrap() - 1.0).abs() < 1e-11 && (eta_prime(1.0 + 1e-12).unwrap() - 1.0).abs() < 1e-11;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = three_body(1.0);
    let mut worst_ineq: f64 = f64::NEG_INFINITY;
    let mut worst_u: f64 = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let eps = rng.random_range(1e-3..10.0);
        let s: f64 = 10f64.powf(rng.random_range(-4.0..4.0));
        let c = EtaCutoff::new(eps).unwrap();
        let (v, d) = (c.value(s).unwrap(), c.derivative(s).unwrap());
        worst_ineq = worst_ineq.max(d * s - v - 1e-12 * (1.0 + v)).max(d - 1.0 - 1e-12);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = spec.potential().value(0.0, &x);
        worst_u = worst_u.max(u_eps(&spec, eps, 0.0, &x) - u);
    }
    pass &= worst_ineq <= 0.0 && worst_u <= 0.0;

    let kepler = one_center(1.0);
    let grid = Path::uniform_grid(0.0, PI / 2.0, 100);
    let chord = Path::linear(MassMetric::unit(1, 2), grid.clone(), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
    let settings = MinimizerSettings { tol: 1e-12, ..Default::default() };
    let obj = DiscreteAction::new(kepler.clone(), grid).unwrap();
    let anchor = local_minimize(&obj, &chord, &BoundaryCondition::FixedEnds, &settings).unwrap().path;
    let problem = PenalizedProblem::new(kepler, anchor, PI / 4.0, PI / 8.0, None).unwrap();
    let sweep = SweepSettings { minimizer: settings, perturbation: 1e-2 };
    let schedule = [0.5, 0.25, 0.125, 0.0625];
    let entries = epsilon_sweep(&problem, &schedule, &sweep).unwrap();
    let sup = entries.iter().map(|e| e.sup_dist).fold(0.0, f64::max);
    pass &= entries.iter().all(|e| e.converged) && sup <= 1e-6;
    Check::new(
        pass,
        format!("knots exact; worst η_ε slack {worst_ineq:.1e}, worst U_ε-U {worst_u:.1e}; sweep sup-distance {sup:.1e}"),
    )
}

fn c10_conservation() -> Check {
    let spec = PotentialRegistry::default()
        .from_json(
            r#"{"kind": "nbody", "alpha": 1.0, "dim": 2,
                "mass_poly": [{"knots": [0, 1], "values": [1.0, 1.1]}, {"knots": [0, 1], "values": [1, 1]}]}"#,
        )
        .unwrap();
    let x0 = [0.5, 0.0, -0.5, 0.0];
    let v0 = [0.0, 0.7, 0.0, -0.7];
    let residual = |n: usize| {
        let grid = Path::uniform_grid(0.0, 2.0, n);
        let sol = integrate_to_grid(&spec, &x0, &v0, &grid, &IntegratorSettings::default()).unwrap();
        sol.to_path().unwrap().energy_series(&spec).unwrap().max_residual()
    };
    let r: Vec<f64> = [50, 100, 200, 400].iter().map(|&n| residual(n)).collect();
    let orders: Vec<f64> = r.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let mut pass = orders.iter().all(|o| (o - 2.0).abs() <= 0.2);

    let fixtures = [
        ("α=0.5", kepler_ejection(0.5)),
        ("α=1", kepler_ejection(1.0)),
        ("α=1.5", kepler_ejection(1.5)),
        ("quasi-homogeneous", quasi_homogeneous_infall()),
        ("log", log_infall()),
        ("binary", binary_collision(1.0)),
    ];
    let mut margins = Vec::new();
    for (name, f) in &fixtures {
        let m = f.solution.lagrange_jacobi_margin(&f.spec).into_iter().fold(f64::INFINITY, f64::min);
        pass &= m >= -1e-6;
        margins.push(format!("{name} {m:.2e}"));
    }
    Check::new(pass, format!("ḣ+∂U/∂t residuals {}, orders {orders:.3?}; min LJ margin: {}", sci(&r), margins.join(", ")))
}

fn c11_partial_reduction() -> Check {
    let f = binary_collision(1.0);
    let lattice = build_lattice(&f.spec).unwrap();
    let red = reduce_partial_collision(&f.solution, &f.events[0], &lattice, &f.spec).unwrap();
    let ev = singlab::asymptotics::detect_collisions(&red.window, &red.spec, &Default::default()).unwrap();
    let fit = fit_sundman(&ev[0], &red.window, &red.spec).unwrap();
    let e = fit.exponent.unwrap();
    let direct = power_fit(1.0).exponent.unwrap();
    let mut pass = f.events[0].cluster == Some(vec![vec![0, 1], vec![2]]) && (e - direct).abs() <= 1e-2;
    let window = |fit: &SundmanFit| fit.series.tau.iter().copied().fold(0.0, f64::max);
    let mut isolated = vec![events_isolated(&f.events, window(&fit)), events_isolated(&ev, window(&fit))];
    for alpha in [0.5, 1.0, 1.5] {
        let k = kepler_ejection(alpha);
        let fit = fit_sundman(&k.events[0], &k.solution, &k.spec).unwrap();
        isolated.push(events_isolated(&k.events, window(&fit)));
    }
    let q = quasi_homogeneous_infall();
    let fit = fit_sundman(&q.events[0], &q.solution, &q.spec).unwrap();
    isolated.push(events_isolated(&q.events, window(&fit)));
    for l in [log_infall(), log_two_body()] {
        let fit = fit_sundman_log(&l.events[0], &l.solution, &l.spec).unwrap();
        isolated.push(events_isolated(&l.events, window(&fit)));
    }
    pass &= isolated.iter().all(|b| *b);
    Check::new(pass, format!("reduced p={e:.6} vs direct {direct:.6}; isolation {isolated:?}"))
}

fn c12_minimizer() -> Check {
    let kepler = one_center(1.0);
    let grid = Path::uniform_grid(0.0, PI / 2.0, 400);
    let chord = Path::linear(MassMetric::unit(1, 2), grid.clone(), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
    let obj = DiscreteAction::new(kepler.clone(), grid.clone()).unwrap();
    let settings = MinimizerSettings { tol: 1e-12, ..Default::default() };
    let res = local_minimize(&obj, &chord, &BoundaryCondition::FixedEnds, &settings).unwrap();
    let exact = 1.5 * PI / 2.0;
    let rel = (res.action - exact).abs() / exact;

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = three_body(1.0);
    let grid = Path::uniform_grid(0.0, 1.0, 20);
    let obj = DiscreteAction::new(spec, grid.clone()).unwrap();
    let base = [1.0, 0.0, -0.5, 0.8, -0.5, -0.8];
    let points: Vec<Vec<f64>> =
        grid.iter().map(|_| base.iter().map(|b| b + rng.random_range(-0.1..0.1)).collect()).collect();
    let mut g = vec![vec![0.0; 6]; points.len()];
    obj.evaluate(&points, Some(&mut g)).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..points.len() {
        for k in 0..6 {
            let h = 1e-6 * (1.0 + points[j][k].abs());
            let mut p = points.clone();
            p[j][k] += h;
            let fp = obj.evaluate(&p, None).unwrap();
            p[j][k] -= 2.0 * h;
            let fm = obj.evaluate(&p, None).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - g[j][k]).abs() / g[j][k].abs().max(1.0));
        }
    }
    Check::new(rel <= 1e-4 && worst <= 1e-6, format!("quarter-arc relative error {rel:.2e}; gradient vs FD {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("Sundman exponent", c1_sundman_exponent),
        ("limit consistency", c2_limit_consistency),
        ("logarithmic law", c3_log_law),
        ("averaging kernel", c4_averaging_kernel),
        ("mean-value identities", c5_mean_values),
        ("homogeneity of S", c6_homogeneity),
        ("collision exclusion", c7_collision_exclusion),
        ("logarithmic exclusion", c8_log_exclusion),
        ("regularization suite", c9_regularization),
        ("conservation laws", c10_conservation),
        ("partial-collision reduction", c11_partial_reduction),
        ("minimizer sanity", c12_minimizer),
    ];
    let mut unexpected = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = k + 1;
        let t = Instant::now();
        let check = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| Check::new(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        let tag = if check.pass { "PASS" } else { "FAIL" };
        let note = if !check.pass && KNOWN_RED.contains(&id) { " [known red]" } else { "" };
        println!("criterion {id:>2} {tag} {name}{note}: {} [{:.1}s]", check.detail, t.elapsed().as_secs_f64());
        if !check.pass && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
