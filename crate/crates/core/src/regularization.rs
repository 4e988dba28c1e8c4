//! Cutoff of the potential near the collision set and the penalized
//! action functionals built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimizer::{local_minimize, perturb, BoundaryCondition, DiscreteAction, MinimizerSettings, PathObjective};
use crate::potentials::PotentialSpec;
use crate::trajectory::Path;

/// `η(s)`: identity on `[0,1]`, `(-s²+6s-1)/4` on `[1,3]`, `2` beyond.
pub fn eta(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::NegativeArgument(s));
    }
    Ok(eta_unchecked(s))
}

/// `η'(s)`, left formula at the knots.
pub fn eta_prime(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::NegativeArgument(s));
    }
    Ok(eta_prime_unchecked(s))
}

fn eta_unchecked(s: f64) -> f64 {
    if s <= 1.0 {
        s
    } else if s <= 3.0 {
        (-s * s + 6.0 * s - 1.0) / 4.0
    } else {
        2.0
    }
}

fn eta_prime_unchecked(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s <= 3.0 {
        (3.0 - s) / 2.0
    } else {
        0.0
    }
}

/// `η_ε(s) = η(εs)/ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaCutoff {
    eps: f64,
}

impl EtaCutoff {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidInput(format!("cutoff parameter must be positive, got {eps}")));
        }
        Ok(Self { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        let v = eta(self.eps * s)?;
        Ok(if self.eps * s <= 1.0 { s } else { v / self.eps })
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        eta_prime(self.eps * s)
    }

    /// `(η_ε(u), η_ε'(u))`, extended by the identity to negative `u`
    /// (logarithmic potentials are negative far from collisions).
    pub fn apply(&self, u: f64) -> (f64, f64) {
        if u <= 0.0 || self.eps * u <= 1.0 {
            (u, 1.0)
        } else {
            (eta_unchecked(self.eps * u) / self.eps, eta_prime_unchecked(self.eps * u))
        }
    }

    /// The value `2/ε` assigned on the collision set.
    pub fn on_delta(&self) -> f64 {
        2.0 / self.eps
    }
}

/// `U_ε(t, x)`; `eps = ∞` returns `U` itself (and `∞` on the collision set).
pub fn u_eps(spec: &PotentialSpec, eps: f64, t: f64, x: &[f64]) -> f64 {
    if eps == f64::INFINITY {
        return if spec.is_singular(x) { f64::INFINITY } else { spec.potential().value(t, x) };
    }
    let c = EtaCutoff::new(eps).expect("positive cutoff");
    if spec.is_singular(x) {
        c.on_delta()
    } else {
        c.apply(spec.potential().value(t, x)).0
    }
}

/// The penalized problem on `[t_{i0}, t_{i1}]` of an anchor path.
#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    pub spec: PotentialSpec,
    pub anchor: Path,
    pub i0: usize,
    pub i1: usize,
    /// `None` is the unregularized functional.
    pub eps: Option<f64>,
}

impl PenalizedProblem {
    /// Interval `[t0 - δ0, t0 + δ0]`, snapped inward to grid samples.
    pub fn new(spec: PotentialSpec, anchor: Path, t0: f64, delta0: f64, eps: Option<f64>) -> Result<Self> {
        let (a, b) = anchor.span();
        let slack = 1e-12 * (b - a);
        if t0 - delta0 < a - slack || t0 + delta0 > b + slack || !(delta0 > 0.0) {
            return Err(Error::InvalidInput("interval must lie inside the anchor's grid span".into()));
        }
        let grid = anchor.grid();
        let i0 = grid.iter().position(|t| *t >= t0 - delta0 - slack).unwrap();
        let i1 = grid.iter().rposition(|t| *t <= t0 + delta0 + slack).unwrap();
        Self::from_indices(spec, anchor, i0, i1, eps)
    }

    pub fn from_indices(spec: PotentialSpec, anchor: Path, i0: usize, i1: usize, eps: Option<f64>) -> Result<Self> {
        if i1 >= anchor.len() || i1 < i0 + 2 {
            return Err(Error::InvalidInput("interval needs at least one interior sample".into()));
        }
        if let Some(e) = eps {
            EtaCutoff::new(e)?;
        }
        Ok(Self { spec, anchor, i0, i1, eps })
    }

    pub fn with_eps(&self, eps: Option<f64>) -> Self {
        Self { eps, ..self.clone() }
    }

    /// The anchor restricted to the interval.
    pub fn anchor_window(&self) -> Path {
        self.anchor.slice(self.i0, self.i1).expect("indices validated")
    }

    /// The discrete `Ā_ε` as a minimizer objective.
    pub fn objective(&self) -> DiscreteAction {
        let w = self.anchor_window();
        let mut a = DiscreteAction::new(self.spec.clone(), w.grid().to_vec())
            .expect("grid validated")
            .with_anchor(w.points().to_vec())
            .expect("same grid");
        if let Some(e) = self.eps {
            a = a.with_cutoff(EtaCutoff::new(e).expect("validated"));
        }
        a
    }

    /// `1/ε₀ ≈ 2·median U` along the anchor, then halving.
    pub fn default_schedule(&self, levels: usize) -> Vec<f64> {
        let w = self.anchor_window();
        let mut u: Vec<f64> = (0..w.len())
            .filter(|&j| !self.spec.is_singular(w.point(j)))
            .map(|j| self.spec.potential().value(w.time(j), w.point(j)))
            .collect();
        u.sort_by(f64::total_cmp);
        let med = if u.is_empty() { 1.0 } else { u[u.len() / 2].abs().max(1e-12) };
        let eps0 = 1.0 / (2.0 * med);
        (0..levels).map(|k| eps0 * 0.5f64.powi(k as i32)).collect()
    }
}

/// Discrete `Ā_ε` (or `Ā` when `eps` is `None`) of a candidate on the
/// problem's window.
pub fn penalized_action(problem: &PenalizedProblem, candidate: &Path) -> Result<f64> {
    let w = problem.anchor_window();
    if candidate.grid() != w.grid() {
        return Err(Error::GridMismatch("candidate must use the window grid".into()));
    }
    let m = w.metric();
    let scale = 1.0 + w.diameter();
    for (j, which) in [(0, "start"), (w.len() - 1, "end")] {
        let d = m.distance(candidate.point(j), w.point(j));
        if d > 1e-12 * scale {
            return Err(Error::BoundaryMismatch(format!("candidate {which} differs from the anchor by {d:e}")));
        }
    }
    problem.objective().evaluate(candidate.points(), None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub minimizer: MinimizerSettings,
    /// Amplitude of the bump added to the anchor before minimizing.
    pub perturbation: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { minimizer: MinimizerSettings::default(), perturbation: 0.0 }
    }
}

/// One level of an ε-sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub action: f64,
    pub penalty: f64,
    pub sup_dist: f64,
    pub l2_vel_dist: f64,
    pub u_l1_dist: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `½|ẋ|² - U_ε` at cell midpoints.
    pub energy: Vec<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub path: Option<Path>,
}

/// Minimize `Ā_ε` for each `ε` of a strictly decreasing schedule and
/// compare the minimizers with the anchor.
pub fn epsilon_sweep(problem: &PenalizedProblem, schedule: &[f64], settings: &SweepSettings) -> Result<Vec<SweepEntry>> {
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("ε schedule must be strictly decreasing".into()));
    }
    let window = problem.anchor_window();
    let init = if settings.perturbation > 0.0 {
        perturb(&window, settings.perturbation, settings.minimizer.seed)?
    } else {
        window.clone()
    };
    Ok(schedule
        .par_iter()
        .map(|&eps| {
            let p = problem.with_eps(Some(eps));
            let obj = p.objective();
            match local_minimize(&obj, &init, &BoundaryCondition::FixedEnds, &settings.minimizer) {
                Ok(res) => diagnostics(&p, &obj, &window, eps, res.path, res.action, res.converged, res.iterations),
                Err(e) => SweepEntry {
                    epsilon: eps,
                    action: f64::NAN,
                    penalty: f64::NAN,
                    sup_dist: f64::NAN,
                    l2_vel_dist: f64::NAN,
                    u_l1_dist: f64::NAN,
                    converged: false,
                    iterations: 0,
                    energy: Vec::new(),
                    error: Some(e.to_string()),
                    path: None,
                },
            }
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn diagnostics(
    p: &PenalizedProblem,
    obj: &DiscreteAction,
    anchor: &Path,
    eps: f64,
    path: Path,
    action: f64,
    converged: bool,
    iterations: usize,
) -> SweepEntry {
    let m = anchor.metric();
    let sup_dist = (0..path.len()).map(|j| m.distance(path.point(j), anchor.point(j))).fold(0.0, f64::max);
    let mut l2 = 0.0;
    let mut ul1 = 0.0;
    let mut energy = Vec::with_capacity(path.len() - 1);
    for j in 0..path.len() - 1 {
        let h = path.time(j + 1) - path.time(j);
        let dv: Vec<f64> = path.cell_velocity(j).iter().zip(anchor.cell_velocity(j)).map(|(a, b)| a - b).collect();
        l2 += h * m.norm_sq(&dv);
        let (tm, xm) = path.cell_midpoint(j);
        let (_, am) = anchor.cell_midpoint(j);
        let ue = u_eps(&p.spec, eps, tm, &xm);
        if !p.spec.is_singular(&am) {
            ul1 += h * (ue - p.spec.potential().value(tm, &am)).abs();
        }
        energy.push(0.5 * m.norm_sq(&path.cell_velocity(j)) - ue);
    }
    SweepEntry {
        epsilon: eps,
        action,
        penalty: obj.penalty(path.points()),
        sup_dist,
        l2_vel_dist: l2.sqrt(),
        u_l1_dist: ul1,
        converged,
        iterations,
        energy,
        error: None,
        path: Some(path),
    }
}

/// Halve the interval around its center until successive sweep minimizers
/// stop jumping away from the anchor; at most `max_halvings` times.
pub fn shrink_interval(
    problem: &PenalizedProblem,
    schedule: &[f64],
    settings: &SweepSettings,
    max_halvings: usize,
) -> Result<(PenalizedProblem, Vec<SweepEntry>)> {
    let entries = epsilon_sweep(problem, schedule, settings)?;
    let jumps = entries.windows(2).any(|w| !(w[1].sup_dist <= 2.0 * w[0].sup_dist + 1e-6));
    let quarter = (problem.i1 - problem.i0) / 4;
    if !jumps || max_halvings == 0 || problem.i1 - problem.i0 < 8 {
        return Ok((problem.clone(), entries));
    }
    let p = PenalizedProblem::from_indices(
        problem.spec.clone(),
        problem.anchor.clone(),
        problem.i0 + quarter,
        problem.i1 - quarter,
        problem.eps,
    )?;
    shrink_interval(&p, schedule, settings, max_halvings - 1)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::metric::MassMetric;
    use crate::potentials::{CentralPower, FreePotential};

    #[test]
    fn eta_knots() {
        assert_eq!(eta(0.5).unwrap(), 0.5);
        assert_eq!(eta(2.0).unwrap(), 1.75);
        assert_eq!(eta(3.0).unwrap(), 2.0);
        assert_eq!(eta(10.0).unwrap(), 2.0);
        assert_eq!(eta_prime(1.0).unwrap(), 1.0);
        assert_eq!(eta_prime(3.0).unwrap(), 0.0);
        assert!(matches!(eta(-1.0), Err(Error::NegativeArgument(_))));
    }

    #[test]
    fn u_eps_examples() {
        let spec = PotentialSpec::new(Arc::new(CentralPower::kepler_like(2, 1.0).unwrap()));
        assert_eq!(u_eps(&spec, 0.1, 0.0, &[0.2, 0.0]), 5.0);
        assert_eq!(u_eps(&spec, 0.1, 0.0, &[0.0, 0.0]), 20.0);
        assert!((u_eps(&spec, 0.1, 0.0, &[0.05, 0.0]) - 17.5).abs() < 1e-12);
    }

    #[test]
    fn pure_penalty() {
        let spec = PotentialSpec::new(Arc::new(FreePotential::new(MassMetric::unit(1, 2))));
        let grid = Path::uniform_grid(0.0, 1.0, 4);
        let anchor = Path::from_fn(MassMetric::unit(1, 2), grid.clone(), |_| vec![1.0, 2.0]).unwrap();
        let cand: Vec<Vec<f64>> = grid.iter().map(|_| vec![1.0, 2.5]).collect();
        let p = PenalizedProblem::from_indices(spec, anchor, 0, 4, Some(0.1)).unwrap();
        let v = p.objective().evaluate(&cand, None).unwrap();
        assert!((v - 0.125).abs() < 1e-15);
    }
}
