//! Direct minimization of the discrete action.
//!
//! The discrete action over a grid `t_0 < ... < t_N` is
//! `Σ_j ½|x_{j+1}-x_j|²/h_j + h_j L(t_{j+½}, (x_j+x_{j+1})/2)`, where `L` is
//! `U`, its cutoff `U_ε`, optionally plus the penalty `½|x - x̄|²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MassMetric;
use crate::potentials::PotentialSpec;
use crate::regularization::EtaCutoff;
use crate::subspace::Subspace;
use crate::trajectory::Path;

/// A functional of the node values of a path on a fixed grid.
pub trait PathObjective: Sync {
    fn metric(&self) -> &MassMetric;
    fn grid(&self) -> &[f64];
    /// Value and, when requested, Euclidean partials with respect to every node.
    fn evaluate(&self, points: &[Vec<f64>], grad: Option<&mut [Vec<f64>]>) -> Result<f64>;
}

/// The (optionally cut off and penalized) discrete Lagrangian action.
#[derive(Debug, Clone)]
pub struct DiscreteAction {
    spec: PotentialSpec,
    grid: Vec<f64>,
    cutoff: Option<EtaCutoff>,
    anchor: Option<Vec<Vec<f64>>>,
}

impl DiscreteAction {
    pub fn new(spec: PotentialSpec, grid: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::GridMismatch("grid needs at least two samples".into()));
        }
        if let Some(j) = grid.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateGrid(j + 1));
        }
        Ok(Self { spec, grid, cutoff: None, anchor: None })
    }

    /// Replace `U` by `U_ε`.
    pub fn with_cutoff(mut self, cutoff: EtaCutoff) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    /// Add `½|x - x̄|²` with `x̄` given on the same grid.
    pub fn with_anchor(mut self, anchor: Vec<Vec<f64>>) -> Result<Self> {
        if anchor.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!("anchor has {} samples, grid {}", anchor.len(), self.grid.len())));
        }
        self.anchor = Some(anchor);
        Ok(self)
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn cutoff(&self) -> Option<EtaCutoff> {
        self.cutoff
    }

    /// Potential part of the Lagrangian at one point; `out` receives partials.
    fn potential(&self, t: f64, x: &[f64], out: &mut [f64]) -> Option<f64> {
        let pot = self.spec.potential();
        let singular = self.spec.is_singular(x);
        match self.cutoff {
            None if singular => None,
            None => {
                pot.partial_x(t, x, out);
                Some(pot.value(t, x))
            }
            Some(c) if singular => {
                out.iter_mut().for_each(|v| *v = 0.0);
                Some(c.on_delta())
            }
            Some(c) => {
                let u = pot.value(t, x);
                let (v, slope) = c.apply(u);
                if slope == 0.0 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    pot.partial_x(t, x, out);
                    out.iter_mut().for_each(|g| *g *= slope);
                }
                Some(v)
            }
        }
    }

    /// Penalty `½|x-x̄|²` summed over cell midpoints.
    pub fn penalty(&self, points: &[Vec<f64>]) -> f64 {
        let Some(anchor) = &self.anchor else { return 0.0 };
        let m = self.spec.metric();
        (0..self.grid.len() - 1)
            .map(|j| {
                let h = self.grid[j + 1] - self.grid[j];
                let d: Vec<f64> = (0..m.size())
                    .map(|k| 0.5 * (points[j][k] + points[j + 1][k] - anchor[j][k] - anchor[j + 1][k]))
                    .collect();
                0.5 * h * m.norm_sq(&d)
            })
            .sum()
    }
}

impl PathObjective for DiscreteAction {
    fn metric(&self) -> &MassMetric {
        self.spec.metric()
    }

    fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn evaluate(&self, points: &[Vec<f64>], mut grad: Option<&mut [Vec<f64>]>) -> Result<f64> {
        if points.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!("{} points on a grid of {}", points.len(), self.grid.len())));
        }
        let m = self.spec.metric();
        let n = m.size();
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v = 0.0));
        }
        let mut total = 0.0;
        let mut mid = vec![0.0; n];
        let mut pg = vec![0.0; n];
        for j in 0..self.grid.len() - 1 {
            let h = self.grid[j + 1] - self.grid[j];
            let (a, b) = (&points[j], &points[j + 1]);
            let mut kin = 0.0;
            for k in 0..n {
                let d = b[k] - a[k];
                mid[k] = 0.5 * (a[k] + b[k]);
                kin += m.coord_mass(k) * d * d;
            }
            total += 0.5 * kin / h;
            let tm = 0.5 * (self.grid[j] + self.grid[j + 1]);
            let u = self.potential(tm, &mid, &mut pg).ok_or(Error::SingularConfiguration { index: Some(j) })?;
            total += h * u;
            if let Some(anchor) = &self.anchor {
                let mut pen = 0.0;
                for k in 0..n {
                    let d = mid[k] - 0.5 * (anchor[j][k] + anchor[j + 1][k]);
                    pen += m.coord_mass(k) * d * d;
                    pg[k] += m.coord_mass(k) * d;
                }
                total += 0.5 * h * pen;
            }
            if let Some(g) = grad.as_deref_mut() {
                for k in 0..n {
                    let dk = m.coord_mass(k) * (b[k] - a[k]) / h;
                    g[j][k] += -dk + 0.5 * h * pg[k];
                    g[j + 1][k] += dk + 0.5 * h * pg[k];
                }
            }
        }
        if !total.is_finite() {
            return Err(Error::NonFiniteState { t: self.grid[0] });
        }
        Ok(total)
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    /// Both end nodes stay at their initial values.
    FixedEnds,
    /// End nodes move freely inside the given subspaces.
    SubspaceEnds { start: Subspace, end: Subspace },
    /// `x(t_N) = x(t_0)`.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizerSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub seed: u64,
    /// Number of extra randomly perturbed starts.
    pub multistart: usize,
}

impl Default for MinimizerSettings {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 20_000, memory: 12, seed: 0, multistart: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinimizeStatus {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub path: Path,
    pub action: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: MinimizeStatus,
    /// Largest discrete Euler–Lagrange residual over the free nodes.
    pub stationarity: f64,
}

/// Maps free variables to node values and back.
struct Layout<'a> {
    bc: &'a BoundaryCondition,
    base: Vec<Vec<f64>>,
    grid: &'a [f64],
    metric: &'a MassMetric,
}

impl<'a> Layout<'a> {
    fn new(bc: &'a BoundaryCondition, init: &'a Path) -> Result<Self> {
        let pts = init.points();
        let n = init.len();
        let metric = init.metric();
        let scale = 1.0 + pts.iter().map(|p| metric.norm(p)).fold(0.0, f64::max);
        match bc {
            BoundaryCondition::FixedEnds => {}
            BoundaryCondition::SubspaceEnds { start, end } => {
                for (sub, p, which) in [(start, &pts[0], "start"), (end, &pts[n - 1], "end")] {
                    if sub.ambient_dim() != metric.size() {
                        return Err(Error::InvalidInput(format!("{which} subspace has the wrong ambient dimension")));
                    }
                    let d = sub.distance(p);
                    if d > 1e-10 * scale {
                        return Err(Error::BoundaryMismatch(format!("{which} node is {d:e} away from its subspace")));
                    }
                }
            }
            BoundaryCondition::Periodic => {
                let d = metric.distance(&pts[0], &pts[n - 1]);
                if d > 1e-10 * scale {
                    return Err(Error::BoundaryMismatch(format!("periodic path does not close (gap {d:e})")));
                }
            }
        }
        Ok(Self { bc, base: pts.to_vec(), grid: init.grid(), metric })
    }

    fn nodes(&self) -> usize {
        self.grid.len()
    }

    fn interior(&self) -> std::ops::Range<usize> {
        match self.bc {
            BoundaryCondition::Periodic => 0..self.nodes() - 1,
            _ => 1..self.nodes() - 1,
        }
    }

    fn head(&self) -> usize {
        match self.bc {
            BoundaryCondition::SubspaceEnds { start, .. } => start.dim(),
            _ => 0,
        }
    }

    fn vars(&self) -> Vec<f64> {
        let mut v = Vec::new();
        if let BoundaryCondition::SubspaceEnds { start, .. } = self.bc {
            v.extend(start.coordinates(&self.base[0]));
        }
        for j in self.interior() {
            v.extend_from_slice(&self.base[j]);
        }
        if let BoundaryCondition::SubspaceEnds { end, .. } = self.bc {
            v.extend(end.coordinates(&self.base[self.nodes() - 1]));
        }
        v
    }

    fn points(&self, vars: &[f64]) -> Vec<Vec<f64>> {
        let n = self.metric.size();
        let mut pts = self.base.clone();
        let h = self.head();
        for (i, j) in self.interior().enumerate() {
            pts[j].copy_from_slice(&vars[h + i * n..h + (i + 1) * n]);
        }
        let last = self.nodes() - 1;
        match self.bc {
            BoundaryCondition::SubspaceEnds { start, end } => {
                pts[0] = start.embed(&vars[..h]);
                pts[last] = end.embed(&vars[vars.len() - end.dim()..]);
            }
            BoundaryCondition::Periodic => pts[last] = pts[0].clone(),
            BoundaryCondition::FixedEnds => {}
        }
        pts
    }

    fn gradient(&self, node_grad: &[Vec<f64>]) -> Vec<f64> {
        let mut g = Vec::new();
        let last = self.nodes() - 1;
        if let BoundaryCondition::SubspaceEnds { start, .. } = self.bc {
            g.extend(start.basis().iter().map(|b| dot(b, &node_grad[0])));
        }
        for j in self.interior() {
            if j == 0 {
                g.extend(node_grad[0].iter().zip(&node_grad[last]).map(|(a, b)| a + b));
            } else {
                g.extend_from_slice(&node_grad[j]);
            }
        }
        if let BoundaryCondition::SubspaceEnds { end, .. } = self.bc {
            g.extend(end.basis().iter().map(|b| dot(b, &node_grad[last])));
        }
        g
    }

    /// Inverse of the kinetic Hessian (tridiagonal per coordinate, periodic
    /// wrap-around dropped) applied to a variable-space vector.
    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        let n = self.metric.size();
        let hd = self.head();
        let mut out = g.to_vec();
        let nodes: Vec<usize> = self.interior().collect();
        let m = nodes.len();
        let step = |j: usize| self.grid[j + 1] - self.grid[j];
        let last = self.nodes() - 1;
        if m > 0 {
            let mut diag = vec![0.0; m];
            let mut off = vec![0.0; m.saturating_sub(1)];
            for (i, &j) in nodes.iter().enumerate() {
                let left = if j == 0 { step(last - 1) } else { step(j - 1) };
                diag[i] = 1.0 / left + 1.0 / step(j);
                if i + 1 < m {
                    off[i] = -1.0 / step(j);
                }
            }
            let mut c = vec![0.0; m];
            let mut d = vec![0.0; m];
            for k in 0..n {
                let mass = self.metric.coord_mass(k);
                // Thomas algorithm on (mass · T) y = g_k
                for i in 0..m {
                    let rhs = g[hd + i * n + k] / mass;
                    if i == 0 {
                        c[0] = if m > 1 { off[0] / diag[0] } else { 0.0 };
                        d[0] = rhs / diag[0];
                    } else {
                        let denom = diag[i] - off[i - 1] * c[i - 1];
                        c[i] = if i + 1 < m { off[i] / denom } else { 0.0 };
                        d[i] = (rhs - off[i - 1] * d[i - 1]) / denom;
                    }
                }
                for i in (0..m).rev() {
                    let y = if i + 1 < m { d[i] - c[i] * out[hd + (i + 1) * n + k] } else { d[i] };
                    out[hd + i * n + k] = y;
                }
            }
        }
        if let BoundaryCondition::SubspaceEnds { end, .. } = self.bc {
            let h0 = step(0);
            let h1 = step(last - 1);
            out[..hd].iter_mut().for_each(|v| *v *= h0);
            let len = out.len();
            out[len - end.dim()..].iter_mut().for_each(|v| *v *= h1);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn eval_vars(obj: &dyn PathObjective, layout: &Layout, vars: &[f64], node_grad: &mut [Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let pts = layout.points(vars);
    match obj.evaluate(&pts, Some(node_grad)) {
        Ok(f) if f.is_finite() => Some((f, layout.gradient(node_grad))),
        _ => None,
    }
}

/// Limited-memory quasi-Newton descent with a kinetic preconditioner and
/// Armijo backtracking, from `init` under `bc`.
pub fn local_minimize(
    objective: &dyn PathObjective,
    init: &Path,
    bc: &BoundaryCondition,
    settings: &MinimizerSettings,
) -> Result<MinimizeResult> {
    if init.grid() != objective.grid() {
        return Err(Error::GridMismatch("initial path and objective use different grids".into()));
    }
    let layout = Layout::new(bc, init)?;
    let mut node_grad = vec![vec![0.0; objective.metric().size()]; init.len()];
    let mut x = layout.vars();
    let (mut f, mut g) = match eval_vars(objective, &layout, &x, &mut node_grad) {
        Some(v) => v,
        None => {
            objective.evaluate(init.points(), None)?;
            return Err(Error::NonFiniteState { t: init.grid()[0] });
        }
    };
    let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut status = MinimizeStatus::MaxIterations;
    let mut iter = 0;
    while iter < settings.max_iter {
        if inf_norm(&g) <= settings.tol * (1.0 + f.abs()) {
            status = MinimizeStatus::Converged;
            break;
        }
        iter += 1;
        let mut dir = two_loop(&layout, &g, &mem);
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            mem.clear();
            dir = layout.precondition(&g).iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            if let Some((ft, gt)) = eval_vars(objective, &layout, &trial, &mut node_grad) {
                if ft <= f + 1e-4 * step * slope + 1e-12 * f.abs().max(1e-300) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if mem.is_empty() {
                status = MinimizeStatus::LineSearchFailure;
                break;
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == settings.memory.max(1) {
                mem.remove(0);
            }
            mem.push((s, y, 1.0 / sy));
        }
        let stalled = fn_ >= f && inf_norm(&gn) >= inf_norm(&g);
        x = xn;
        f = fn_;
        g = gn;
        if stalled && step < 1e-10 {
            status = MinimizeStatus::LineSearchFailure;
            break;
        }
    }
    if status == MinimizeStatus::MaxIterations && inf_norm(&g) <= settings.tol * (1.0 + f.abs()) {
        status = MinimizeStatus::Converged;
    }
    let pts = layout.points(&x);
    let path = Path::new(init.metric().clone(), init.grid().to_vec(), pts)?;
    let stationarity = el_residual_of(objective, &path, bc)?.iter().map(|r| objective.metric().norm(r)).fold(0.0, f64::max);
    Ok(MinimizeResult {
        path,
        action: f,
        gradient_norm: inf_norm(&g),
        iterations: iter,
        converged: status == MinimizeStatus::Converged,
        status,
        stationarity,
    })
}

fn two_loop(layout: &Layout, g: &[f64], mem: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    let mut r = layout.precondition(&q);
    if let Some((s, y, _)) = mem.last() {
        let py = layout.precondition(y);
        let gamma = dot(s, y) / dot(y, &py);
        if gamma.is_finite() && gamma > 0.0 {
            r.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &r);
        r.iter_mut().zip(s).for_each(|(ri, si)| *ri += (a - b) * si);
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

/// Run `local_minimize` from `init` and from `settings.multistart` random
/// compactly supported perturbations of it; keep the lowest action.
pub fn multistart_minimize(
    objective: &dyn PathObjective,
    init: &Path,
    bc: &BoundaryCondition,
    settings: &MinimizerSettings,
    amplitude: f64,
) -> Result<MinimizeResult> {
    let starts: Vec<Path> = std::iter::once(Ok(init.clone()))
        .chain((0..settings.multistart).map(|k| perturb(init, amplitude, settings.seed.wrapping_add(k as u64))))
        .collect::<Result<_>>()?;
    let results: Vec<Result<MinimizeResult>> =
        starts.par_iter().map(|p| local_minimize(objective, p, bc, settings)).collect();
    let mut best: Option<MinimizeResult> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(r) if best.as_ref().is_none_or(|b| (r.converged, -r.action) > (b.converged, -b.action)) => best = Some(r),
            Ok(_) => {}
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(_) => {}
        }
    }
    best.ok_or_else(|| first_err.unwrap())
}

/// Add a smooth bump `a sin(π(t-t₀)/(t_N-t₀)) w` with a random unit `w`.
pub fn perturb(path: &Path, amplitude: f64, seed: u64) -> Result<Path> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = path.metric().random_unit(&mut rng);
    let (t0, t1) = path.span();
    let phase: f64 = rng.random_range(0.5..1.0);
    let pts = path
        .grid()
        .iter()
        .zip(path.points())
        .map(|(t, p)| {
            let b = amplitude * phase * (std::f64::consts::PI * (t - t0) / (t1 - t0)).sin();
            p.iter().zip(&w).map(|(x, wi)| x + b * wi).collect()
        })
        .collect();
    Path::new(path.metric().clone(), path.grid().to_vec(), pts)
}

/// Free nodes under `bc`, in grid order.
fn free_nodes(n_nodes: usize, bc: &BoundaryCondition) -> Vec<usize> {
    match bc {
        BoundaryCondition::FixedEnds => (1..n_nodes - 1).collect(),
        BoundaryCondition::SubspaceEnds { .. } => (1..n_nodes - 1).collect(),
        BoundaryCondition::Periodic => (0..n_nodes - 1).collect(),
    }
}

fn el_residual_of(objective: &dyn PathObjective, path: &Path, bc: &BoundaryCondition) -> Result<Vec<Vec<f64>>> {
    let n_nodes = path.len();
    let grid = objective.grid();
    let metric = objective.metric();
    let mut g = vec![vec![0.0; metric.size()]; n_nodes];
    objective.evaluate(path.points(), Some(&mut g))?;
    let last = n_nodes - 1;
    Ok(free_nodes(n_nodes, bc)
        .into_iter()
        .map(|j| {
            let (gj, hbar) = if j == 0 {
                let gj: Vec<f64> = g[0].iter().zip(&g[last]).map(|(a, b)| a + b).collect();
                (gj, 0.5 * (grid[1] - grid[0] + grid[last] - grid[last - 1]))
            } else {
                (g[j].clone(), 0.5 * (grid[j + 1] - grid[j - 1]))
            };
            gj.iter().enumerate().map(|(k, v)| -v / metric.coord_mass(k) / hbar).collect()
        })
        .collect())
}

/// Per-node residual `D²x_j - ∇U` of the discrete Euler–Lagrange equations
/// at the free nodes, in grid order.
pub fn discrete_el_residual(path: &Path, spec: &PotentialSpec, bc: &BoundaryCondition) -> Result<Vec<Vec<f64>>> {
    let action = DiscreteAction::new(spec.clone(), path.grid().to_vec())?;
    el_residual_of(&action, path, bc)
}

/// Residuals for an arbitrary objective (e.g. the penalized action).
pub fn objective_el_residual(objective: &dyn PathObjective, path: &Path, bc: &BoundaryCondition) -> Result<Vec<Vec<f64>>> {
    el_residual_of(objective, path, bc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondVariationVerdict {
    LocallyMinimalCandidate,
    NotMinimal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondVariationReport {
    /// Rayleigh quotients `ξ·Hξ / ‖ξ‖²_{L²}` per probe.
    pub quotients: Vec<f64>,
    pub min: f64,
    pub verdict: SecondVariationVerdict,
}

/// Probe the discrete second variation along random bump directions
/// supported inside the free nodes.
pub fn second_variation_check(
    objective: &dyn PathObjective,
    path: &Path,
    bc: &BoundaryCondition,
    n_probes: usize,
    seed: u64,
) -> Result<SecondVariationReport> {
    let grid = objective.grid();
    let metric = objective.metric();
    let n_nodes = path.len();
    let nodes: Vec<usize> = (1..n_nodes - 1).collect();
    if nodes.len() < 2 {
        return Err(Error::InvalidInput("path needs at least two interior nodes".into()));
    }
    let _ = bc;
    let scale = 1.0 + path.points().iter().map(|p| metric.norm(p)).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Vec<Vec<f64>>> = (0..n_probes)
        .map(|_| {
            let a = rng.random_range(0..nodes.len() / 2);
            let b = rng.random_range(a + nodes.len() / 2..=nodes.len());
            let (ta, tb) = (grid[nodes[a] - 1], grid[(nodes[b - 1] + 1).min(n_nodes - 1)]);
            let w = metric.random_unit(&mut rng);
            grid.iter()
                .enumerate()
                .map(|(j, t)| {
                    let inside = j > 0 && j < n_nodes - 1 && *t > ta && *t < tb;
                    let bump = if inside { (std::f64::consts::PI * (t - ta) / (tb - ta)).sin() } else { 0.0 };
                    w.iter().map(|c| bump * c).collect()
                })
                .collect()
        })
        .collect();
    let quotients: Vec<f64> = probes
        .par_iter()
        .map(|xi| {
            let eps = 1e-4 * scale;
            let shifted = |sgn: f64| -> Result<Vec<Vec<f64>>> {
                let pts: Vec<Vec<f64>> = path
                    .points()
                    .iter()
                    .zip(xi)
                    .map(|(p, d)| p.iter().zip(d).map(|(a, b)| a + sgn * eps * b).collect())
                    .collect();
                let mut g = vec![vec![0.0; metric.size()]; n_nodes];
                objective.evaluate(&pts, Some(&mut g))?;
                Ok(g)
            };
            let (gp, gm) = (shifted(1.0)?, shifted(-1.0)?);
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 1..n_nodes - 1 {
                let hbar = 0.5 * (grid[j + 1] - grid[j - 1]);
                for k in 0..metric.size() {
                    num += xi[j][k] * (gp[j][k] - gm[j][k]) / (2.0 * eps);
                }
                den += hbar * metric.norm_sq(&xi[j]);
            }
            Ok(num / den)
        })
        .collect::<Result<_>>()?;
    let min = quotients.iter().copied().fold(f64::INFINITY, f64::min);
    let verdict = if min >= -1e-6 {
        SecondVariationVerdict::LocallyMinimalCandidate
    } else {
        SecondVariationVerdict::NotMinimal
    };
    Ok(SecondVariationReport { quotients, min, verdict })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::potentials::{CentralPower, FreePotential};

    fn kepler(dim: usize) -> PotentialSpec {
        PotentialSpec::new(Arc::new(CentralPower::kepler_like(dim, 1.0).unwrap()))
    }

    fn free() -> PotentialSpec {
        PotentialSpec::new(Arc::new(FreePotential::new(MassMetric::unit(1, 2))))
    }

    #[test]
    fn zigzag_relaxes_to_segment() {
        let grid = Path::uniform_grid(0.0, 1.0, 20);
        let pts: Vec<Vec<f64>> = grid
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let z = if j % 2 == 1 && j < 20 { 0.3 } else { 0.0 };
                vec![*t, z]
            })
            .collect();
        let init = Path::new(MassMetric::unit(1, 2), grid.clone(), pts).unwrap();
        let obj = DiscreteAction::new(free(), grid).unwrap();
        let res = local_minimize(&obj, &init, &BoundaryCondition::FixedEnds, &MinimizerSettings::default()).unwrap();
        assert!(res.converged);
        assert!((res.action - 0.5).abs() < 1e-12, "{}", res.action);
        assert!(res.path.points().iter().all(|p| p[1].abs() < 1e-9));
    }

    #[test]
    fn straight_line_residual_vanishes() {
        let path = Path::linear(MassMetric::unit(1, 2), Path::uniform_grid(0.0, 1.0, 10), &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let r = discrete_el_residual(&path, &free(), &BoundaryCondition::FixedEnds).unwrap();
        assert!(r.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn circular_orbit_residual_is_small() {
        let grid = Path::uniform_grid(0.0, 1.0, 1000);
        let path = Path::from_fn(MassMetric::unit(1, 2), grid, |t| vec![t.cos(), t.sin()]).unwrap();
        let r = discrete_el_residual(&path, &kepler(2), &BoundaryCondition::FixedEnds).unwrap();
        let worst = r.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-4, "{worst}");
    }

    #[test]
    fn residual_is_scaled_gradient() {
        let grid = vec![0.0, 0.3, 0.5, 0.9, 1.2];
        let pts = vec![vec![1.0, 0.1], vec![0.9, 0.4], vec![0.6, 0.7], vec![0.2, 1.0], vec![-0.1, 1.1]];
        let path = Path::new(MassMetric::unit(1, 2), grid.clone(), pts.clone()).unwrap();
        let spec = kepler(2);
        let obj = DiscreteAction::new(spec.clone(), grid.clone()).unwrap();
        let r = discrete_el_residual(&path, &spec, &BoundaryCondition::FixedEnds).unwrap();
        for (i, j) in (1..4).enumerate() {
            for k in 0..2 {
                let h = 1e-6;
                let mut p = pts.clone();
                p[j][k] += h;
                let fp = obj.evaluate(&p, None).unwrap();
                p[j][k] -= 2.0 * h;
                let fm = obj.evaluate(&p, None).unwrap();
                let hbar = 0.5 * (grid[j + 1] - grid[j - 1]);
                let fd = -(fp - fm) / (2.0 * h) / hbar;
                assert!((fd - r[i][k]).abs() < 1e-8 * (1.0 + fd.abs()), "{fd} vs {}", r[i][k]);
            }
        }
    }

    #[test]
    fn kepler_quarter_arc_action() {
        let grid = Path::uniform_grid(0.0, PI / 2.0, 400);
        let init = Path::linear(MassMetric::unit(1, 2), grid.clone(), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let obj = DiscreteAction::new(kepler(2), grid).unwrap();
        let res = local_minimize(&obj, &init, &BoundaryCondition::FixedEnds, &MinimizerSettings::default()).unwrap();
        assert!(res.converged, "{:?} after {}", res.status, res.iterations);
        let exact = 3.0 * PI / 4.0;
        assert!(((res.action - exact) / exact).abs() < 1e-4, "{}", res.action);
    }

    #[test]
    fn subspace_ends_stay_on_subspaces() {
        let metric = MassMetric::unit(1, 2);
        let x_axis = Subspace::from_spanning(&metric, &[vec![1.0, 0.0]]).unwrap();
        let y_axis = Subspace::from_spanning(&metric, &[vec![0.0, 1.0]]).unwrap();
        let init = Path::linear(metric, Path::uniform_grid(0.0, PI / 2.0, 100), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let obj = DiscreteAction::new(kepler(2), init.grid().to_vec()).unwrap();
        let bc = BoundaryCondition::SubspaceEnds { start: x_axis, end: y_axis };
        let res = local_minimize(&obj, &init, &bc, &MinimizerSettings::default()).unwrap();
        let p = res.path.points();
        assert!(p[0][1].abs() < 1e-12 && p[p.len() - 1][0].abs() < 1e-12);
        assert!(res.action <= obj.evaluate(init.points(), None).unwrap());
    }

    #[test]
    fn periodic_free_path_collapses_to_constant() {
        let metric = MassMetric::unit(1, 2);
        let grid = Path::uniform_grid(0.0, 1.0, 16);
        let init = Path::from_fn(metric, grid.clone(), |t| vec![1.0 + 0.2 * (2.0 * PI * t).sin(), 0.0]).unwrap();
        let obj = DiscreteAction::new(free(), grid).unwrap();
        let res = local_minimize(&obj, &init, &BoundaryCondition::Periodic, &MinimizerSettings::default()).unwrap();
        assert!(res.converged);
        assert!(res.action.abs() < 1e-12);
    }

    #[test]
    fn second_variation_short_and_long_arcs() {
        let metric = MassMetric::unit(1, 3);
        let probe = |t_end: f64| {
            let grid = Path::uniform_grid(0.0, t_end, 300);
            let path = Path::from_fn(metric.clone(), grid.clone(), |t| vec![t.cos(), t.sin(), 0.0]).unwrap();
            let obj = DiscreteAction::new(kepler(3), grid).unwrap();
            second_variation_check(&obj, &path, &BoundaryCondition::FixedEnds, 24, 7).unwrap()
        };
        assert_eq!(probe(1.0).verdict, SecondVariationVerdict::LocallyMinimalCandidate);
        assert_eq!(probe(1.8 * PI).verdict, SecondVariationVerdict::NotMinimal);
    }
}
