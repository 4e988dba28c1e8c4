//! Collision detection and the asymptotic laws near a collision:
//! Sundman-type power laws, logarithmic laws, `Γ` functions, McGehee
//! coordinates and convergence toward central configurations.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clusters::{build_lattice, default_tol, mu_of, CollisionLattice};
use crate::error::{Error, Result};
use crate::integrator::OdeSolution;
use crate::potentials::{tangential, PotentialSpec, Scaling};
use crate::subspace::Subspace;
use crate::trajectory::{differentiate, Path};

/// Which way the samples approach the collision instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `t → t*⁻`: the collision lies after the last sample of the run.
    Left,
    /// `t → t*⁺`: the collision lies before the first sample of the run.
    Right,
    /// A sample sits on the collision set.
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollisionKind {
    Total,
    Partial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t_star: f64,
    /// `t*` minus the time of the closest sample.
    pub gap: f64,
    pub index: usize,
    pub side: Side,
    /// Limit configuration on the collision set.
    pub limit: Vec<f64>,
    /// Index of `μ*` in the collision lattice.
    pub member: Option<usize>,
    pub cluster: Option<Vec<Vec<usize>>>,
    pub kind: CollisionKind,
    pub distance: f64,
    pub potential: f64,
    #[serde(skip)]
    pub subspace: Option<Subspace>,
}

impl CollisionEvent {
    /// Radial variable `|w_μ*(x)|` (or `|x - x*|` without a subspace).
    pub fn radius(&self, metric: &crate::metric::MassMetric, x: &[f64]) -> f64 {
        metric.norm(&self.relative(x))
    }

    /// `w_μ*(x)`, the part of `x` that collapses.
    pub fn relative(&self, x: &[f64]) -> Vec<f64> {
        match &self.subspace {
            Some(s) => s.complement(x),
            None => x.iter().zip(&self.limit).map(|(a, b)| a - b).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectSettings {
    /// Candidate samples have distance to the collision set below this
    /// fraction of the largest configuration norm.
    pub distance_rel: f64,
    /// Candidate samples with `U` above this.
    pub u_threshold: f64,
}

impl Default for DetectSettings {
    fn default() -> Self {
        Self { distance_rel: 1e-6, u_threshold: 1e10 }
    }
}

fn sample_potential(spec: &PotentialSpec, t: f64, x: &[f64]) -> f64 {
    if spec.singular_distance(x) <= 0.0 {
        f64::INFINITY
    } else {
        spec.potential().value(t, x)
    }
}

fn expected_exponent(spec: &PotentialSpec) -> f64 {
    match spec.alpha() {
        Some(a) => 2.0 / (2.0 + a),
        None => 1.0,
    }
}

/// Build an [`OdeSolution`] view of a path (velocities from the path).
pub fn solution_from_path(path: &Path) -> Result<OdeSolution> {
    let (v, _) = path.velocities()?;
    let last = path.span().1;
    Ok(OdeSolution {
        metric: path.metric().clone(),
        method: "path".into(),
        times: path.grid().to_vec(),
        remaining: path.grid().iter().map(|t| last - t).collect(),
        x: path.points().to_vec(),
        v,
        events: Vec::new(),
        accepted: 0,
        rejected: 0,
    })
}

/// Collision events along the samples.
pub fn detect_collisions(solution: &OdeSolution, spec: &PotentialSpec, settings: &DetectSettings) -> Result<Vec<CollisionEvent>> {
    let n = solution.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = &solution.metric;
    let scale = solution.x.iter().map(|x| m.norm(x)).fold(0.0, f64::max).max(1e-300);
    let d: Vec<f64> = solution.x.iter().map(|x| spec.singular_distance(x)).collect();
    let u: Vec<f64> = (0..n).map(|j| sample_potential(spec, solution.times[j], &solution.x[j])).collect();
    let flagged: Vec<bool> = (0..n).map(|j| d[j] <= settings.distance_rel * scale || u[j] >= settings.u_threshold).collect();
    let lattice = build_lattice(spec).ok();
    let mut events = Vec::new();
    let mut j = 0;
    while j < n {
        if !flagged[j] {
            j += 1;
            continue;
        }
        let start = j;
        while j < n && flagged[j] {
            j += 1;
        }
        let run = start..j;
        let idx = run.clone().min_by(|a, b| d[*a].total_cmp(&d[*b])).unwrap();
        if d[idx] > settings.distance_rel * scale {
            return Err(Error::AmbiguousEvent { t: solution.times[idx] });
        }
        let side = if d[idx] == 0.0 || (idx > 0 && idx + 1 < n) {
            Side::Interior
        } else if idx + 1 == n {
            Side::Left
        } else {
            Side::Right
        };
        if side != Side::Interior {
            // the distance must shrink monotonically toward the event
            let k0 = idx.saturating_sub(10);
            let k1 = (idx + 10).min(n - 1);
            let ok = match side {
                Side::Left => (k0..idx).all(|k| d[k + 1] <= d[k]),
                _ => (idx..k1).all(|k| d[k + 1] >= d[k]),
            };
            if !ok {
                return Err(Error::AmbiguousEvent { t: solution.times[idx] });
            }
        }
        events.push(build_event(solution, spec, lattice.as_ref(), idx, side, d[idx], u[idx])?);
    }
    Ok(events)
}

fn build_event(
    solution: &OdeSolution,
    spec: &PotentialSpec,
    lattice: Option<&CollisionLattice>,
    idx: usize,
    side: Side,
    distance: f64,
    potential: f64,
) -> Result<CollisionEvent> {
    let m = &solution.metric;
    let x = &solution.x[idx];
    let (mut member, mut cluster, mut subspace, mut limit) = (None, None, None, vec![0.0; x.len()]);
    if let Some(l) = lattice {
        let top = l.top();
        let nearest = (0..top)
            .min_by(|a, b| l.member(*a).subspace.distance(x).total_cmp(&l.member(*b).subspace.distance(x)))
            .ok_or(Error::NotSubspaceArrangement)?;
        let xi = l.member(nearest).subspace.project(x);
        let tol = default_tol(m, &xi).max(10.0 * distance);
        let mu = mu_of(l, &xi, tol)?;
        let mem = l.member(mu.index);
        limit = mem.subspace.project(x);
        member = Some(mu.index);
        cluster = mem.partition.clone();
        subspace = Some(mem.subspace.clone());
    }
    let kind = match (&subspace, &cluster) {
        (Some(s), _) if s.dim() == 0 => CollisionKind::Total,
        (_, Some(c)) if c.len() == 1 => CollisionKind::Total,
        (None, _) => CollisionKind::Total,
        _ => CollisionKind::Partial,
    };
    let mut ev = CollisionEvent {
        t_star: solution.times[idx],
        gap: 0.0,
        index: idx,
        side,
        limit,
        member,
        cluster,
        kind,
        distance,
        potential,
        subspace,
    };
    if side != Side::Interior {
        let w = ev.relative(x);
        let vw = ev.relative_velocity(&solution.v[idx]);
        let r = m.norm(&w);
        let rdot = m.dot(&w, &vw) / r;
        let gap = (expected_exponent(spec) * r / rdot).abs();
        ev.gap = if side == Side::Left { gap } else { -gap };
        ev.t_star = solution.times[idx] + ev.gap;
    }
    Ok(ev)
}

impl CollisionEvent {
    fn relative_velocity(&self, v: &[f64]) -> Vec<f64> {
        match &self.subspace {
            Some(s) => s.complement(v),
            None => v.to_vec(),
        }
    }
}

/// Whether successive events are further apart than `min_separation`.
pub fn events_isolated(events: &[CollisionEvent], min_separation: f64) -> bool {
    events.windows(2).all(|w| (w[1].t_star - w[0].t_star).abs() > min_separation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    Power,
    Logarithmic,
}

/// Series underlying a fit, aligned with the window samples.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitSeries {
    /// Time to the collision.
    pub tau: Vec<f64>,
    pub r: Vec<f64>,
    pub rdot: Vec<f64>,
    /// `r / law(τ)`.
    pub ratio: Vec<f64>,
    /// `ṙ² r^α / 2` or `ṙ² / (-2 log r)`.
    pub kinetic: Vec<f64>,
    /// `r^α U` (power law only).
    pub potential: Vec<f64>,
    /// `φ = -ṙ r^{α/2}` (power law only).
    pub phi: Vec<f64>,
    /// `|ṡ|` times the law's time scale.
    pub angular: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SundmanFit {
    pub law: Law,
    pub t_star: f64,
    /// Fitted `t*` minus the last sample time.
    pub gap: f64,
    pub exponent: Option<f64>,
    pub exponent_ci: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub b: Option<f64>,
    pub b_potential: Option<f64>,
    pub b_kinetic: Option<f64>,
    #[serde(rename = "M0")]
    pub m0: Option<f64>,
    pub window: (usize, usize),
    pub r_range: (f64, f64),
    pub residual_rms: f64,
    pub phi_min: Option<f64>,
    pub phi_max: Option<f64>,
    #[serde(skip)]
    pub series: FitSeries,
}

struct Window {
    idx: Vec<usize>,
    tau0: Vec<f64>,
    r: Vec<f64>,
    rdot: Vec<f64>,
    w: Vec<Vec<f64>>,
    vw: Vec<Vec<f64>>,
}

/// Samples from where `r` first drops below `1e-2` of its far value to the event.
fn fit_window(event: &CollisionEvent, sol: &OdeSolution) -> Result<Window> {
    let m = &sol.metric;
    let n = sol.len();
    let order: Vec<usize> = match event.side {
        Side::Left => (0..=event.index).collect(),
        Side::Right => (event.index..n).rev().collect(),
        Side::Interior => return Err(Error::InvalidInput("fits need a one-sided approach".into())),
    };
    let r_far = event.radius(m, &sol.x[order[0]]);
    let first = order
        .iter()
        .position(|&j| event.radius(m, &sol.x[j]) < 1e-2 * r_far)
        .ok_or_else(|| Error::WindowTooShort("r never drops below 1e-2 of its initial value".into()))?;
    let idx: Vec<usize> = order[first..].to_vec();
    let r: Vec<f64> = idx.iter().map(|&j| event.radius(m, &sol.x[j])).collect();
    let (rmax, rmin) = (r[0], *r.last().unwrap());
    if idx.len() < 8 || rmax / rmin < 100.0 {
        return Err(Error::WindowTooShort(format!("r spans {rmax:e}..{rmin:e}")));
    }
    let re = sol.remaining[event.index];
    let tau0 = idx.iter().map(|&j| (sol.remaining[j] - re).abs()).collect();
    let w: Vec<Vec<f64>> = idx.iter().map(|&j| event.relative(&sol.x[j])).collect();
    let vw: Vec<Vec<f64>> = idx.iter().map(|&j| event.relative_velocity(&sol.v[j])).collect();
    let sign = if event.side == Side::Left { 1.0 } else { -1.0 };
    let rdot = w.iter().zip(&vw).zip(&r).map(|((w, v), r)| sign * m.dot(w, v) / r).collect();
    Ok(Window { idx, tau0, r, rdot, w, vw })
}

/// Extrapolate `f(r) → f(0)` from three samples at geometrically spaced radii.
fn aitken_in_r(r: &[f64], f: &[f64]) -> f64 {
    let rmin = *r.last().unwrap();
    let pick = |target: f64| -> usize {
        (0..r.len()).min_by(|a, b| (r[*a] / target).ln().abs().total_cmp(&(r[*b] / target).ln().abs())).unwrap()
    };
    let (i1, i2, i3) = (pick(rmin), pick(10.0 * rmin), pick(100.0 * rmin));
    let (f1, f2, f3) = (f[i1], f[i2], f[i3]);
    let d1 = f2 - f1;
    if d1.abs() <= 1e-13 * f1.abs().max(1e-300) || i1 == i2 || i2 == i3 {
        return f1;
    }
    let ratio = (f3 - f2) / d1;
    if ratio.is_finite() && ratio > 1.0 + 1e-4 {
        f1 - d1 / (ratio - 1.0)
    } else {
        f1
    }
}

/// Least squares for `log r = p (log K + log(τ₀ + Δ))` over `(log Δ, log K, p)`.
fn power_law_lm(tau0: &[f64], r: &[f64], init: (f64, f64, f64)) -> Result<((f64, f64, f64), f64, f64)> {
    let ly: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let n = r.len();
    let resid = |th: &[f64; 3]| -> Vec<f64> {
        let delta = th[0].exp();
        (0..n).map(|j| ly[j] - th[2] * (th[1] + (tau0[j] + delta).ln())).collect()
    };
    let sse = |res: &[f64]| res.iter().map(|v| v * v).sum::<f64>();
    let mut th = [init.0.max(1e-300).ln(), init.1, init.2];
    let mut res = resid(&th);
    let mut cost = sse(&res);
    let mut lambda = 1e-3;
    let jac = |th: &[f64; 3]| -> DMatrix<f64> {
        let delta = th[0].exp();
        DMatrix::from_fn(n, 3, |j, c| {
            let lt = (tau0[j] + delta).ln();
            match c {
                0 => -th[2] * delta / (tau0[j] + delta),
                1 => -th[2],
                _ => -(th[1] + lt),
            }
        })
    };
    for _ in 0..500 {
        let j = jac(&th);
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * DMatrix::from_column_slice(n, 1, &res);
        let mut improved = false;
        for _ in 0..30 {
            let mut aa = a.clone();
            for d in 0..3 {
                aa[(d, d)] *= 1.0 + lambda;
                aa[(d, d)] += 1e-300;
            }
            let Some(step) = aa.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = [th[0] + step[0], th[1] + step[1], th[2] + step[2]];
            let rc = resid(&cand);
            let cc = sse(&rc);
            if cc.is_finite() && cc <= cost {
                let rel = (cost - cc) / cost.max(1e-300);
                th = cand;
                res = rc;
                cost = cc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-15 && step.norm() > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let j = jac(&th);
    let cov = (j.transpose() * &j).try_inverse().unwrap_or_else(|| DMatrix::from_element(3, 3, f64::NAN));
    let dof = (n as f64 - 3.0).max(1.0);
    let sigma2 = cost / dof;
    let ci = 1.96 * (sigma2 * cov[(2, 2)]).abs().sqrt();
    Ok(((th[0].exp(), th[1].exp(), th[2]), (cost / n as f64).sqrt(), ci))
}

/// Power-law fit `r ~ [K(t*-t)]^p` jointly with `t*`, plus the two `b`
/// estimators `r^α U` and `ṙ² r^α / 2`.
pub fn fit_sundman(event: &CollisionEvent, solution: &OdeSolution, spec: &PotentialSpec) -> Result<SundmanFit> {
    let alpha = match spec.scaling() {
        Scaling::Homogeneous { alpha } | Scaling::QuasiHomogeneous { alpha, .. } => alpha,
        _ => return Err(Error::InvalidInput("power-law fits need a (quasi-)homogeneous potential".into())),
    };
    let win = fit_window(event, solution)?;
    let m = &solution.metric;
    let p0 = 2.0 / (2.0 + alpha);
    let n = win.r.len();
    let gap0 = (p0 * win.r[n - 1] / win.rdot[n - 1]).abs();
    let lk0 = win.r.iter().zip(&win.tau0).map(|(r, t)| r.ln() / p0 - (t + gap0).ln()).sum::<f64>() / n as f64;
    let ((gap, k, p), rms, ci) = power_law_lm(&win.tau0, &win.r, (gap0, lk0, p0))?;
    let tau: Vec<f64> = win.tau0.iter().map(|t| t + gap).collect();
    let potential: Vec<f64> = win
        .idx
        .iter()
        .zip(&win.r)
        .map(|(&j, r)| r.powf(alpha) * sample_potential(spec, solution.times[j], &solution.x[j]))
        .collect();
    let kinetic: Vec<f64> = win.rdot.iter().zip(&win.r).map(|(v, r)| 0.5 * v * v * r.powf(alpha)).collect();
    let phi: Vec<f64> = win.rdot.iter().zip(&win.r).map(|(v, r)| -v * r.powf(0.5 * alpha)).collect();
    let angular: Vec<f64> = (0..n)
        .map(|i| {
            let s2 = (m.norm_sq(&win.vw[i]) - win.rdot[i] * win.rdot[i]).max(0.0);
            s2.sqrt() / win.r[i] * tau[i]
        })
        .collect();
    let ratio: Vec<f64> = (0..n).map(|i| win.r[i] / (k * tau[i]).powf(p)).collect();
    let b_potential = aitken_in_r(&win.r, &potential);
    let b_kinetic = aitken_in_r(&win.r, &kinetic);
    let last = *win.idx.last().unwrap();
    let sign = if event.side == Side::Left { 1.0 } else { -1.0 };
    let _ = &win.w;
    Ok(SundmanFit {
        law: Law::Power,
        t_star: solution.times[last] + sign * gap,
        gap: sign * gap,
        exponent: Some(p),
        exponent_ci: Some(ci),
        k: Some(k),
        b: Some(0.5 * (b_potential + b_kinetic)),
        b_potential: Some(b_potential),
        b_kinetic: Some(b_kinetic),
        m0: None,
        window: (win.idx[0].min(last), win.idx[0].max(last)),
        r_range: (win.r[n - 1], win.r[0]),
        residual_rms: rms,
        phi_min: Some(phi.iter().copied().fold(f64::INFINITY, f64::min)),
        phi_max: Some(phi.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        series: FitSeries { tau, r: win.r, rdot: win.rdot, ratio, kinetic, potential, phi, angular },
    })
}

/// [`fit_sundman`] followed by the exponent check against `2/(2+α)`.
pub fn fit_sundman_checked(event: &CollisionEvent, solution: &OdeSolution, spec: &PotentialSpec, band: f64) -> Result<SundmanFit> {
    let fit = fit_sundman(event, solution, spec)?;
    let expected = expected_exponent(spec);
    let p = fit.exponent.unwrap();
    if (p - expected).abs() > band.max(fit.exponent_ci.unwrap_or(0.0)) {
        return Err(Error::ExponentMismatch { fitted: p, expected });
    }
    Ok(fit)
}

/// Logarithmic law `r ~ (t*-t)√(-2M₀ log(t*-t))` with `M₀ = M(t*)`.
///
/// The remaining time past the last sample comes from integrating
/// `ṙ² = c - 2M₀ log r` inward, with `c` read off the last sample.
pub fn fit_sundman_log(event: &CollisionEvent, solution: &OdeSolution, spec: &PotentialSpec) -> Result<SundmanFit> {
    if !spec.scaling().is_log() {
        return Err(Error::InvalidInput("logarithmic fits need a logarithmic potential".into()));
    }
    let win = fit_window(event, solution)?;
    let m = &solution.metric;
    let m0 = spec.log_coefficient(event.t_star);
    if !(m0 > 0.0) {
        return Err(Error::InvalidInput("logarithmic coefficient must be positive".into()));
    }
    let n = win.r.len();
    let (rl, vl) = (win.r[n - 1], win.rdot[n - 1]);
    let c = vl * vl + 2.0 * m0 * rl.ln();
    let arg = -rl.ln() + c / (2.0 * m0);
    if !(arg > 0.0) {
        return Err(Error::WindowTooShort("last sample is not yet in the logarithmic regime".into()));
    }
    let gap = (c / (2.0 * m0)).exp() * (std::f64::consts::PI / (2.0 * m0)).sqrt() * libm::erfc(arg.sqrt());
    let tau: Vec<f64> = win.tau0.iter().map(|t| t + gap).collect();
    let ratio: Vec<f64> = (0..n)
        .map(|i| {
            let t = tau[i];
            if t < 1.0 {
                win.r[i] / (t * (-2.0 * m0 * t.ln()).sqrt())
            } else {
                f64::NAN
            }
        })
        .collect();
    let kinetic: Vec<f64> = win.rdot.iter().zip(&win.r).map(|(v, r)| v * v / (-2.0 * r.ln())).collect();
    let angular: Vec<f64> = (0..n)
        .map(|i| {
            let s2 = (m.norm_sq(&win.vw[i]) - win.rdot[i] * win.rdot[i]).max(0.0);
            let t = tau[i];
            s2.sqrt() / win.r[i] * t * (-2.0 * m0 * t.ln()).abs().sqrt()
        })
        .collect();
    let rms = (ratio.iter().filter(|v| v.is_finite()).map(|v| (v - 1.0).powi(2)).sum::<f64>() / n as f64).sqrt();
    let last = *win.idx.last().unwrap();
    let sign = if event.side == Side::Left { 1.0 } else { -1.0 };
    Ok(SundmanFit {
        law: Law::Logarithmic,
        t_star: solution.times[last] + sign * gap,
        gap: sign * gap,
        exponent: None,
        exponent_ci: None,
        k: None,
        b: None,
        b_potential: None,
        b_kinetic: None,
        m0: Some(m0),
        window: (win.idx[0].min(last), win.idx[0].max(last)),
        r_range: (win.r[n - 1], win.r[0]),
        residual_rms: rms,
        phi_min: None,
        phi_max: None,
        series: FitSeries { tau, r: win.r, rdot: win.rdot, ratio, kinetic, potential: Vec::new(), phi: Vec::new(), angular },
    })
}

/// Value of a fit series at the window sample whose radius is closest to `r`.
pub fn series_at_radius(fit: &SundmanFit, values: &[f64], r: f64) -> f64 {
    let i = (0..fit.series.r.len())
        .min_by(|a, b| (fit.series.r[*a] / r).ln().abs().total_cmp(&(fit.series.r[*b] / r).ln().abs()))
        .unwrap();
    values[i]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaVariant {
    Homogeneous,
    Logarithmic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaSeries {
    pub tau: Vec<f64>,
    pub r: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Extrapolated limit (expected `-b`, or `-Ũ(s̄)` for the log variant).
    pub limit: f64,
    pub bounded: bool,
}

/// `Γ = r^α[½r²|ṡ|² - U]` or `½r²|ṡ|² - [U + M log r]` along the fit window.
pub fn gamma_series(event: &CollisionEvent, solution: &OdeSolution, spec: &PotentialSpec, variant: GammaVariant) -> Result<GammaSeries> {
    let win = fit_window(event, solution)?;
    let m = &solution.metric;
    let n = win.r.len();
    let alpha = spec.alpha().unwrap_or(0.0);
    let gamma: Vec<f64> = (0..n)
        .map(|i| {
            let j = win.idx[i];
            let t = solution.times[j];
            let r = win.r[i];
            let ang = 0.5 * (m.norm_sq(&win.vw[i]) - win.rdot[i] * win.rdot[i]).max(0.0);
            let u = sample_potential(spec, t, &solution.x[j]);
            match variant {
                GammaVariant::Homogeneous => r.powf(alpha) * (ang - u),
                GammaVariant::Logarithmic => ang - (u + spec.log_coefficient(t) * r.ln()),
            }
        })
        .collect();
    let limit = aitken_in_r(&win.r, &gamma);
    let sup = gamma.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    let bounded = gamma.iter().all(|g| g.is_finite()) && sup <= 10.0 * (1.0 + limit.abs());
    Ok(GammaSeries { tau: win.tau0, r: win.r, gamma, limit, bounded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McGeheeState {
    pub r: f64,
    pub s: Vec<f64>,
    pub v: f64,
    pub u: Vec<f64>,
    pub tau: f64,
}

impl McGeheeState {
    /// `(x, ẋ)` back from the McGehee variables.
    pub fn reconstruct(&self, alpha: f64) -> (Vec<f64>, Vec<f64>) {
        let x = self.s.iter().map(|c| self.r * c).collect();
        let scale = self.r.powf(-0.5 * alpha);
        let xdot = self.s.iter().zip(&self.u).map(|(s, u)| scale * (self.v * s + u)).collect();
        (x, xdot)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McGeheeSeries {
    pub alpha: f64,
    pub states: Vec<McGeheeState>,
    /// Largest residuals of the `r'`, `v'`, `s'`, `u'` equations under
    /// `τ`-differencing, over interior samples.
    pub residuals: [f64; 4],
    /// Pointwise residual of `r' = r v`.
    pub r_residual: Vec<f64>,
}

/// McGehee variables `r, s, v = r^{α/2} ẋ·s, u = r^{α/2}(ẋ - (ẋ·s)s)` with
/// `dτ = r^{-1-α/2} dt`, on samples `range` of the solution.
pub fn mcgehee_transform(solution: &OdeSolution, spec: &PotentialSpec, range: std::ops::Range<usize>) -> Result<McGeheeSeries> {
    let alpha = spec
        .alpha()
        .ok_or_else(|| Error::InvalidInput("McGehee coordinates need a (quasi-)homogeneous potential".into()))?;
    let m = &solution.metric;
    if range.len() < 3 {
        return Err(Error::WindowTooShort("need at least three samples".into()));
    }
    let mut states = Vec::with_capacity(range.len());
    let mut tau = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for j in range.clone() {
        let x = &solution.x[j];
        let xd = &solution.v[j];
        let r = m.norm(x);
        if !(r > 0.0) {
            return Err(Error::SingularConfiguration { index: Some(j) });
        }
        let s: Vec<f64> = x.iter().map(|c| c / r).collect();
        let rd = m.dot(xd, &s);
        let sc = r.powf(0.5 * alpha);
        let u: Vec<f64> = xd.iter().zip(&s).map(|(a, b)| sc * (a - rd * b)).collect();
        let w = r.powf(-1.0 - 0.5 * alpha);
        let t = -solution.remaining[j];
        if let Some((tp, wp)) = prev {
            tau += 0.5 * (w + wp) * (t - tp);
        }
        prev = Some((t, w));
        states.push(McGeheeState { r, s, v: sc * rd, u, tau });
    }
    let taus: Vec<f64> = states.iter().map(|s| s.tau).collect();
    let col = |f: &dyn Fn(&McGeheeState) -> f64| -> Vec<f64> { differentiate(&taus, &states.iter().map(f).collect::<Vec<_>>()) };
    let dr = col(&|s| s.r);
    let dv = col(&|s| s.v);
    let size = m.size();
    let ds: Vec<Vec<f64>> = (0..size).map(|k| col(&|s| s.s[k])).collect();
    let du: Vec<Vec<f64>> = (0..size).map(|k| col(&|s| s.u[k])).collect();
    let mut res = [0.0f64; 4];
    let mut r_residual = vec![0.0; states.len()];
    for (i, j) in range.clone().enumerate() {
        let st = &states[i];
        let t = solution.times[j];
        let g = spec.gradient(t, &solution.x[j])?;
        let gs = m.dot(&g, &st.s);
        let gt = tangential(m, &g, &st.s);
        let uu = m.norm_sq(&st.u);
        let f = st.r.powf(1.0 + alpha);
        let e_r = dr[i] - st.r * st.v;
        r_residual[i] = e_r;
        if i == 0 || i + 1 == states.len() {
            continue;
        }
        let e_v = dv[i] - (0.5 * alpha * st.v * st.v + uu + f * gs);
        let e_s: Vec<f64> = (0..size).map(|k| ds[k][i] - st.u[k]).collect();
        let e_u: Vec<f64> = (0..size)
            .map(|k| du[k][i] - ((0.5 * alpha - 1.0) * st.v * st.u[k] - uu * st.s[k] + f * gt[k]))
            .collect();
        res[0] = res[0].max(e_r.abs());
        res[1] = res[1].max(e_v.abs());
        res[2] = res[2].max(m.norm(&e_s));
        res[3] = res[3].max(m.norm(&e_u));
    }
    Ok(McGeheeSeries { alpha, states, residuals: res, r_residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralConfig {
    pub s: Vec<f64>,
    pub level: f64,
    pub tangential_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralConfigSet {
    pub configs: Vec<CentralConfig>,
    /// Distinct levels `Ũ(s)` found.
    pub levels: Vec<f64>,
    /// `Ũ` constant on the ellipsoid: every direction is central.
    pub degenerate: bool,
    pub starts: usize,
    pub failures: usize,
}

fn unit(m: &crate::metric::MassMetric, s: &[f64]) -> Vec<f64> {
    let n = m.norm(s);
    s.iter().map(|c| c / n).collect()
}

/// Tangential gradient of `Ũ` at `s/|s|`.
fn tangential_field(spec: &PotentialSpec, s: &[f64]) -> Result<Vec<f64>> {
    let su = unit(spec.metric(), s);
    spec.limit_tangential_gradient(0.0, &su)
}

/// Minimize `Ũ` on the ellipsoid from `s0` by Riemannian gradient descent
/// with Barzilai–Borwein steps.
fn descend(spec: &PotentialSpec, s0: Vec<f64>) -> Option<CentralConfig> {
    let m = spec.metric();
    let mut s = unit(m, &s0);
    let mut f = spec.limit_potential(0.0, &s).ok()?;
    let mut g = tangential_field(spec, &s).ok()?;
    let mut step = 0.1 / (1.0 + m.norm(&g));
    for _ in 0..20_000 {
        let gn = m.norm(&g);
        if gn <= 1e-12 * (1.0 + f.abs()) {
            return Some(CentralConfig { s, level: f, tangential_norm: gn });
        }
        let mut accepted = None;
        let mut h = step;
        for _ in 0..60 {
            let cand = unit(m, &s.iter().zip(&g).map(|(a, b)| a - h * b).collect::<Vec<_>>());
            if let Ok(fc) = spec.limit_potential(0.0, &cand) {
                if fc <= f + 1e-12 * f.abs() + 1e-4 * h * gn * gn || h < step * 1e-3 {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            h *= 0.5;
        }
        let (sn, fnew) = accepted?;
        let gnew = tangential_field(spec, &sn).ok()?;
        let ds: Vec<f64> = sn.iter().zip(&s).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = m.dot(&ds, &dg);
        step = if sy > 0.0 { (m.norm_sq(&ds) / sy).min(1e3) } else { 2.0 * h };
        s = sn;
        f = fnew;
        g = gnew;
    }
    None
}

/// Central configurations of `Ũ` (local minima on the ellipsoid) from
/// `starts` random starts, deduplicated and grouped by level.
pub fn find_central_configurations(spec: &PotentialSpec, level: Option<f64>, starts: usize, seed: u64) -> Result<CentralConfigSet> {
    let m = spec.metric();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inits = Vec::with_capacity(starts);
    while inits.len() < starts {
        let s = m.random_unit(&mut rng);
        if spec.singular_distance(&s) > 1e-3 {
            inits.push(s);
        }
    }
    let degenerate = inits.iter().all(|s| {
        tangential_field(spec, s).map(|g| m.norm(&g) <= 1e-12 * (1.0 + spec.limit_potential(0.0, s).unwrap_or(0.0).abs())).unwrap_or(false)
    });
    let found: Vec<Option<CentralConfig>> = inits.into_par_iter().map(|s| descend(spec, s)).collect();
    let failures = found.iter().filter(|f| f.is_none()).count();
    let mut configs: Vec<CentralConfig> = Vec::new();
    for c in found.into_iter().flatten() {
        if let Some(b) = level {
            if (c.level - b).abs() > 1e-6 * (1.0 + b.abs()) {
                continue;
            }
        }
        if !configs.iter().any(|o| m.distance(&o.s, &c.s) < 1e-6) {
            configs.push(c);
        }
    }
    configs.sort_by(|a, b| a.level.total_cmp(&b.level));
    let mut levels: Vec<f64> = Vec::new();
    for c in &configs {
        if levels.last().is_none_or(|l| (c.level - l).abs() > 1e-8 * (1.0 + l.abs())) {
            levels.push(c.level);
        }
    }
    if configs.is_empty() && failures == starts {
        return Err(Error::EmptyCentralSet);
    }
    Ok(CentralConfigSet { configs, levels, degenerate, starts, failures })
}

/// Gauss–Newton least-norm projection of `s` onto `{∇_T Ũ = 0}`.
pub fn project_to_central(spec: &PotentialSpec, s: &[f64]) -> Option<Vec<f64>> {
    let m = spec.metric();
    let n = m.size();
    let mut y = unit(m, s);
    for _ in 0..40 {
        let g = tangential_field(spec, &y).ok()?;
        if m.norm(&g) <= 1e-11 {
            return Some(y);
        }
        let h = 1e-6;
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[k] += h;
            ym[k] -= h;
            let (gp, gm) = (tangential_field(spec, &yp).ok()?, tangential_field(spec, &ym).ok()?);
            for r in 0..n {
                jac[(r, k)] = (gp[r] - gm[r]) / (2.0 * h);
            }
        }
        let svd = jac.svd(true, true);
        let cut = 1e-8 * svd.singular_values.max();
        let delta = svd.solve(&DMatrix::from_column_slice(n, 1, &g), cut).ok()?;
        let yn: Vec<f64> = (0..n).map(|k| y[k] - delta[k]).collect();
        y = unit(m, &yn);
    }
    let g = tangential_field(spec, &y).ok()?;
    (m.norm(&g) <= 1e-8).then_some(y)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralDistanceSeries {
    pub tau: Vec<f64>,
    pub distance: Vec<f64>,
    pub tangential: Vec<f64>,
    /// Distances shrink along the window (last tenth against first tenth).
    pub decreasing: bool,
}

/// `dist(s(t), C)` and `|∇_T Ũ(s(t))|` along the fit window of a total
/// collision, on at most `max_samples` samples.
pub fn central_config_distance(
    event: &CollisionEvent,
    solution: &OdeSolution,
    spec: &PotentialSpec,
    set: &CentralConfigSet,
    max_samples: usize,
) -> Result<CentralDistanceSeries> {
    if set.configs.is_empty() && !set.degenerate {
        return Err(Error::EmptyCentralSet);
    }
    let win = fit_window(event, solution)?;
    let m = &solution.metric;
    let stride = (win.r.len() / max_samples.max(1)).max(1);
    let picks: Vec<usize> = (0..win.r.len()).step_by(stride).chain(std::iter::once(win.r.len() - 1)).collect();
    let rows: Vec<(f64, f64, f64)> = picks
        .par_iter()
        .map(|&i| {
            let s = unit(m, &win.w[i]);
            let tn = tangential_field(spec, &s).map(|g| m.norm(&g)).unwrap_or(f64::NAN);
            let dist = if set.degenerate {
                0.0
            } else {
                match project_to_central(spec, &s) {
                    Some(c) => m.distance(&c, &s),
                    None => set.configs.iter().map(|c| m.distance(&c.s, &s)).fold(f64::INFINITY, f64::min),
                }
            };
            (win.tau0[i], dist, tn)
        })
        .collect();
    let distance: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let k = (distance.len() / 10).max(1);
    let head = distance[..k].iter().sum::<f64>() / k as f64;
    let tail = distance[distance.len() - k..].iter().sum::<f64>() / k as f64;
    Ok(CentralDistanceSeries {
        tau: rows.iter().map(|r| r.0).collect(),
        distance,
        tangential: rows.iter().map(|r| r.2).collect(),
        decreasing: tail <= head + 1e-12,
    })
}

/// Largest `|s(t) - s(t_last)|` over the window samples with time to
/// collision below `fraction` of the window length.
pub fn angular_oscillation(event: &CollisionEvent, solution: &OdeSolution, fraction: f64) -> Result<f64> {
    let win = fit_window(event, solution)?;
    let m = &solution.metric;
    let span = win.tau0[0];
    let last = unit(m, win.w.last().unwrap());
    Ok((0..win.r.len())
        .filter(|&i| win.tau0[i] <= fraction * span)
        .map(|i| m.distance(&unit(m, &win.w[i]), &last))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::integrator::{homothetic_collision_orbit, integrate};
    use crate::metric::MassMetric;
    use crate::potentials::{CentralPower, PairPower};

    fn kepler() -> PotentialSpec {
        PotentialSpec::new(Arc::new(CentralPower::kepler_like(2, 1.0).unwrap()))
    }

    fn ejection() -> OdeSolution {
        integrate(&kepler(), &[1.0, 0.0], &[-(2f64.sqrt()), 0.0], (0.0, 1.0), 1e-13).unwrap()
    }

    #[test]
    fn synthetic_law_is_recovered() {
        let grid: Vec<f64> = (0..400).map(|j| 1.0 - 10f64.powf(-0.5 - 12.0 * j as f64 / 399.0)).collect();
        let sol = homothetic_collision_orbit(&kepler(), &[1.0, 0.0], 1.0, &grid).unwrap();
        let events = detect_collisions(&sol, &kepler(), &DetectSettings::default()).unwrap();
        assert_eq!(events.len(), 1);
        let fit = fit_sundman(&events[0], &sol, &kepler()).unwrap();
        assert!((fit.exponent.unwrap() - 2.0 / 3.0).abs() < 1e-6);
        assert!((fit.k.unwrap() - 3.0 / 2f64.sqrt()).abs() < 1e-6);
        assert!((fit.b.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ejection_collision_time() {
        let sol = ejection();
        let events = detect_collisions(&sol, &kepler(), &DetectSettings::default()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].side, Side::Left);
        assert_eq!(events[0].kind, CollisionKind::Total);
        let fit = fit_sundman(&events[0], &sol, &kepler()).unwrap();
        assert!((fit.t_star - 2f64.sqrt() / 3.0).abs() < 1e-6, "{}", fit.t_star);
        assert!((fit.exponent.unwrap() - 2.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn circular_orbit_has_no_events() {
        let sol = integrate(&kepler(), &[1.0, 0.0], &[0.0, 1.0], (0.0, 7.0), 1e-10).unwrap();
        assert!(detect_collisions(&sol, &kepler(), &DetectSettings::default()).unwrap().is_empty());
    }

    #[test]
    fn constructed_binary_sample() {
        let spec = PotentialSpec::new(Arc::new(PairPower::homogeneous(MassMetric::unit(3, 2), 1.0).unwrap()));
        let grid = Path::uniform_grid(-1.0, 1.0, 20);
        let path = Path::from_fn(MassMetric::unit(3, 2), grid, |t| vec![t, 0.0, -t, 0.0, 0.0, 3.0]).unwrap();
        let sol = solution_from_path(&path).unwrap();
        let ev = detect_collisions(&sol, &spec, &DetectSettings::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].side, Side::Interior);
        assert_eq!(ev[0].kind, CollisionKind::Partial);
        assert_eq!(ev[0].cluster, Some(vec![vec![0, 1], vec![2]]));
    }

    #[test]
    fn radial_gamma_is_minus_one() {
        let sol = ejection();
        let ev = &detect_collisions(&sol, &kepler(), &DetectSettings::default()).unwrap()[0];
        let g = gamma_series(ev, &sol, &kepler(), GammaVariant::Homogeneous).unwrap();
        assert!(g.gamma.iter().all(|v| (v + 1.0).abs() < 1e-8));
        assert!(g.bounded);
    }

    #[test]
    fn mcgehee_radial_ejection() {
        let sol = ejection();
        let n = sol.len();
        let mc = mcgehee_transform(&sol, &kepler(), n / 2..n).unwrap();
        assert!(mc.states.iter().all(|s| (s.v + 2f64.sqrt()).abs() < 1e-8 && s.u.iter().all(|u| u.abs() < 1e-12)));
        let st = &mc.states[3];
        let (x, xd) = st.reconstruct(1.0);
        let j = n / 2 + 3;
        assert!((x[0] - sol.x[j][0]).abs() <= 1e-12 * sol.x[j][0].abs());
        assert!((xd[0] - sol.v[j][0]).abs() <= 1e-12 * sol.v[j][0].abs());
        assert!(mc.states.last().unwrap().tau > mc.states[0].tau);
    }

    #[test]
    fn lagrange_equilateral_is_found() {
        let spec = PotentialSpec::new(Arc::new(PairPower::homogeneous(MassMetric::unit(3, 2), 1.0).unwrap()));
        let set = find_central_configurations(&spec, None, 8, 3).unwrap();
        let best = &set.configs[0];
        assert!((best.level - 3.0).abs() < 1e-9, "{}", best.level);
        let s = &best.s;
        let side = |i: usize, j: usize| ((s[2 * i] - s[2 * j]).powi(2) + (s[2 * i + 1] - s[2 * j + 1]).powi(2)).sqrt();
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!((side(i, j) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn one_center_is_degenerate() {
        let set = find_central_configurations(&kepler(), None, 4, 0).unwrap();
        assert!(set.degenerate);
    }
}
