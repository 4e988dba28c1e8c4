//! Blow-ups, standard variations and the averaged action differentials
//! used to exclude collisions from minimizers.
//!
//! Angle convention: in `Φ_α(ϑ)` the angle `ϑ` is measured between `ζ` and
//! `-δ`, so `Φ_α(π)` is the value for `δ` parallel to `ζ`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::OdeSolution;
use crate::metric::MassMetric;
use crate::potentials::PotentialSpec;
use crate::quadrature::{circle_mean_clustered, gauss_kronrod, sidi4, tanh_sinh, Quadrature, Tolerance};
use crate::subspace::Subspace;
use crate::trajectory::Path;

fn kernel_tol() -> Tolerance {
    Tolerance::new(1e-13, 1e-12)
}

/// `(x - 1)` for `x = t^q` given `1 - t` exactly.
fn pow_minus_one(q: f64, one_minus_t: f64) -> f64 {
    (q * (-one_minus_t).ln_1p()).exp_m1()
}

/// `a² - 2a cos ϑ + 1` written as `(a-1)² + 4 sin²(ϑ/2) a`.
fn kernel_denominator(a: f64, a_minus_one: f64, sin_half_sq: f64) -> f64 {
    a_minus_one * a_minus_one + 4.0 * sin_half_sq * a
}

struct Kernel {
    alpha: f64,
    q: f64,
    cos: f64,
    sin_half_sq: f64,
}

impl Kernel {
    fn new(alpha: f64, theta: f64) -> Self {
        let s = (0.5 * theta).sin();
        Self { alpha, q: 2.0 / (alpha + 2.0), cos: theta.cos(), sin_half_sq: s * s }
    }

    /// Integrand on `t ∈ (0, 1)`, with `1 - t` supplied separately.
    fn head(&self, t: f64, one_minus_t: f64) -> f64 {
        let a = t.powf(self.q);
        self.power(a, pow_minus_one(self.q, one_minus_t)) - t.powf(-self.q * self.alpha)
    }

    /// `(a² - 2a cos ϑ + 1)^{-α/2}`; `|a - 1|^{-α}` at `ϑ = 0`.
    fn power(&self, a: f64, a_minus_one: f64) -> f64 {
        if self.sin_half_sq == 0.0 {
            a_minus_one.abs().powf(-self.alpha)
        } else {
            kernel_denominator(a, a_minus_one, self.sin_half_sq).powf(-0.5 * self.alpha)
        }
    }

    /// Integrand after `t = 1/u` on `u ∈ (0, 1)`.
    fn tail(&self, u: f64, one_minus_u: f64) -> f64 {
        let a = u.powf(self.q);
        let z = a * a - 2.0 * self.cos * a;
        let bracket = if z.abs() < 0.5 {
            (-0.5 * self.alpha * z.ln_1p()).exp_m1()
        } else {
            self.power(a, pow_minus_one(self.q, one_minus_u)) - 1.0
        };
        scaled(bracket, (self.q * self.alpha - 2.0) * u.ln())
    }
}

/// `v e^{log_factor}` without overflowing the factor on its own.
fn scaled(v: f64, log_factor: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * (v.abs().ln() + log_factor).exp()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("α = {alpha} outside (0, 2)")))
    }
}

/// `Φ_α(ϑ) = ∫_0^∞ (t^{4/(α+2)} - 2cos ϑ t^{2/(α+2)} + 1)^{-α/2} - t^{-2α/(α+2)} dt`.
///
/// Returns `+∞` at `ϑ = 0` for `α ≥ 1`.
pub fn phi_alpha(alpha: f64, theta: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let k = Kernel::new(alpha, theta);
    if k.sin_half_sq == 0.0 && alpha >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let tol = kernel_tol();
    let head = tanh_sinh(|t, _, r| k.head(t, r), 0.0, 1.0, tol)?;
    let tail = tanh_sinh(|u, _, r| k.tail(u, r), 0.0, 1.0, tol)?;
    Ok(head.value + tail.value)
}

/// [`phi_alpha`] with an arbitrary one-dimensional scheme.
pub fn phi_alpha_with(alpha: f64, theta: f64, quad: &dyn Quadrature) -> Result<f64> {
    check_alpha(alpha)?;
    let k = Kernel::new(alpha, theta);
    if k.sin_half_sq == 0.0 && alpha >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let tol = kernel_tol();
    let head = quad.integrate(&|t| k.head(t, 1.0 - t), 0.0, 1.0, tol)?;
    let tail = quad.integrate(&|u| k.tail(u, 1.0 - u), 0.0, 1.0, tol)?;
    Ok(head.value + tail.value)
}

/// Schemes for the circle average of `Φ_α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AverageScheme {
    /// Inner `ϑ`-average first, in closed form as `₂F₁(α/2, α/2; 1; a²)`,
    /// then the `t`-integral termwise with Richardson extrapolation of the
    /// partial sums.
    Series,
    /// Adaptive Gauss–Kronrod over `ϑ = πv²` of [`phi_alpha`].
    Double,
}

impl std::str::FromStr for AverageScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "series" => Ok(Self::Series),
            "double" => Ok(Self::Double),
            _ => Err(Error::UnknownName { registry: "averaging scheme", name: s.into() }),
        }
    }
}

/// `(1/2π)∫_0^{2π} Φ_α(ϑ) dϑ`.
pub fn average_phi(alpha: f64, scheme: AverageScheme) -> Result<f64> {
    check_alpha(alpha)?;
    match scheme {
        AverageScheme::Series => average_phi_series(alpha),
        AverageScheme::Double => average_phi_double(alpha),
    }
}

fn average_phi_series(alpha: f64) -> Result<f64> {
    let h = 0.5 * alpha;
    let q = 2.0 / (alpha + 2.0);
    const N0: usize = 512;
    const LEVELS: usize = 8;
    let mut partial = Vec::with_capacity(LEVELS);
    let mut c = 1.0;
    let mut sum = 1.0 / (h + 1.0);
    let mut next = N0;
    let mut n = 1usize;
    while partial.len() < LEVELS {
        let nf = n as f64;
        let r = (nf - 1.0 + h) / nf;
        c *= r * r;
        sum += c * (1.0 / (2.0 * nf + h + 1.0) + 1.0 / (2.0 * nf + h - 1.0));
        if n + 1 == next {
            partial.push(sum);
            next *= 2;
        }
        n += 1;
    }
    // tails behave like N^{α-2}, N^{α-3}, ...
    let mut table = partial.clone();
    let mut prev_best = table[LEVELS - 1];
    let mut best = prev_best;
    for j in 0..LEVELS - 1 {
        let r = 2f64.powf(alpha - 2.0 - j as f64);
        let next: Vec<f64> = table.windows(2).map(|w| (w[1] - r * w[0]) / (1.0 - r)).collect();
        prev_best = best;
        best = *next.last().unwrap();
        table = next;
    }
    if !best.is_finite() || (best - prev_best).abs() > 1e-9 {
        return Err(Error::QuadratureFailure(format!("series extrapolation unstable: {best} vs {prev_best}")));
    }
    Ok((best - 2.0 / (2.0 - alpha)) / q)
}

fn average_phi_double(alpha: f64) -> Result<f64> {
    let failed = std::sync::Mutex::new(None);
    let f = |v: f64| -> f64 {
        match phi_alpha(alpha, PI * v * v) {
            Ok(p) => 2.0 * v * p,
            Err(e) => {
                *failed.lock().unwrap() = Some(e);
                0.0
            }
        }
    };
    let est = gauss_kronrod(f, 0.0, 1.0, Tolerance::new(1e-10, 1e-10), 2000)?;
    if let Some(e) = failed.into_inner().unwrap() {
        return Err(e);
    }
    Ok(est.value)
}

/// `Ũ` extended off the ellipsoid and its directional increment.
struct Limit<'a> {
    spec: &'a PotentialSpec,
}

impl Limit<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        if self.spec.singular_distance(x) <= 0.0 {
            return f64::INFINITY;
        }
        self.spec.potential().limit_value(0.0, x)
    }

    fn directional(&self, x: &[f64], h: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.spec.potential().limit_partial(0.0, x, &mut g);
        g.iter().zip(h).map(|(a, b)| a * b).sum()
    }

    /// `Ũ(x + h) - Ũ(x)` without cancellation for small `h`.
    fn increment(&self, x: &[f64], h: &[f64]) -> f64 {
        increment(|y| self.value(y), |y, d| self.directional(y, d), self.spec.metric(), self.spec.singular_distance(x), x, h)
    }
}

fn increment(
    value: impl Fn(&[f64]) -> f64,
    directional: impl Fn(&[f64], &[f64]) -> f64,
    metric: &MassMetric,
    dist: f64,
    x: &[f64],
    h: &[f64],
) -> f64 {
    if metric.norm(h) <= 1e-3 * dist {
        // Simpson on s ↦ ∇U(x + s h)·h
        let at = |s: f64| -> Vec<f64> { x.iter().zip(h).map(|(a, b)| a + s * b).collect() };
        (directional(x, h) + 4.0 * directional(&at(0.5), h) + directional(&at(1.0), h)) / 6.0
    } else {
        let y: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + b).collect();
        value(&y) - value(x)
    }
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(u, v)| a * u + v).collect()
}

fn split_points(points: &mut Vec<f64>, lo: f64, hi: f64) {
    points.retain(|p| *p > lo && *p < hi);
    points.push(lo);
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
}

/// Sum of tanh-sinh integrals over consecutive pieces; `f(anchor, off)`
/// receives the nearer endpoint of the piece and the signed offset from it.
fn integrate_pieces<F: Fn(f64, f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> Result<f64> {
    let mut total = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        total += tanh_sinh(|_, dl, dr| if dl <= dr { f(a, dl) } else { f(b, -dr) }, a, b, tol)?.value;
    }
    Ok(total)
}

/// `(anchor + off)^q / anchor^q - 1`.
fn rel_power_step(q: f64, anchor: f64, off: f64) -> f64 {
    (q * (off / anchor).ln_1p()).exp_m1()
}

/// `S(ζ, δ) = ∫_0^∞ Ũ(ζ t^{2/(2+α)} + δ) - Ũ(ζ t^{2/(2+α)}) dt`.
///
/// Returns `+∞` when the displaced ray meets the singular set.
pub fn displacement_potential(spec: &PotentialSpec, zeta: &[f64], delta: &[f64]) -> Result<f64> {
    let alpha = spec.alpha().ok_or_else(|| Error::InvalidInput("S needs a (quasi-)homogeneous potential".into()))?;
    let m = spec.metric();
    if m.norm(zeta) == 0.0 {
        return Err(Error::InvalidInput("ζ must be nonzero".into()));
    }
    let lim = Limit { spec };
    let q = 2.0 / (2.0 + alpha);
    let sigmas = spec.potential().approach_params(zeta, delta);
    for &s in &sigmas {
        if spec.singular_distance(&axpy(s, zeta, delta)) <= 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    let (nz, nd) = (m.norm(zeta), m.norm(delta));
    let u_zeta = lim.value(zeta);
    let tol = Tolerance::new(1e-14, 1e-12);
    // t ∈ (0, 1]: x = ζ t^q, y = x + δ
    let mut head_pts: Vec<f64> = sigmas.iter().map(|s| s.powf(1.0 / q)).collect();
    split_points(&mut head_pts, 0.0, 1.0);
    let head = integrate_pieces(
        |anchor, off| {
            let t = anchor + off;
            let (x, y) = if anchor == 0.0 {
                let x: Vec<f64> = zeta.iter().map(|z| z * t.powf(q)).collect();
                let y = axpy(1.0, &x, delta);
                (x, y)
            } else {
                let xa: Vec<f64> = zeta.iter().map(|z| z * anchor.powf(q)).collect();
                let e = rel_power_step(q, anchor, off);
                let ya = axpy(1.0, &xa, delta);
                (xa.iter().map(|v| v * (1.0 + e)).collect(), axpy(e, &xa, &ya))
            };
            if nz * t.powf(q) < 1e-3 * nd {
                lim.value(&y) - scaled(u_zeta, -alpha * q * t.ln())
            } else if nd <= 1e-3 * spec.singular_distance(&x) {
                lim.increment(&x, delta)
            } else {
                lim.value(&y) - lim.value(&x)
            }
        },
        &head_pts,
        tol,
    )?;
    // t = 1/u: u^{qα-2}[Ũ(ζ + δ u^q) - Ũ(ζ)]
    let mut tail_pts: Vec<f64> = sigmas.iter().map(|s| s.powf(-1.0 / q)).collect();
    split_points(&mut tail_pts, 0.0, 1.0);
    let tail = integrate_pieces(
        |anchor, off| {
            let u = anchor + off;
            let a = u.powf(q);
            let diff = if nd * a <= 1e-3 * spec.singular_distance(zeta) {
                let h: Vec<f64> = delta.iter().map(|d| d * a).collect();
                lim.increment(zeta, &h)
            } else if anchor == 0.0 {
                lim.value(&axpy(a, delta, zeta)) - u_zeta
            } else {
                let aa = anchor.powf(q);
                let za = axpy(aa, delta, zeta);
                let e = rel_power_step(q, anchor, off);
                lim.value(&axpy(aa * e, delta, &za)) - u_zeta
            };
            scaled(diff, (q * alpha - 2.0) * u.ln())
        },
        &tail_pts,
        tol,
    )?;
    let s = head + tail;
    if !s.is_finite() {
        return Err(Error::QuadratureFailure("S(ζ, δ) is not finite".into()));
    }
    Ok(s)
}

/// A 2-plane with a mass-orthonormal basis `e₁, e₂`.
#[derive(Debug, Clone)]
pub struct Circle {
    e1: Vec<f64>,
    e2: Vec<f64>,
}

impl Circle {
    pub fn new(plane: &Subspace) -> Result<Self> {
        if plane.dim() < 2 {
            return Err(Error::InvalidInput("circle needs a subspace of dimension ≥ 2".into()));
        }
        Ok(Self { e1: plane.basis()[0].clone(), e2: plane.basis()[1].clone() })
    }

    pub fn point(&self, radius: f64, theta: f64) -> Vec<f64> {
        let (s, c) = theta.sin_cos();
        self.e1.iter().zip(&self.e2).map(|(a, b)| radius * (c * a + s * b)).collect()
    }
}

/// Angle on the circle minimizing `badness`, as the clustering centre for
/// the circle quadrature.
fn worst_angle(badness: impl Fn(f64) -> f64 + Sync) -> f64 {
    let n = 256;
    let vals: Vec<f64> = (0..n).into_par_iter().map(|j| badness(2.0 * PI * j as f64 / n as f64)).collect();
    let j = (0..n).min_by(|a, b| vals[*a].total_cmp(&vals[*b])).unwrap();
    let h = 2.0 * PI / n as f64;
    let (mut a, mut b) = (j as f64 * h - h, j as f64 * h + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if badness(c) < badness(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (0.5 * (a + b)).rem_euclid(2.0 * PI)
}

/// Mean over the circle of `f(θ)` by trapezoid after a Sidi map clustering
/// nodes at `centre`, doubling until successive values agree to `tol`
/// (relative to `1 + |mean|`).
fn circle_mean_doubling(f: impl Fn(f64) -> f64 + Sync, centre: f64, n0: usize, tol: f64, n_max: usize) -> Result<(f64, usize)> {
    let eval = |n: usize| -> f64 {
        let h = 2.0 * PI / n as f64;
        (0..n)
            .into_par_iter()
            .map(|j| {
                let (phi, jac) = sidi4((j as f64 + 0.5) * h);
                if jac == 0.0 {
                    0.0
                } else {
                    f(centre + phi) * jac
                }
            })
            .sum::<f64>()
            / n as f64
    };
    let mut n = n0;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let cur = eval(n);
        if !cur.is_finite() {
            return Err(Error::QuadratureFailure("non-finite circle average".into()));
        }
        if (cur - prev).abs() <= tol * (1.0 + cur.abs()) {
            return Ok((cur, n));
        }
        if n >= n_max {
            return Err(Error::QuadratureFailure(format!("circle average not stable at {n} nodes: {prev} vs {cur}")));
        }
        prev = cur;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircleAverage {
    pub mean: f64,
    pub nodes: usize,
    /// Node angle with the smallest value and that value.
    pub min_angle: f64,
    pub min_value: f64,
    #[serde(skip)]
    pub min_delta: Vec<f64>,
}

/// `(1/2π)∫_S S(ζ, δ) dδ` over the unit circle of `plane`.
pub fn averaged_s_on_circle(spec: &PotentialSpec, zeta: &[f64], plane: &Subspace, n_nodes: usize) -> Result<CircleAverage> {
    let circle = Circle::new(plane)?;
    let m = spec.metric();
    let badness = |theta: f64| -> f64 {
        let d = circle.point(1.0, theta);
        spec.potential()
            .approach_params(zeta, &d)
            .iter()
            .map(|s| spec.singular_distance(&axpy(*s, zeta, &d)))
            .fold(f64::INFINITY, f64::min)
    };
    let centre = worst_angle(badness);
    let s_at = |theta: f64| displacement_potential(spec, zeta, &circle.point(1.0, theta)).unwrap_or(f64::NAN);
    let (mean, nodes) = circle_mean_doubling(s_at, centre, n_nodes.max(8) / 2, 1e-9, 1 << 14)?;
    let probe: Vec<(f64, f64)> = (0..64).into_par_iter().map(|j| {
        let th = 2.0 * PI * (j as f64 + 0.5) / 64.0;
        (th, s_at(th))
    }).collect();
    let (min_angle, min_value) = probe.into_iter().filter(|p| p.1.is_finite()).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((0.0, f64::NAN));
    let _ = m;
    Ok(CircleAverage { mean, nodes, min_angle, min_value, min_delta: circle.point(1.0, min_angle) })
}

/// Parabolic blow-up `q(t) = ζ t^{2/(2+α)}`, `t ≥ 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowUp {
    pub zeta: Vec<f64>,
    pub alpha: f64,
}

impl BlowUp {
    /// Zero-energy blow-up along `s̄`: `|ζ|^{2+α} = ((2+α)²/2) Ũ(s̄)`.
    pub fn parabolic(spec: &PotentialSpec, s_bar: &[f64]) -> Result<Self> {
        let alpha = spec.alpha().ok_or_else(|| Error::InvalidInput("blow-ups need a (quasi-)homogeneous potential".into()))?;
        let m = spec.metric();
        let n = m.norm(s_bar);
        let s: Vec<f64> = s_bar.iter().map(|c| c / n).collect();
        let u = spec.limit_potential(0.0, &s)?;
        let size = ((2.0 + alpha).powi(2) / 2.0 * u).powf(1.0 / (2.0 + alpha));
        Ok(Self { zeta: s.iter().map(|c| c * size).collect(), alpha })
    }

    pub fn exponent(&self) -> f64 {
        2.0 / (2.0 + self.alpha)
    }

    /// `½|q̇|² - Ũ(q)` at `t`.
    pub fn energy(&self, spec: &PotentialSpec, t: f64) -> f64 {
        let m = spec.metric();
        0.5 * m.norm_sq(&self.velocity(t)) - spec.potential().limit_value(0.0, &self.point(t))
    }

    /// The blow-up sampled on `grid` as a [`Path`].
    pub fn to_path(&self, metric: &MassMetric, grid: Vec<f64>) -> Result<Path> {
        Path::from_fn(metric.clone(), grid, |t| self.point(t))
    }
}

/// A continuous base path for action differentials.
pub trait BasePath: Sync {
    /// Time interval covered.
    fn domain(&self) -> (f64, f64);
    fn point(&self, t: f64) -> Vec<f64>;
    fn velocity(&self, t: f64) -> Vec<f64>;

    /// `x(anchor + off) - x(anchor)`.
    fn step(&self, anchor: f64, off: f64) -> Vec<f64> {
        self.point(anchor + off).iter().zip(self.point(anchor)).map(|(a, b)| a - b).collect()
    }
}

impl BasePath for BlowUp {
    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn point(&self, t: f64) -> Vec<f64> {
        let s = t.max(0.0).powf(self.exponent());
        self.zeta.iter().map(|z| z * s).collect()
    }
    fn velocity(&self, t: f64) -> Vec<f64> {
        let p = self.exponent();
        let s = p * t.powf(p - 1.0);
        self.zeta.iter().map(|z| z * s).collect()
    }
    fn step(&self, anchor: f64, off: f64) -> Vec<f64> {
        let p = self.exponent();
        let f = if anchor > 0.0 { anchor.powf(p) * rel_power_step(p, anchor, off) } else { off.max(0.0).powf(p) };
        self.zeta.iter().map(|z| z * f).collect()
    }
}

/// Cubic Hermite interpolation of integrator samples, with time measured
/// from a collision instant `t*` (so the samples end at `-gap`).
#[derive(Debug, Clone)]
pub struct SampledPath {
    times: Vec<f64>,
    x: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl SampledPath {
    /// Samples of `solution` in the time frame centred at the collision,
    /// `gap` past the last sample.
    pub fn from_solution(solution: &OdeSolution, gap: f64) -> Result<Self> {
        let n = solution.len();
        if n < 2 {
            return Err(Error::InvalidInput("need at least two samples".into()));
        }
        let last = solution.remaining[n - 1];
        let mut times = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for j in 0..n {
            let t = -(solution.remaining[j] - last) - gap;
            if times.last().is_some_and(|p: &f64| t <= *p) {
                continue;
            }
            times.push(t);
            x.push(solution.x[j].clone());
            v.push(solution.v[j].clone());
        }
        Ok(Self { times, x, v })
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let j = self.times.partition_point(|s| *s <= t).clamp(1, self.times.len() - 1) - 1;
        let h = self.times[j + 1] - self.times[j];
        (j, h, ((t - self.times[j]) / h).clamp(0.0, 1.0))
    }
}

impl BasePath for SampledPath {
    fn domain(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }
    fn point(&self, t: f64) -> Vec<f64> {
        let (j, h, s) = self.locate(t);
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s).powi(2),
            s * (1.0 - s).powi(2),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        (0..self.x[j].len())
            .map(|k| h00 * self.x[j][k] + h * h10 * self.v[j][k] + h01 * self.x[j + 1][k] + h * h11 * self.v[j + 1][k])
            .collect()
    }
    fn velocity(&self, t: f64) -> Vec<f64> {
        let (j, h, s) = self.locate(t);
        let (d00, d10, d01, d11) = (6.0 * s * s - 6.0 * s, 3.0 * s * s - 4.0 * s + 1.0, -6.0 * s * s + 6.0 * s, 3.0 * s * s - 2.0 * s);
        (0..self.x[j].len())
            .map(|k| d00 * self.x[j][k] / h + d10 * self.v[j][k] + d01 * self.x[j + 1][k] / h + d11 * self.v[j + 1][k])
            .collect()
    }
}

/// Plateau-and-ramp displacement `v^δ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StandardVariation {
    pub delta: Vec<f64>,
    /// Support half-width `T`.
    pub half_width: f64,
    /// Centre of the support (the collision instant).
    pub centre: f64,
    norm: f64,
}

impl StandardVariation {
    pub fn new(metric: &MassMetric, delta: Vec<f64>, half_width: f64, centre: f64) -> Result<Self> {
        let norm = metric.norm(&delta);
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("δ must be nonzero".into()));
        }
        if !(norm < half_width) {
            return Err(Error::InvalidInput(format!("|δ| = {norm} must be below T = {half_width}")));
        }
        Ok(Self { delta, half_width, centre, norm })
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Scalar profile: `v^δ(t) = profile(t) δ/|δ|`.
    pub fn profile(&self, t: f64) -> f64 {
        let s = (t - self.centre).abs();
        if s <= self.half_width - self.norm {
            self.norm
        } else if s <= self.half_width {
            self.half_width - s
        } else {
            0.0
        }
    }

    pub fn displacement(&self, t: f64) -> Vec<f64> {
        let f = self.profile(t) / self.norm;
        self.delta.iter().map(|d| d * f).collect()
    }

    pub fn breakpoints(&self) -> [f64; 4] {
        let (c, t, r) = (self.centre, self.half_width, self.half_width - self.norm);
        [c - t, c - r, c + r, c + t]
    }
}

/// `base + v^δ` on the base grid refined with the variation's breakpoints.
pub fn standard_variation_path(base: &Path, var: &StandardVariation) -> Result<Path> {
    let refined = base.refined_with(&var.breakpoints())?;
    let points = refined
        .grid()
        .iter()
        .zip(refined.points())
        .map(|(&t, x)| x.iter().zip(var.displacement(t)).map(|(a, b)| a + b).collect())
        .collect();
    Path::new(base.metric().clone(), refined.grid().to_vec(), points)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActionDifferential {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// `ΔA^δ` for `base + v^δ` against `base`, over the part of the variation's
/// support inside the base domain.
pub fn action_differential(base: &dyn BasePath, spec: &PotentialSpec, var: &StandardVariation) -> Result<ActionDifferential> {
    let m = spec.metric();
    let (d0, d1) = base.domain();
    let lo = d0.max(var.centre - var.half_width);
    let hi = d1.min(var.centre + var.half_width);
    if !(hi > lo) {
        return Ok(ActionDifferential { kinetic: 0.0, potential: 0.0, total: 0.0 });
    }
    let unit: Vec<f64> = var.delta.iter().map(|d| d / var.norm).collect();
    // kinetic part lives on the ramps, where v̇ = ∓δ/|δ|
    let mut kinetic = 0.0;
    let r = var.half_width - var.norm;
    for (a, b, sign) in [(var.centre - var.half_width, var.centre - r, 1.0), (var.centre + r, var.centre + var.half_width, -1.0)] {
        let (a, b) = (a.max(lo), b.min(hi));
        if b > a {
            let dx: Vec<f64> = base.point(b).iter().zip(base.point(a)).map(|(p, q)| p - q).collect();
            kinetic += sign * m.dot(&unit, &dx) + 0.5 * (b - a);
        }
    }
    let pot = spec.potential();
    let scale = m.norm(&base.point(hi)).max(m.norm(&base.point(lo)));
    let du = |anchor: f64, off: f64| -> f64 {
        let t = anchor + off;
        let x = base.point(t);
        if m.norm(&x) < 1e-150 * scale {
            // below resolution next to the collision; the quadrature weight there is negligible
            return 0.0;
        }
        let h = var.displacement(t);
        let value = |y: &[f64]| if spec.singular_distance(y) <= 0.0 { f64::INFINITY } else { pot.value(t, y) };
        let dist = spec.singular_distance(&x);
        if m.norm(&h) <= 1e-3 * dist {
            increment(
                value,
                |y, d| {
                    let mut g = vec![0.0; y.len()];
                    pot.partial_x(t, y, &mut g);
                    g.iter().zip(d).map(|(a, b)| a * b).sum()
                },
                m,
                dist,
                &x,
                &h,
            )
        } else {
            // displaced point relative to the anchor, exact near a close approach
            let ya = axpy(1.0, &base.point(anchor), &var.displacement(anchor));
            let dv = var.profile(t) - var.profile(anchor);
            let y: Vec<f64> = ya.iter().zip(base.step(anchor, off)).zip(&unit).map(|((a, b), u)| a + b + dv * u).collect();
            value(&y) - value(&x)
        }
    };
    let mut pts: Vec<f64> = var.breakpoints().to_vec();
    pts.push(var.centre);
    if let Some(tc) = closest_approach(base, spec, var, lo, hi) {
        if spec.singular_distance(&axpy(1.0, &base.point(tc), &var.displacement(tc))) <= 0.0 {
            return Ok(ActionDifferential { kinetic, potential: f64::INFINITY, total: f64::INFINITY });
        }
        pts.push(tc);
    }
    split_points(&mut pts, lo, hi);
    let potential = integrate_pieces(du, &pts, Tolerance::new(1e-15, 1e-10))?;
    Ok(ActionDifferential { kinetic, potential, total: kinetic + potential })
}

/// Time where the displaced path comes closest to the singular set.
fn closest_approach(base: &dyn BasePath, spec: &PotentialSpec, var: &StandardVariation, lo: f64, hi: f64) -> Option<f64> {
    let dist = |t: f64| spec.singular_distance(&axpy(1.0, &base.point(t), &var.displacement(t)));
    let c = var.centre.clamp(lo, hi);
    let span = (hi - lo).max(1e-300);
    let mut ts: Vec<f64> = Vec::new();
    for k in 0..=400 {
        let off = span * 10f64.powf(-14.0 + 14.0 * k as f64 / 400.0);
        for t in [c - off, c + off] {
            if t > lo && t < hi {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    if ts.len() < 3 {
        return None;
    }
    let j = (0..ts.len()).min_by(|a, b| dist(ts[*a]).total_cmp(&dist(ts[*b])))?;
    let (mut a, mut b) = (ts[j.saturating_sub(1)], ts[(j + 1).min(ts.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if dist(x1) < dist(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    Some(0.5 * (a + b))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircleActionAverage {
    pub radius: f64,
    pub mean: ActionDifferential,
    pub nodes: usize,
}

/// Mean of `ΔA^δ` over `δ` on the circle of radius `radius` in `plane`.
pub fn circle_average_action(
    base: &dyn BasePath,
    spec: &PotentialSpec,
    plane: &Subspace,
    radius: f64,
    half_width: f64,
    centre: f64,
    n_nodes: usize,
) -> Result<CircleActionAverage> {
    let circle = Circle::new(plane)?;
    let m = spec.metric();
    let var_at = |theta: f64| StandardVariation::new(m, circle.point(radius, theta), half_width, centre);
    let (d0, d1) = base.domain();
    let (lo, hi) = (d0.max(centre - half_width), d1.min(centre + half_width));
    let badness = |theta: f64| -> f64 {
        let Ok(v) = var_at(theta) else { return f64::INFINITY };
        match closest_approach(base, spec, &v, lo, hi) {
            Some(t) => spec.singular_distance(&axpy(1.0, &base.point(t), &v.displacement(t))),
            None => f64::INFINITY,
        }
    };
    let centre_angle = worst_angle(badness);
    let parts = |theta: f64| -> ActionDifferential {
        var_at(theta)
            .and_then(|v| action_differential(base, spec, &v))
            .unwrap_or(ActionDifferential { kinetic: f64::NAN, potential: f64::NAN, total: f64::NAN })
    };
    let (kin, nodes) = circle_mean_doubling(|th| parts(th).kinetic, centre_angle, n_nodes.max(8) / 2, 1e-6, 1 << 12)?;
    let (pot, _) = circle_mean_doubling(|th| parts(th).potential, centre_angle, n_nodes.max(8) / 2, 1e-6, 1 << 12)?;
    Ok(CircleActionAverage { radius, mean: ActionDifferential { kinetic: kin, potential: pot, total: kin + pot }, nodes })
}

/// `(1/2π)∫_0^{2π} log(y + 2z cos ϑ) dϑ = log((y + √(y² - 4z²))/2)` for `y ≥ 2z`.
pub fn log_mean_value(y: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !(y >= 2.0 * z) {
        return Err(Error::DomainError(format!("need z > 0 and y ≥ 2z, got y = {y}, z = {z}")));
    }
    let root = ((y - 2.0 * z) * (y + 2.0 * z)).sqrt();
    Ok((0.5 * (y + root)).ln())
}

/// Quadrature value of the left side of [`log_mean_value`].
pub fn log_mean_value_quadrature(y: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !(y >= 2.0 * z) {
        return Err(Error::DomainError(format!("need z > 0 and y ≥ 2z, got y = {y}, z = {z}")));
    }
    // about ϑ = π: y + 2z cos ϑ = (y - 2z) + 4z sin²(φ/2)
    let f = |phi: f64| {
        let s = (0.5 * phi).sin();
        ((y - 2.0 * z) + 4.0 * z * s * s).ln()
    };
    circle_mean_converged(f)
}

/// `(1/2πz)∫_{|δ|=z} log|x + δ|² dδ = max(log|x|², log z²)`.
pub fn circle_average_log(x: [f64; 2], z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::DomainError(format!("radius must be positive, got {z}")));
    }
    let r2 = x[0] * x[0] + x[1] * x[1];
    Ok(r2.ln().max((z * z).ln()))
}

/// Quadrature value of the left side of [`circle_average_log`].
pub fn circle_average_log_quadrature(x: [f64; 2], z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::DomainError(format!("radius must be positive, got {z}")));
    }
    let r = x[0].hypot(x[1]);
    // about the direction of -x: |x + δ|² = (r - z)² + 4rz sin²(φ/2)
    let f = |phi: f64| {
        let s = (0.5 * phi).sin();
        ((r - z) * (r - z) + 4.0 * r * z * s * s).ln()
    };
    circle_mean_converged(f)
}

fn circle_mean_converged(f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut n = 64;
    let mut prev = circle_mean_clustered(&f, n);
    while n < 1 << 16 {
        n *= 2;
        let cur = circle_mean_clustered(&f, n);
        if (cur - prev).abs() <= 1e-14 * (1.0 + cur.abs()) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureFailure(format!("circle mean not converged: {prev}")))
}

/// Least-squares fit `y/|δ| ≈ a + c √(-log|δ|)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogFit {
    pub a: f64,
    pub c: f64,
}

pub fn fit_log_bound(radii: &[f64], values: &[f64]) -> Result<LogFit> {
    if radii.len() < 2 || radii.len() != values.len() {
        return Err(Error::InvalidInput("fit needs at least two radii".into()));
    }
    let xs: Vec<f64> = radii.iter().map(|r| (-r.ln()).sqrt()).collect();
    let ys: Vec<f64> = radii.iter().zip(values).map(|(r, v)| v / r).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("radii must differ".into()));
    }
    let c = sxy / sxx;
    Ok(LogFit { a: my - c * mx, c })
}

/// Slope of `log|y|` against `log|δ|`.
pub fn power_exponent(radii: &[f64], values: &[f64]) -> f64 {
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogActionReport {
    pub radii: Vec<f64>,
    pub averages: Vec<CircleActionAverage>,
    /// Fit of the total average.
    pub fit: LogFit,
    /// Fit of the potential part alone.
    pub potential_fit: LogFit,
    pub potential_negative: bool,
    /// Exponent of `|δ|` in the kinetic part of the average.
    pub kinetic_exponent: f64,
}

/// Circle-averaged `ΔA^δ` of a logarithmic collision path at each radius,
/// with the fit `a|δ| + c|δ|√(-log|δ|)`.
pub fn averaged_log_action_bound(
    base: &dyn BasePath,
    spec: &PotentialSpec,
    plane: &Subspace,
    radii: &[f64],
    half_width: f64,
    centre: f64,
) -> Result<LogActionReport> {
    let averages = radii
        .iter()
        .map(|&r| circle_average_action(base, spec, plane, r, half_width, centre, 64))
        .collect::<Result<Vec<_>>>()?;
    let total: Vec<f64> = averages.iter().map(|a| a.mean.total).collect();
    let pot: Vec<f64> = averages.iter().map(|a| a.mean.potential).collect();
    let kin: Vec<f64> = averages.iter().map(|a| a.mean.kinetic).collect();
    Ok(LogActionReport {
        radii: radii.to_vec(),
        fit: fit_log_bound(radii, &total)?,
        potential_fit: fit_log_bound(radii, &pot)?,
        potential_negative: pot.iter().all(|p| *p < 0.0),
        kinetic_exponent: power_exponent(radii, &kin),
        averages,
    })
}

/// Everything the averaging experiment reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationReport {
    pub alpha: f64,
    pub phi_values: Vec<(f64, f64)>,
    pub average_phi: f64,
    pub average_phi_check: f64,
    pub s_samples: Vec<(f64, f64)>,
    pub circle_average: f64,
    pub delta_grid: Vec<f64>,
    pub action_differentials: Vec<f64>,
    pub s_prediction: f64,
    pub delta_exponent: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    AverageNegative,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AveragingSettings {
    /// Number of `ϑ` samples of `Φ_α` in `(0, π]`.
    pub phi_samples: usize,
    /// Radii `|δ|` of the circle-averaged action differentials.
    pub delta_grid: Vec<f64>,
    /// Half-width `T` of the standard variation.
    pub half_width: f64,
    pub n_nodes: usize,
}

impl Default for AveragingSettings {
    fn default() -> Self {
        Self { phi_samples: 16, delta_grid: vec![1e-2, 1e-3, 1e-4], half_width: 1.0, n_nodes: 64 }
    }
}

/// The averaging pipeline on the planar one-center blow-up `ζ t^{2/(2+α)}`.
///
/// `circle_average` is the mean of `S(ζ, ·)` on the unit circle, so
/// `action_differentials[k] / |δ_k|^{1-α/2}` should approach it;
/// `s_prediction` is that scaling evaluated at the smallest radius.
pub fn variation_report(alpha: f64, settings: &AveragingSettings) -> Result<VariationReport> {
    if settings.delta_grid.is_empty() || settings.delta_grid.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidInput("delta_grid needs positive radii".into()));
    }
    let n = settings.phi_samples.max(1);
    let phi_values = (1..=n)
        .into_par_iter()
        .map(|k| {
            let th = PI * k as f64 / n as f64;
            phi_alpha(alpha, th).map(|v| (th, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let average = average_phi(alpha, AverageScheme::Series)?;
    let check = average_phi(alpha, AverageScheme::Double)?;
    let spec = PotentialSpec::new(std::sync::Arc::new(crate::potentials::CentralPower::kepler_like(2, alpha)?));
    let blow = BlowUp::parabolic(&spec, &[1.0, 0.0])?;
    let plane = Subspace::full(spec.metric());
    let s_samples = phi_values
        .par_iter()
        .map(|&(th, _)| displacement_potential(&spec, &blow.zeta, &[-th.cos(), -th.sin()]).map(|v| (th, v)))
        .collect::<Result<Vec<_>>>()?;
    let circle_average = averaged_s_on_circle(&spec, &blow.zeta, &plane, settings.n_nodes)?.mean;
    let r_min = settings.delta_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_prediction = circle_average * r_min.powf(1.0 - alpha / 2.0);
    let action_differentials = settings
        .delta_grid
        .iter()
        .map(|&r| {
            circle_average_action(&blow, &spec, &plane, r, settings.half_width, 0.0, settings.n_nodes)
                .map(|a| a.mean.total)
        })
        .collect::<Result<Vec<_>>>()?;
    let delta_exponent = if settings.delta_grid.len() > 1 {
        power_exponent(&settings.delta_grid, &action_differentials)
    } else {
        f64::NAN
    };
    let negative = average < 0.0 && check < 0.0 && action_differentials.iter().all(|v| *v < 0.0);
    Ok(VariationReport {
        alpha,
        phi_values,
        average_phi: average,
        average_phi_check: check,
        s_samples,
        circle_average,
        delta_grid: settings.delta_grid.clone(),
        action_differentials,
        s_prediction,
        delta_exponent,
        verdict: if negative { Verdict::AverageNegative } else { Verdict::Inconclusive },
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::potentials::CentralPower;
    use crate::quadrature::GaussKronrod;

    fn kepler() -> PotentialSpec {
        PotentialSpec::new(Arc::new(CentralPower::kepler_like(2, 1.0).unwrap()))
    }

    #[test]
    fn phi_one_at_pi() {
        let v = phi_alpha(1.0, PI).unwrap();
        assert!((v + 1.5 * PI).abs() < 1e-10, "{v}");
        assert_eq!(phi_alpha(1.0, 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn phi_schemes_agree() {
        let a = phi_alpha(1.0, PI / 2.0).unwrap();
        let b = phi_alpha_with(1.0, PI / 2.0, &GaussKronrod::default()).unwrap();
        assert!(a < 0.0);
        assert!((a - b).abs() < 1e-9, "{a} {b}");
    }

    #[test]
    fn average_schemes_agree() {
        for alpha in [0.5, 1.0, 1.5] {
            let a = average_phi(alpha, AverageScheme::Series).unwrap();
            let b = average_phi(alpha, AverageScheme::Double).unwrap();
            assert!(a < 0.0 && (a - b).abs() < 1e-6, "α={alpha}: {a} {b}");
        }
    }

    #[test]
    fn s_matches_phi_for_isotropic() {
        let spec = kepler();
        let s = displacement_potential(&spec, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((s + 1.5 * PI).abs() < 1e-9, "{s}");
        assert_eq!(displacement_potential(&spec, &[1.0, 0.0], &[-1.0, 0.0]).unwrap(), f64::INFINITY);
        let th = 2.0f64;
        let s = displacement_potential(&spec, &[2.0, 0.0], &[-th.cos(), -th.sin()]).unwrap();
        let expect = 2f64.powf(-1.5) * phi_alpha(1.0, th).unwrap();
        assert!((s - expect).abs() < 1e-9 * expect.abs(), "{s} {expect}");
    }

    #[test]
    fn circle_average_of_s() {
        let spec = kepler();
        let plane = Subspace::full(spec.metric());
        let avg = averaged_s_on_circle(&spec, &[1.3, 0.4], &plane, 64).unwrap();
        let zeta_norm = 1.3f64.hypot(0.4);
        let expect = zeta_norm.powf(-1.5) * average_phi(1.0, AverageScheme::Series).unwrap();
        assert!((avg.mean - expect).abs() < 1e-7, "{} {expect}", avg.mean);
        assert!(avg.min_value < 0.0);
    }

    #[test]
    fn mean_value_identities() {
        assert!(log_mean_value(2.0, 1.0).unwrap().abs() < 1e-15);
        let v = log_mean_value(5.0, 1.0).unwrap();
        assert!((v - ((5.0 + 21f64.sqrt()) / 2.0).ln()).abs() < 1e-15);
        assert!((log_mean_value_quadrature(5.0, 1.0).unwrap() - v).abs() < 1e-12);
        assert!((log_mean_value_quadrature(2.0, 1.0).unwrap()).abs() < 1e-10);
        assert!((circle_average_log([2.0, 0.0], 1.0).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!((circle_average_log_quadrature([0.3, 0.4], 1.0).unwrap()).abs() < 1e-12);
        assert!(log_mean_value(1.0, 1.0).is_err());
    }

    #[test]
    fn standard_variation_shape() {
        let m = MassMetric::unit(1, 2);
        let var = StandardVariation::new(&m, vec![0.03, 0.04], 1.0, 0.0).unwrap();
        assert_eq!(var.displacement(0.0), vec![0.03, 0.04]);
        assert!(var.displacement(1.0).iter().all(|v| *v == 0.0));
        let slope = (var.profile(0.97) - var.profile(0.99)) / 0.02;
        assert!((slope - 1.0).abs() < 1e-12);
        let base = Path::linear(m.clone(), Path::uniform_grid(-2.0, 2.0, 8), &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let p = standard_variation_path(&base, &var).unwrap();
        assert!(p.grid().contains(&0.95) && p.grid().contains(&1.0));
    }

    #[test]
    fn blowup_is_parabolic() {
        let spec = kepler();
        let b = BlowUp::parabolic(&spec, &[0.0, 1.0]).unwrap();
        assert!((spec.metric().norm(&b.zeta) - 4.5f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!(b.energy(&spec, 0.37).abs() < 1e-12);
    }

    #[test]
    fn action_differential_scales_like_s() {
        let spec = kepler();
        let b = BlowUp::parabolic(&spec, &[1.0, 0.0]).unwrap();
        let s = displacement_potential(&spec, &b.zeta, &[1.0, 0.0]).unwrap();
        let var = StandardVariation::new(spec.metric(), vec![1e-4, 0.0], 1.0, 0.0).unwrap();
        let d = action_differential(&b, &spec, &var).unwrap();
        assert!(d.total < 0.0);
        assert!((d.total / 1e-2 / s - 1.0).abs() < 0.05, "{} {s}", d.total / 1e-2);
    }
}
