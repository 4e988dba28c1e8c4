use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{tangential, Constants, PotentialSpec, Scaling};
use crate::subspace::Subspace;

/// Random configurations off the collision set.
///
/// Directions are uniform on the inertia ellipsoid, radii log-uniform in
/// `[r_min, r_max]`, times drawn from `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampler {
    pub seed: u64,
    pub count: usize,
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// Directions closer than this to the collision set are redrawn.
    #[serde(default = "default_direction_floor")]
    pub direction_floor: f64,
}

fn default_times() -> Vec<f64> {
    vec![0.0]
}

fn default_direction_floor() -> f64 {
    1e-2
}

impl Default for Sampler {
    fn default() -> Self {
        Self { seed: 0, count: 200, r_min: 1e-4, r_max: 1.0, times: default_times(), direction_floor: 1e-2 }
    }
}

impl Sampler {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn time<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.times.is_empty() {
            0.0
        } else {
            self.times[rng.random_range(0..self.times.len())]
        }
    }

    fn direction<R: Rng>(&self, spec: &PotentialSpec, rng: &mut R) -> Vec<f64> {
        let metric = spec.metric();
        for _ in 0..10_000 {
            let s = metric.random_unit(rng);
            if spec.singular_distance(&s) > self.direction_floor {
                return s;
            }
        }
        metric.random_unit(rng)
    }

    /// Unit directions with a time each.
    pub fn directions(&self, spec: &PotentialSpec) -> Vec<(f64, Vec<f64>)> {
        let mut rng = self.rng(1);
        (0..self.count)
            .map(|_| {
                let t = self.time(&mut rng);
                (t, self.direction(spec, &mut rng))
            })
            .collect()
    }

    /// Configurations `r s` with log-uniform radii.
    pub fn points(&self, spec: &PotentialSpec) -> Vec<(f64, Vec<f64>)> {
        let mut rng = self.rng(2);
        let (lo, hi) = (self.r_min.ln(), self.r_max.ln());
        (0..self.count)
            .map(|_| {
                let t = self.time(&mut rng);
                let s = self.direction(spec, &mut rng);
                let r = (lo + (hi - lo) * rng.random::<f64>()).exp();
                (t, s.into_iter().map(|v| v * r).collect())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckSettings {
    pub sampler: Sampler,
    /// Spanning vectors of the plane `W` for (U6)/(U7).
    #[serde(default)]
    pub w_plane: Option<[Vec<f64>; 2]>,
}

/// Outcome of one assumption check. `worst_margin` is the smallest
/// slack found; negative means violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub samples: usize,
    pub detail: String,
}

impl AssumptionEntry {
    fn new(name: &str, passed: bool, worst_margin: f64, samples: usize, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, worst_margin, samples, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub kind: String,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> Vec<&AssumptionEntry> {
        self.entries.iter().filter(|e| !e.passed).collect()
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Constants estimated from samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    /// `max |∂U/∂t| / (U + 1)`; zero for time-independent kinds.
    pub c1: f64,
    pub gamma: f64,
    pub c2: f64,
    pub samples: usize,
}

impl FittedConstants {
    pub fn apply(&self, base: Constants) -> Constants {
        Constants { c1: Some(self.c1), c2: self.c2, gamma: self.gamma, alpha_tilde: base.alpha_tilde }
    }
}

const RADII: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn aitken(a: [f64; 3]) -> f64 {
    let d1 = a[1] - a[0];
    let d2 = a[2] - a[1];
    let den = d2 - d1;
    if den.abs() <= 1e-300 || !den.is_finite() {
        a[2]
    } else {
        a[2] - d2 * d2 / den
    }
}

fn scaled(x: &[f64], c: f64) -> Vec<f64> {
    x.iter().map(|v| v * c).collect()
}

fn unit(metric: &crate::metric::MassMetric, x: Vec<f64>) -> Option<Vec<f64>> {
    let n = metric.norm(&x);
    (n > 1e-12).then(|| scaled(&x, 1.0 / n))
}

impl PotentialSpec {
    fn raw_value(&self, t: f64, x: &[f64]) -> Option<f64> {
        if self.is_singular(x) {
            None
        } else {
            Some(self.potential().value(t, x))
        }
    }

    /// `∇U·x` in the mass metric, i.e. `Σ_k x_k ∂U/∂x_k`.
    fn radial_derivative(&self, t: f64, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.potential().partial_x(t, x, &mut g);
        g.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn limit_or_inf(&self, t: f64, x: &[f64]) -> f64 {
        if self.is_singular(x) {
            f64::INFINITY
        } else {
            self.potential().limit_value(t, x)
        }
    }

    /// Sampled verification of the structural assumptions.
    pub fn check_assumptions(&self, settings: &CheckSettings) -> AssumptionReport {
        let mut report = AssumptionReport { kind: self.potential().kind().to_string(), entries: Vec::new() };
        let scaling = self.scaling();
        if scaling == Scaling::Free {
            report.entries.push(self.check_u1(&settings.sampler));
            return report;
        }
        report.entries.push(self.check_u0(&settings.sampler));
        report.entries.push(self.check_u1(&settings.sampler));
        report.entries.push(self.check_u2(&settings.sampler));
        report.entries.push(self.check_u2_local(&settings.sampler));
        report.entries.push(self.check_u3(&settings.sampler));
        report.entries.push(self.check_u4(&settings.sampler));
        report.entries.push(self.check_u5(&settings.sampler));
        if let Some(plane) = &settings.w_plane {
            match Subspace::from_spanning(self.metric(), plane) {
                Ok(w) if w.dim() == 2 => {
                    report.entries.push(self.check_u6(&settings.sampler, &w));
                    report.entries.push(if scaling.is_log() {
                        self.check_u7_log(&settings.sampler, &w)
                    } else {
                        self.check_u7_homogeneous(&settings.sampler, &w)
                    });
                }
                _ => report.entries.push(AssumptionEntry::new(
                    "U6",
                    false,
                    f64::NEG_INFINITY,
                    0,
                    "w_plane does not span a 2-plane",
                )),
            }
        }
        report
    }

    fn check_u0(&self, sampler: &Sampler) -> AssumptionEntry {
        let Some(subs) = self.potential().singular_subspaces() else {
            return AssumptionEntry::new("U0", true, 0.0, 0, "singular set not given as subspaces; skipped");
        };
        let metric = self.metric();
        let mut rng = sampler.rng(3);
        let mut worst = f64::INFINITY;
        let mut count = 0;
        let eps = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
        for v in &subs {
            for _ in 0..sampler.count.clamp(1, 20) {
                let t = sampler.time(&mut rng);
                let xi = unit(metric, v.project(&metric.random_unit(&mut rng))).unwrap_or_else(|| vec![0.0; metric.size()]);
                let Some(dir) = unit(metric, v.complement(&metric.random_unit(&mut rng))) else { continue };
                let base = dir.iter().zip(&xi).map(|(d, p)| *p + 1e-1 * d).collect::<Vec<_>>();
                if self.singular_distance(&base) < 1e-3 {
                    continue;
                }
                let mut prev = f64::NEG_INFINITY;
                for e in eps {
                    let x: Vec<f64> = xi.iter().zip(&dir).map(|(p, d)| p + e * d).collect();
                    let u = self.potential().value(t, &x);
                    let step = if prev.is_finite() { (u - prev) / prev.abs().max(1.0) } else { 1.0 };
                    worst = worst.min(step);
                    prev = u;
                }
                count += 1;
            }
        }
        let passed = worst > 0.0;
        AssumptionEntry::new("U0", passed, worst, count, "U increases monotonically along rays into the collision set")
    }

    fn check_u1(&self, sampler: &Sampler) -> AssumptionEntry {
        if !self.potential().is_time_dependent() {
            return AssumptionEntry::new("U1", true, f64::INFINITY, 0, "time independent");
        }
        let mut worst_ratio: f64 = 0.0;
        let pts = sampler.points(self);
        for (t, x) in &pts {
            if let Some(u) = self.raw_value(*t, x) {
                let dt = self.potential().partial_t(*t, x);
                worst_ratio = worst_ratio.max(dt.abs() / (u + 1.0).abs());
            }
        }
        match self.constants.c1 {
            Some(c1) => AssumptionEntry::new(
                "U1",
                worst_ratio <= c1 * (1.0 + 1e-12),
                c1 - worst_ratio,
                pts.len(),
                format!("max |dU/dt|/(U+1) = {worst_ratio:.6e}, C1 = {c1}"),
            ),
            None => AssumptionEntry::new(
                "U1",
                true,
                f64::INFINITY,
                pts.len(),
                format!("C1 unset; sampled max ratio {worst_ratio:.6e}"),
            ),
        }
    }

    fn check_u2(&self, sampler: &Sampler) -> AssumptionEntry {
        let at = self.alpha_tilde();
        let c2 = self.constants.c2;
        let mut worst = f64::INFINITY;
        let pts = sampler.points(self);
        for (t, x) in &pts {
            if let Some(u) = self.raw_value(*t, x) {
                let m = self.radial_derivative(*t, x) + at * u + c2;
                worst = worst.min(m + 1e-10 * (1.0 + u.abs()));
            }
        }
        AssumptionEntry::new("U2", worst >= 0.0, worst, pts.len(), format!("alpha_tilde = {at}, C2 = {c2}"))
    }

    fn check_u2_local(&self, sampler: &Sampler) -> AssumptionEntry {
        let metric = self.metric();
        let Constants { c2, gamma, .. } = self.constants;
        let log = self.scaling().is_log();
        let name = if log { "U2l" } else { "U2h" };
        let alpha = self.alpha().unwrap_or(0.0);
        let mut worst = f64::INFINITY;
        let pts = sampler.points(self);
        for (t, x) in &pts {
            if let Some(u) = self.raw_value(*t, x) {
                let r = metric.norm(x);
                let du = self.radial_derivative(*t, x);
                let lead = if log { self.log_coefficient(*t) } else { alpha * u };
                let m = du + lead + c2 * r.powf(gamma) * u;
                let tol = 1e-10 * (du.abs() + lead.abs() + 1e-300);
                worst = worst.min(if m.abs() <= tol { 0.0 } else { m });
            }
        }
        AssumptionEntry::new(name, worst >= 0.0, worst, pts.len(), format!("C2 = {c2}, gamma = {gamma}"))
    }

    fn check_u3(&self, sampler: &Sampler) -> AssumptionEntry {
        let log = self.scaling().is_log();
        let name = if log { "U3l" } else { "U3h" };
        let alpha = self.alpha().unwrap_or(0.0);
        let mut worst = f64::INFINITY;
        let mut worst_err: f64 = 0.0;
        let dirs = sampler.directions(self);
        for (t, s) in &dirs {
            let limit = self.potential().limit_value(*t, s);
            let m = self.log_coefficient(*t);
            let seq = RADII.map(|r| {
                let u = self.potential().value(*t, &scaled(s, r));
                if log {
                    u + m * r.ln()
                } else {
                    r.powf(alpha) * u
                }
            });
            let extrap = (aitken(seq) - limit).abs();
            let raw = (seq[2] - limit).abs();
            let ok = extrap <= 1e-6 * (1.0 + limit.abs()) || raw <= 1e-8 * (1.0 + limit.abs());
            worst_err = worst_err.max(extrap.min(raw));
            worst = worst.min(if ok { 0.0 } else { -extrap.min(raw) });
        }
        AssumptionEntry::new(
            name,
            worst >= 0.0,
            worst,
            dirs.len(),
            format!("largest extrapolated error {worst_err:.3e}"),
        )
    }

    fn check_u4(&self, sampler: &Sampler) -> AssumptionEntry {
        let log = self.scaling().is_log();
        let name = if log { "U4l" } else { "U4h" };
        let alpha = self.alpha().unwrap_or(0.0);
        let metric = self.metric();
        let mut worst = f64::INFINITY;
        let mut last_err: f64 = 0.0;
        let dirs = sampler.directions(self);
        for (t, s) in &dirs {
            let Ok(target) = self.limit_tangential_gradient(*t, s) else { continue };
            let scale = 1.0 + metric.norm(&target);
            let mut prev = f64::INFINITY;
            let mut ok = true;
            let mut err = 0.0;
            for r in RADII {
                let x = scaled(s, r);
                let mut g = vec![0.0; x.len()];
                self.potential().partial_x(*t, &x, &mut g);
                metric.raise(&mut g);
                let gt = tangential(metric, &g, &x);
                let f = if log { r } else { r.powf(alpha + 1.0) };
                let diff: Vec<f64> = gt.iter().zip(&target).map(|(a, b)| f * a - b).collect();
                err = metric.norm(&diff);
                if err > prev + 1e-9 * scale {
                    ok = false;
                }
                prev = err;
            }
            last_err = last_err.max(err);
            worst = worst.min(if ok { -err / scale } else { f64::NEG_INFINITY });
        }
        let passed = worst > f64::NEG_INFINITY;
        AssumptionEntry::new(
            name,
            passed,
            worst,
            dirs.len(),
            format!("tangential differences nonincreasing; last difference {last_err:.3e}"),
        )
    }

    fn check_u5(&self, sampler: &Sampler) -> AssumptionEntry {
        let Some(subs) = self.potential().singular_subspaces() else {
            return AssumptionEntry::new("U5", true, 0.0, 0, "singular set not given as subspaces; skipped");
        };
        let metric = self.metric();
        let maximal: Vec<&Subspace> = subs
            .iter()
            .filter(|v| !subs.iter().any(|w| w.dim() > v.dim() && v.is_subset_of(w, 1e-10)))
            .collect();
        let mut rng = sampler.rng(5);
        let mut worst = f64::INFINITY;
        let mut count = 0;
        for v in maximal {
            let Some(part) = self.potential().cluster_part(v) else {
                return AssumptionEntry::new(
                    "U5",
                    false,
                    f64::NEG_INFINITY,
                    count,
                    format!("no cluster decomposition for a subspace of dimension {}", v.dim()),
                );
            };
            for _ in 0..sampler.count.clamp(1, 10) {
                let t = sampler.time(&mut rng);
                let xi = unit(metric, v.project(&metric.random_unit(&mut rng))).unwrap_or_else(|| vec![0.0; metric.size()]);
                let Some(dir) = unit(metric, v.complement(&metric.random_unit(&mut rng))) else { continue };
                let w_fn = |x: &[f64]| self.potential().value(t, x) - part.value(t, &v.complement(x));
                let grad_norm = |eps: f64| {
                    let x: Vec<f64> = xi.iter().zip(&dir).map(|(p, d)| p + eps * d).collect();
                    let h = 0.1 * eps;
                    let mut y = x.clone();
                    let mut acc = 0.0;
                    for k in 0..x.len() {
                        y[k] = x[k] + h;
                        let fp = w_fn(&y);
                        y[k] = x[k] - h;
                        let fm = w_fn(&y);
                        y[k] = x[k];
                        let d = (fp - fm) / (2.0 * h);
                        acc += d * d / metric.coord_mass(k);
                    }
                    acc.sqrt()
                };
                let g0 = grad_norm(1e-2);
                let g2 = grad_norm(1e-4);
                if !(g0.is_finite() && g2.is_finite()) {
                    worst = f64::NEG_INFINITY;
                    continue;
                }
                worst = worst.min(10.0 * g0 + 1.0 - g2);
                count += 1;
            }
        }
        AssumptionEntry::new(
            "U5",
            worst >= 0.0,
            worst,
            count,
            "gradient of U - U(w(x)) stays bounded approaching each maximal collision subspace",
        )
    }

    fn check_u6(&self, sampler: &Sampler, w: &Subspace) -> AssumptionEntry {
        let metric = self.metric();
        let (e1, e2) = (&w.basis()[0], &w.basis()[1]);
        let mut rng = sampler.rng(6);
        let mut worst: f64 = 0.0;
        let dirs = sampler.directions(self);
        for (t, x) in &dirs {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let (c1, c2) = (metric.dot(x, e1), metric.dot(x, e2));
            let (n1, n2) = (c1 * theta.cos() - c2 * theta.sin(), c1 * theta.sin() + c2 * theta.cos());
            let y: Vec<f64> = (0..x.len()).map(|k| x[k] + (n1 - c1) * e1[k] + (n2 - c2) * e2[k]).collect();
            let (a, b) = (self.limit_or_inf(*t, x), self.limit_or_inf(*t, &y));
            let rel = if a.is_finite() && b.is_finite() { (a - b).abs() / (a.abs() + b.abs()).max(1e-300) } else { 0.0 };
            worst = worst.max(rel);
        }
        AssumptionEntry::new(
            "U6",
            worst <= 1e-10,
            -worst,
            dirs.len(),
            format!("largest relative change under rotation in W {worst:.3e}"),
        )
    }

    fn check_u7_homogeneous(&self, sampler: &Sampler, w: &Subspace) -> AssumptionEntry {
        let alpha = self.alpha().unwrap_or(1.0);
        let metric = self.metric();
        let mut rng = sampler.rng(7);
        let mut worst = f64::INFINITY;
        let mut count = 0;
        for (t, x) in sampler.directions(self) {
            let pw = w.project(&x);
            if metric.norm(&pw) < 1e-6 {
                continue;
            }
            let (ux, upw) = (self.limit_or_inf(t, &x), self.limit_or_inf(t, &pw));
            if !(ux.is_finite() && upw.is_finite()) {
                continue;
            }
            let lambda = (upw / ux).powf(1.0 / alpha);
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let size = (rng.random::<f64>() * 4.0 - 2.0).exp();
            let delta: Vec<f64> = (0..x.len())
                .map(|k| size * (theta.cos() * w.basis()[0][k] + theta.sin() * w.basis()[1][k]))
                .collect();
            let lhs_x: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let rhs_x: Vec<f64> = pw.iter().zip(&delta).map(|(p, d)| lambda * p + d / lambda).collect();
            let (lhs, rhs) = (self.limit_or_inf(t, &lhs_x), self.limit_or_inf(t, &rhs_x));
            let margin = if rhs == f64::INFINITY {
                0.0
            } else if lhs == f64::INFINITY {
                f64::NEG_INFINITY
            } else {
                (rhs - lhs) / lhs.abs().max(rhs.abs())
            };
            worst = worst.min(if margin.abs() <= 1e-10 { 0.0 } else { margin });
            count += 1;
        }
        AssumptionEntry::new("U7h", worst >= 0.0, worst, count, "relative margin of the W-displacement inequality")
    }

    fn check_u7_log(&self, sampler: &Sampler, w: &Subspace) -> AssumptionEntry {
        let metric = self.metric();
        let mut offsets = Vec::new();
        for (t, s) in sampler.points(self) {
            let m = self.log_coefficient(t);
            let pw = w.project(&s);
            let z = w.complement(&s);
            let uz = self.limit_or_inf(t, &z);
            let psi2 = if uz.is_finite() { (-2.0 * uz / m).exp() } else { 0.0 };
            let u = self.limit_or_inf(t, &s);
            if u.is_finite() {
                offsets.push(u + 0.5 * m * (metric.norm_sq(&pw) + psi2).ln());
            }
        }
        let lo = offsets.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spread = hi - lo;
        let mean = 0.5 * (hi + lo);
        AssumptionEntry::new(
            "U7l",
            spread <= 1e-8 * (1.0 + mean.abs()),
            -spread,
            offsets.len(),
            format!("log split holds up to the additive constant {mean:.6e} (spread {spread:.3e})"),
        )
    }

    /// Estimate `C₁`, `γ` and `C₂` from samples.
    ///
    /// `γ` comes from a log-log regression of the positive deficits
    /// `d = -(∇U·x + αU)/U` (`M` in place of `αU` for logarithmic kinds)
    /// against `|x|`; `C₂ = max d/|x|^γ`. Without positive deficits
    /// `C₂ = 0` and `γ` keeps its default 1.
    pub fn fit_constants(&self, sampler: &Sampler) -> FittedConstants {
        let metric = self.metric();
        let pts = sampler.points(self);
        let log = self.scaling().is_log();
        let alpha = self.alpha().unwrap_or(0.0);
        let mut c1: f64 = 0.0;
        let mut deficits = Vec::new();
        for (t, x) in &pts {
            let Some(u) = self.raw_value(*t, x) else { continue };
            if self.potential().is_time_dependent() {
                c1 = c1.max(self.potential().partial_t(*t, x).abs() / (u + 1.0).abs());
            }
            if !(u > 0.0) || self.scaling() == Scaling::Free {
                continue;
            }
            let du = self.radial_derivative(*t, x);
            let lead = if log { self.log_coefficient(*t) } else { alpha * u };
            let d = -(du + lead) / u;
            if d > 1e-10 * (1.0 + lead.abs() / u) {
                deficits.push((metric.norm(x), d));
            }
        }
        let mut gamma = 1.0;
        if deficits.len() >= 2 {
            let n = deficits.len() as f64;
            let (sx, sy) = deficits.iter().fold((0.0, 0.0), |(a, b), (r, d)| (a + r.ln(), b + d.ln()));
            let (mx, my) = (sx / n, sy / n);
            let (sxy, sxx) = deficits
                .iter()
                .fold((0.0, 0.0), |(a, b), (r, d)| (a + (r.ln() - mx) * (d.ln() - my), b + (r.ln() - mx).powi(2)));
            if sxx > 1e-12 && sxy / sxx > 0.0 {
                gamma = sxy / sxx;
            }
        }
        let c2 = deficits.iter().map(|(r, d)| d / r.powf(gamma)).fold(0.0, f64::max);
        FittedConstants { c1, gamma, c2, samples: pts.len() }
    }
}
