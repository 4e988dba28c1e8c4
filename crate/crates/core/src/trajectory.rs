//! Discrete trajectories and their mass-metric functionals.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MassMetric;
use crate::potentials::PotentialSpec;

/// A configuration-space path sampled on a strictly increasing grid.
///
/// Velocities are optional; when present (integrator output) they replace
/// the difference scheme in the energy diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    metric: MassMetric,
    grid: Vec<f64>,
    points: Vec<Vec<f64>>,
    velocities: Option<Vec<Vec<f64>>>,
}

/// Which velocities fed an energy series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityScheme {
    /// Three-point differences, second order on nonuniform grids.
    Differences,
    /// Velocities stored with the path.
    Stored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    /// `h = K(ẋ) - U(t, x)`.
    pub h: Vec<f64>,
    /// `ḣ + ∂U/∂t` on interior samples, centered differences.
    pub residual: Vec<f64>,
    pub scheme: VelocityScheme,
}

impl EnergySeries {
    pub fn max_drift(&self) -> f64 {
        self.h.iter().map(|v| (v - self.h[0]).abs()).fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InertiaSeries {
    pub times: Vec<f64>,
    pub i: Vec<f64>,
    pub di: Vec<f64>,
    pub ddi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialAngular {
    pub r: Vec<f64>,
    /// `x/|x|`, `None` where `r` is below the collision threshold.
    pub s: Vec<Option<Vec<f64>>>,
    pub collision_candidates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeJacobiSeries {
    pub times: Vec<f64>,
    pub margin: Vec<f64>,
    pub min: f64,
}

impl LagrangeJacobiSeries {
    fn from_parts(times: Vec<f64>, margin: Vec<f64>) -> Self {
        let min = margin.iter().copied().fold(f64::INFINITY, f64::min);
        Self { times, margin, min }
    }
}

/// Second-order weights of the first derivative at the middle of three
/// nodes with spacings `h1`, `h2`.
fn d1_weights(h1: f64, h2: f64) -> [f64; 3] {
    [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))]
}

fn d2_weights(h1: f64, h2: f64) -> [f64; 3] {
    [2.0 / (h1 * (h1 + h2)), -2.0 / (h1 * h2), 2.0 / (h2 * (h1 + h2))]
}

/// One-sided second-order weights at the first of three nodes.
fn d1_start(h1: f64, h2: f64) -> [f64; 3] {
    [-(2.0 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2))]
}

fn d1_end(h1: f64, h2: f64) -> [f64; 3] {
    [h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (2.0 * h2 + h1) / (h2 * (h1 + h2))]
}

fn combine(w: [f64; 3], a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    (0..a.len()).map(|k| w[0] * a[k] + w[1] * b[k] + w[2] * c[k]).collect()
}

/// First derivative of a sampled scalar series.
pub fn differentiate(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    if n < 2 {
        return vec![0.0; n];
    }
    if n == 2 {
        let d = (values[1] - values[0]) / (times[1] - times[0]);
        return vec![d, d];
    }
    (0..n)
        .map(|j| {
            let (i, w) = match j {
                0 => (0, d1_start(times[1] - times[0], times[2] - times[1])),
                j if j == n - 1 => (n - 3, d1_end(times[n - 2] - times[n - 3], times[n - 1] - times[n - 2])),
                j => (j - 1, d1_weights(times[j] - times[j - 1], times[j + 1] - times[j])),
            };
            w[0] * values[i] + w[1] * values[i + 1] + w[2] * values[i + 2]
        })
        .collect()
}

/// Second derivative on interior samples (index `j` maps to sample `j+1`).
pub fn second_difference(times: &[f64], values: &[f64]) -> Vec<f64> {
    (1..times.len().saturating_sub(1))
        .map(|j| {
            let w = d2_weights(times[j] - times[j - 1], times[j + 1] - times[j]);
            w[0] * values[j - 1] + w[1] * values[j] + w[2] * values[j + 1]
        })
        .collect()
}

impl Path {
    pub fn new(metric: MassMetric, grid: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if grid.len() != points.len() {
            return Err(Error::InvalidInput(format!("{} times but {} points", grid.len(), points.len())));
        }
        if grid.is_empty() {
            return Err(Error::InvalidInput("empty path".into()));
        }
        for j in 1..grid.len() {
            if !(grid[j] > grid[j - 1]) {
                return Err(Error::DegenerateGrid(j));
            }
        }
        for (j, p) in points.iter().enumerate() {
            if p.len() != metric.size() {
                return Err(Error::InvalidInput(format!("point {j} has length {}, expected {}", p.len(), metric.size())));
            }
            if p.iter().any(|v| !v.is_finite()) || !grid[j].is_finite() {
                return Err(Error::InvalidInput(format!("non-finite sample {j}")));
            }
        }
        Ok(Self { metric, grid, points, velocities: None })
    }

    pub fn with_velocities(mut self, velocities: Vec<Vec<f64>>) -> Result<Self> {
        if velocities.len() != self.grid.len() || velocities.iter().any(|v| v.len() != self.metric.size()) {
            return Err(Error::InvalidInput("velocity array does not match the path".into()));
        }
        self.velocities = Some(velocities);
        Ok(self)
    }

    pub fn from_fn<F: Fn(f64) -> Vec<f64>>(metric: MassMetric, grid: Vec<f64>, f: F) -> Result<Self> {
        let points = grid.iter().map(|&t| f(t)).collect();
        Self::new(metric, grid, points)
    }

    /// `n + 1` uniform samples on `[t0, t1]`.
    pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|j| t0 + (t1 - t0) * j as f64 / n as f64).collect()
    }

    /// Straight segment from `a` to `b`.
    pub fn linear(metric: MassMetric, grid: Vec<f64>, a: &[f64], b: &[f64]) -> Result<Self> {
        let (t0, t1) = (grid[0], *grid.last().unwrap());
        let (a, b) = (a.to_vec(), b.to_vec());
        Self::from_fn(metric, grid, move |t| {
            let s = (t - t0) / (t1 - t0);
            a.iter().zip(&b).map(|(p, q)| p + s * (q - p)).collect()
        })
    }

    pub fn metric(&self) -> &MassMetric {
        &self.metric
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Vec<f64>] {
        self.velocities = None;
        &mut self.points
    }

    pub fn stored_velocities(&self) -> Option<&[Vec<f64>]> {
        self.velocities.as_deref()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    pub fn time(&self, j: usize) -> f64 {
        self.grid[j]
    }

    pub fn span(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    /// Largest mass distance between two samples.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        let n = self.len();
        let step = (n / 200).max(1);
        for i in (0..n).step_by(step) {
            for k in (i..n).step_by(step) {
                d = d.max(self.metric.distance(&self.points[i], &self.points[k]));
            }
        }
        d.max(self.points.iter().map(|p| self.metric.norm(p)).fold(0.0, f64::max))
    }

    /// Difference velocity at sample `j`.
    pub fn velocity(&self, j: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if n < 2 {
            return Err(Error::DegenerateGrid(0));
        }
        let g = &self.grid;
        let p = &self.points;
        if n == 2 {
            let h = g[1] - g[0];
            return Ok(p[1].iter().zip(&p[0]).map(|(b, a)| (b - a) / h).collect());
        }
        Ok(match j {
            0 => combine(d1_start(g[1] - g[0], g[2] - g[1]), &p[0], &p[1], &p[2]),
            j if j == n - 1 => combine(d1_end(g[n - 2] - g[n - 3], g[n - 1] - g[n - 2]), &p[n - 3], &p[n - 2], &p[n - 1]),
            j => combine(d1_weights(g[j] - g[j - 1], g[j + 1] - g[j]), &p[j - 1], &p[j], &p[j + 1]),
        })
    }

    /// Velocities used by the diagnostics: stored when available.
    pub fn velocities(&self) -> Result<(Vec<Vec<f64>>, VelocityScheme)> {
        match &self.velocities {
            Some(v) => Ok((v.clone(), VelocityScheme::Stored)),
            None => Ok(((0..self.len()).map(|j| self.velocity(j)).collect::<Result<_>>()?, VelocityScheme::Differences)),
        }
    }

    /// `½|ẋ(t_j)|²` in the mass metric.
    pub fn kinetic(&self, j: usize) -> Result<f64> {
        let v = match &self.velocities {
            Some(v) => v[j].clone(),
            None => self.velocity(j)?,
        };
        Ok(0.5 * self.metric.norm_sq(&v))
    }

    /// Velocity of the linear interpolant on cell `j`.
    pub fn cell_velocity(&self, j: usize) -> Vec<f64> {
        let h = self.grid[j + 1] - self.grid[j];
        self.points[j + 1].iter().zip(&self.points[j]).map(|(b, a)| (b - a) / h).collect()
    }

    pub fn cell_midpoint(&self, j: usize) -> (f64, Vec<f64>) {
        let t = 0.5 * (self.grid[j] + self.grid[j + 1]);
        (t, self.points[j].iter().zip(&self.points[j + 1]).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    /// Kinetic part of the action of the piecewise-linear interpolant over
    /// cells `[i, k)`.
    pub fn kinetic_action_between(&self, i: usize, k: usize) -> f64 {
        (i..k)
            .map(|j| {
                let h = self.grid[j + 1] - self.grid[j];
                0.5 * self.metric.norm_sq(&self.cell_velocity(j)) * h
            })
            .sum()
    }

    pub fn kinetic_action(&self) -> f64 {
        self.kinetic_action_between(0, self.len() - 1)
    }

    /// Midpoint-rule potential part over cells `[i, k)`.
    pub fn potential_action_between(&self, spec: &PotentialSpec, i: usize, k: usize) -> Result<f64> {
        let mut s = 0.0;
        for j in i..k {
            let (t, m) = self.cell_midpoint(j);
            s += spec.evaluate(t, &m).map_err(|e| e.at_index(j))? * (self.grid[j + 1] - self.grid[j]);
        }
        Ok(s)
    }

    /// Discrete action over cells `[i, k)`.
    pub fn action_between(&self, spec: &PotentialSpec, i: usize, k: usize) -> Result<f64> {
        if !(i <= k && k < self.len()) {
            return Err(Error::InvalidInput(format!("cell range [{i}, {k}) outside the path")));
        }
        Ok(self.kinetic_action_between(i, k) + self.potential_action_between(spec, i, k)?)
    }

    /// `∫ K(ẋ) + U(t, x) dt`: exact kinetic term of the piecewise-linear
    /// interpolant, midpoint rule for the potential.
    pub fn action(&self, spec: &PotentialSpec) -> Result<f64> {
        self.action_between(spec, 0, self.len() - 1)
    }

    pub fn moment_of_inertia(&self, j: usize) -> f64 {
        self.metric.norm_sq(&self.points[j])
    }

    /// `I`, `İ` and `Ï`; `İ = 2x·ẋ` uses stored velocities when present.
    pub fn inertia_series(&self) -> Result<InertiaSeries> {
        let i: Vec<f64> = (0..self.len()).map(|j| self.moment_of_inertia(j)).collect();
        let di = match &self.velocities {
            Some(v) => (0..self.len()).map(|j| 2.0 * self.metric.dot(&self.points[j], &v[j])).collect(),
            None => differentiate(&self.grid, &i),
        };
        let mut ddi = vec![f64::NAN; self.len()];
        if self.len() >= 3 {
            let inner = match &self.velocities {
                Some(_) => differentiate(&self.grid, &di),
                None => {
                    let mut d = vec![f64::NAN];
                    d.extend(second_difference(&self.grid, &i));
                    d.push(f64::NAN);
                    d
                }
            };
            ddi[1..self.len() - 1].copy_from_slice(&inner[1..self.len() - 1]);
        }
        Ok(InertiaSeries { times: self.grid.clone(), i, di, ddi })
    }

    /// Energy `h = K - U` and the residual `ḣ + ∂U/∂t` on interior samples.
    pub fn energy_series(&self, spec: &PotentialSpec) -> Result<EnergySeries> {
        let (v, scheme) = self.velocities()?;
        let mut h = Vec::with_capacity(self.len());
        let mut du = Vec::with_capacity(self.len());
        for j in 0..self.len() {
            let t = self.grid[j];
            let u = spec.evaluate(t, &self.points[j]).map_err(|e| e.at_index(j))?;
            h.push(0.5 * self.metric.norm_sq(&v[j]) - u);
            du.push(spec.potential().partial_t(t, &self.points[j]));
        }
        let dh = differentiate(&self.grid, &h);
        let residual = (1..self.len().saturating_sub(1)).map(|j| dh[j] + du[j]).collect();
        Ok(EnergySeries { times: self.grid.clone(), h, residual, scheme })
    }

    /// `½Ï - 2h - (2-α̃)U + C₂` on interior samples.
    pub fn lagrange_jacobi_margin(&self, spec: &PotentialSpec) -> Result<LagrangeJacobiSeries> {
        let inertia = self.inertia_series()?;
        let energy = self.energy_series(spec)?;
        let at = spec.alpha_tilde();
        let c2 = spec.constants.c2;
        let mut times = Vec::new();
        let mut margin = Vec::new();
        for j in 1..self.len().saturating_sub(1) {
            let u = spec.evaluate(self.grid[j], &self.points[j])?;
            times.push(self.grid[j]);
            margin.push(0.5 * inertia.ddi[j] - 2.0 * energy.h[j] - (2.0 - at) * u + c2);
        }
        Ok(LagrangeJacobiSeries::from_parts(times, margin))
    }

    /// `r = |x|`, `s = x/r`; samples below `1e-10` times the path diameter
    /// are collision candidates with undefined `s`.
    pub fn radial_split(&self) -> RadialAngular {
        let floor = 1e-10 * self.diameter();
        let mut r = Vec::with_capacity(self.len());
        let mut s = Vec::with_capacity(self.len());
        let mut flagged = Vec::new();
        for (j, p) in self.points.iter().enumerate() {
            let rj = self.metric.norm(p);
            r.push(rj);
            if rj <= floor || rj == 0.0 {
                s.push(None);
                flagged.push(j);
            } else {
                s.push(Some(p.iter().map(|v| v / rj).collect()));
            }
        }
        RadialAngular { r, s, collision_candidates: flagged }
    }

    /// Linear interpolation at `t` (clamped to the grid).
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let g = &self.grid;
        if t <= g[0] {
            return self.points[0].clone();
        }
        if t >= *g.last().unwrap() {
            return self.points.last().unwrap().clone();
        }
        let j = g.partition_point(|&v| v <= t) - 1;
        let w = (t - g[j]) / (g[j + 1] - g[j]);
        self.points[j].iter().zip(&self.points[j + 1]).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// Sub-path on samples `[i, k]`.
    pub fn slice(&self, i: usize, k: usize) -> Result<Path> {
        let mut p = Path::new(self.metric.clone(), self.grid[i..=k].to_vec(), self.points[i..=k].to_vec())?;
        if let Some(v) = &self.velocities {
            p.velocities = Some(v[i..=k].to_vec());
        }
        Ok(p)
    }

    /// Insert extra grid times, interpolating linearly.
    pub fn refined_with(&self, extra: &[f64]) -> Result<Path> {
        let (t0, t1) = self.span();
        let mut grid = self.grid.clone();
        grid.extend(extra.iter().copied().filter(|t| *t > t0 && *t < t1));
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        let points = grid.iter().map(|&t| self.interpolate(t)).collect();
        Path::new(self.metric.clone(), grid, points)
    }

    /// CSV with header `t,x_1_1,...,x_n_d`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        for i in 1..=self.metric.bodies() {
            for a in 1..=self.metric.dim() {
                header.push(format!("x_{i}_{a}"));
            }
        }
        wr.write_record(&header)?;
        for (t, p) in self.grid.iter().zip(&self.points) {
            let mut rec = vec![format!("{t:e}")];
            rec.extend(p.iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(metric: MassMetric, r: R) -> Result<Path> {
        let mut rd = csv::Reader::from_reader(r);
        let width = rd.headers()?.len();
        if width != metric.size() + 1 {
            return Err(Error::InvalidInput(format!("CSV has {width} columns, expected {}", metric.size() + 1)));
        }
        let mut grid = Vec::new();
        let mut points = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad number `{s}`: {e}"))))
                .collect::<Result<_>>()?;
            grid.push(vals[0]);
            points.push(vals[1..].to_vec());
        }
        Path::new(metric, grid, points)
    }
}

/// Write named columns of equal length as CSV.
pub fn write_series_csv<W: Write>(w: W, columns: &[(&str, &[f64])]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(columns.iter().map(|c| c.0))?;
    let n = columns.iter().map(|c| c.1.len()).max().unwrap_or(0);
    for j in 0..n {
        wr.write_record(columns.iter().map(|c| c.1.get(j).map(|v| format!("{v:e}")).unwrap_or_default()))?;
    }
    wr.flush()?;
    Ok(())
}
