use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Potential, Scaling};
use crate::error::{Error, Result};
use crate::metric::MassMetric;
use crate::spline::TimeFunction;
use crate::subspace::Subspace;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 2), got {alpha}")))
    }
}

/// Power terms `Σ c_k r^{-e_k}`, leading exponent first.
#[derive(Debug, Clone)]
struct PowerTerms(Vec<(f64, f64)>);

impl PowerTerms {
    fn new(mut terms: Vec<(f64, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("at least one power term required".into()));
        }
        terms.sort_by(|a, b| b.1.total_cmp(&a.1));
        check_alpha(terms[0].1)?;
        for &(_, e) in &terms[1..] {
            if !(e > 0.0 && e < terms[0].1) {
                return Err(Error::InvalidInput(format!(
                    "secondary exponent must satisfy 0 < beta < alpha, got {e}"
                )));
            }
        }
        Ok(Self(terms))
    }

    fn scaling(&self) -> Scaling {
        let alpha = self.0[0].1;
        match self.0.iter().skip(1).map(|t| t.1).reduce(f64::max) {
            None => Scaling::Homogeneous { alpha },
            Some(beta) => Scaling::QuasiHomogeneous { alpha, beta },
        }
    }

    /// Value and `d/dr` of the radial profile.
    fn eval(&self, r: f64, leading_only: bool) -> (f64, f64) {
        let lead = self.0[0].1;
        let mut v = 0.0;
        let mut dv = 0.0;
        for &(c, e) in &self.0 {
            if leading_only && e != lead {
                continue;
            }
            let p = r.powf(-e);
            v += c * p;
            dv -= c * e * p / r;
        }
        (v, dv)
    }
}

/// Pairwise power-law interaction
/// `U = Σ_{i<j} m_i(t) m_j(t) Σ_k c_k |x_i - x_j|^{-e_k}`.
///
/// With a single term this is the α-homogeneous n-body potential; with two
/// terms it is the quasi-homogeneous sum `U_α + λ U_β`. The coupling masses
/// may be time dependent; the kinetic metric always uses the constant
/// masses of `metric`.
#[derive(Debug, Clone)]
pub struct PairPower {
    metric: MassMetric,
    couplings: Vec<TimeFunction>,
    terms: PowerTerms,
    pairs: Vec<(usize, usize)>,
}

impl PairPower {
    pub fn new(metric: MassMetric, terms: Vec<(f64, f64)>) -> Result<Self> {
        let couplings = metric.masses().iter().map(|m| TimeFunction::Constant(*m)).collect();
        Self::with_couplings(metric, couplings, terms)
    }

    /// α-homogeneous n-body potential.
    pub fn homogeneous(metric: MassMetric, alpha: f64) -> Result<Self> {
        Self::new(metric, vec![(1.0, alpha)])
    }

    pub fn with_couplings(metric: MassMetric, couplings: Vec<TimeFunction>, terms: Vec<(f64, f64)>) -> Result<Self> {
        let n = metric.bodies();
        if n < 2 {
            return Err(Error::InvalidInput("pair potential needs at least two bodies".into()));
        }
        if couplings.len() != n {
            return Err(Error::InvalidInput(format!("expected {n} coupling masses, got {}", couplings.len())));
        }
        if let Some(m) = couplings.iter().map(TimeFunction::min_sampled).find(|m| !(*m > 0.0)) {
            return Err(Error::InvalidInput(format!("coupling masses must stay positive, got {m}")));
        }
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Ok(Self { metric, couplings, terms: PowerTerms::new(terms)?, pairs })
    }

    fn coupling(&self, t: f64, i: usize, j: usize) -> (f64, f64) {
        let (mi, dmi) = self.couplings[i].eval(t);
        let (mj, dmj) = self.couplings[j].eval(t);
        (mi * mj, dmi * mj + mi * dmj)
    }

    fn separation(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let d = self.metric.dim();
        let mut s = 0.0;
        for a in 0..d {
            let v = x[i * d + a] - x[j * d + a];
            s += v * v;
        }
        s.sqrt()
    }

    fn value_impl(&self, t: f64, x: &[f64], leading_only: bool) -> f64 {
        let mut u = 0.0;
        for &(i, j) in &self.pairs {
            let (c, _) = self.coupling(t, i, j);
            u += c * self.terms.eval(self.separation(x, i, j), leading_only).0;
        }
        u
    }

    fn partial_impl(&self, t: f64, x: &[f64], out: &mut [f64], leading_only: bool) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let d = self.metric.dim();
        for &(i, j) in &self.pairs {
            let (c, _) = self.coupling(t, i, j);
            let r = self.separation(x, i, j);
            let (_, dv) = self.terms.eval(r, leading_only);
            let f = c * dv / r;
            for a in 0..d {
                let diff = x[i * d + a] - x[j * d + a];
                out[i * d + a] += f * diff;
                out[j * d + a] -= f * diff;
            }
        }
    }
}

impl Potential for PairPower {
    fn kind(&self) -> &str {
        match self.terms.scaling() {
            Scaling::Homogeneous { .. } => "nbody",
            _ => "quasi-homogeneous",
        }
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        self.terms.scaling()
    }
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.value_impl(t, x, false)
    }
    fn partial_x(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.partial_impl(t, x, out, false)
    }
    fn partial_t(&self, t: f64, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for &(i, j) in &self.pairs {
            let (_, dc) = self.coupling(t, i, j);
            if dc != 0.0 {
                s += dc * self.terms.eval(self.separation(x, i, j), false).0;
            }
        }
        s
    }
    fn is_time_dependent(&self) -> bool {
        self.couplings.iter().any(|c| !c.is_constant())
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        let m = self.metric.masses();
        self.pairs
            .iter()
            .map(|&(i, j)| (m[i] * m[j] / (m[i] + m[j])).sqrt() * self.separation(x, i, j))
            .fold(f64::INFINITY, f64::min)
    }
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        Some(self.pairs.iter().map(|&(i, j)| Subspace::pair_coincidence(&self.metric, i, j)).collect())
    }
    fn limit_value(&self, t: f64, x: &[f64]) -> f64 {
        self.value_impl(t, x, true)
    }
    fn limit_partial(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.partial_impl(t, x, out, true)
    }
    fn cluster_part(&self, member: &Subspace) -> Option<Arc<dyn Potential>> {
        let pairs: Vec<(usize, usize)> = self
            .pairs
            .iter()
            .copied()
            .filter(|&(i, j)| member.is_subset_of(&Subspace::pair_coincidence(&self.metric, i, j), 1e-10))
            .collect();
        if pairs.is_empty() {
            return None;
        }
        let mut part = self.clone();
        part.pairs = pairs;
        Some(Arc::new(part))
    }
}

/// Pairwise logarithmic interaction `U = -Σ_{i<j} m_i(t) m_j(t) log|x_i - x_j|`.
#[derive(Debug, Clone)]
pub struct PairLog {
    metric: MassMetric,
    couplings: Vec<TimeFunction>,
    pairs: Vec<(usize, usize)>,
}

impl PairLog {
    pub fn new(metric: MassMetric) -> Result<Self> {
        let couplings = metric.masses().iter().map(|m| TimeFunction::Constant(*m)).collect();
        Self::with_couplings(metric, couplings)
    }

    pub fn with_couplings(metric: MassMetric, couplings: Vec<TimeFunction>) -> Result<Self> {
        let n = metric.bodies();
        if n < 2 || couplings.len() != n {
            return Err(Error::InvalidInput("logarithmic pair potential needs n >= 2 coupling masses".into()));
        }
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Ok(Self { metric, couplings, pairs })
    }

    fn coupling(&self, t: f64, i: usize, j: usize) -> (f64, f64) {
        let (mi, dmi) = self.couplings[i].eval(t);
        let (mj, dmj) = self.couplings[j].eval(t);
        (mi * mj, dmi * mj + mi * dmj)
    }

    fn separation_sq(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let d = self.metric.dim();
        (0..d).map(|a| (x[i * d + a] - x[j * d + a]).powi(2)).sum()
    }
}

impl Potential for PairLog {
    fn kind(&self) -> &str {
        "log-nbody"
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        Scaling::Logarithmic
    }
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j)| -0.5 * self.coupling(t, i, j).0 * self.separation_sq(x, i, j).ln())
            .sum()
    }
    fn partial_x(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let d = self.metric.dim();
        for &(i, j) in &self.pairs {
            let c = self.coupling(t, i, j).0;
            let r2 = self.separation_sq(x, i, j);
            for a in 0..d {
                let diff = x[i * d + a] - x[j * d + a];
                out[i * d + a] -= c * diff / r2;
                out[j * d + a] += c * diff / r2;
            }
        }
    }
    fn partial_t(&self, t: f64, x: &[f64]) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j)| -0.5 * self.coupling(t, i, j).1 * self.separation_sq(x, i, j).ln())
            .sum()
    }
    fn is_time_dependent(&self) -> bool {
        self.couplings.iter().any(|c| !c.is_constant())
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        let m = self.metric.masses();
        self.pairs
            .iter()
            .map(|&(i, j)| (m[i] * m[j] / (m[i] + m[j]) * self.separation_sq(x, i, j)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        Some(self.pairs.iter().map(|&(i, j)| Subspace::pair_coincidence(&self.metric, i, j)).collect())
    }
    fn log_coefficient(&self, t: f64) -> f64 {
        self.pairs.iter().map(|&(i, j)| self.coupling(t, i, j).0).sum()
    }
    fn log_coefficient_rate(&self, t: f64) -> f64 {
        self.pairs.iter().map(|&(i, j)| self.coupling(t, i, j).1).sum()
    }
    fn cluster_part(&self, member: &Subspace) -> Option<Arc<dyn Potential>> {
        let pairs: Vec<(usize, usize)> = self
            .pairs
            .iter()
            .copied()
            .filter(|&(i, j)| member.is_subset_of(&Subspace::pair_coincidence(&self.metric, i, j), 1e-10))
            .collect();
        if pairs.is_empty() {
            return None;
        }
        let mut part = self.clone();
        part.pairs = pairs;
        Some(Arc::new(part))
    }
}

/// One-center power law `U = Σ_k c_k |x|^{-e_k}` in the mass norm.
#[derive(Debug, Clone)]
pub struct CentralPower {
    metric: MassMetric,
    terms: PowerTerms,
}

impl CentralPower {
    pub fn new(metric: MassMetric, terms: Vec<(f64, f64)>) -> Result<Self> {
        Ok(Self { metric, terms: PowerTerms::new(terms)? })
    }

    /// `|x|^{-α}` for a unit mass in `R^d`.
    pub fn kepler_like(dim: usize, alpha: f64) -> Result<Self> {
        Self::new(MassMetric::unit(1, dim), vec![(1.0, alpha)])
    }

    fn partial_impl(&self, x: &[f64], out: &mut [f64], leading_only: bool) {
        let r = self.metric.norm(x);
        let (_, dv) = self.terms.eval(r, leading_only);
        for (k, o) in out.iter_mut().enumerate() {
            *o = dv / r * self.metric.coord_mass(k) * x[k];
        }
    }
}

impl Potential for CentralPower {
    fn kind(&self) -> &str {
        match self.terms.scaling() {
            Scaling::Homogeneous { .. } => "one-center",
            _ => "quasi-homogeneous",
        }
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        self.terms.scaling()
    }
    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        self.terms.eval(self.metric.norm(x), false).0
    }
    fn partial_x(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        self.partial_impl(x, out, false)
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        self.metric.norm(x)
    }
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        Some(vec![Subspace::zero(&self.metric)])
    }
    fn limit_value(&self, _t: f64, x: &[f64]) -> f64 {
        self.terms.eval(self.metric.norm(x), true).0
    }
    fn limit_partial(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        self.partial_impl(x, out, true)
    }
    fn cluster_part(&self, member: &Subspace) -> Option<Arc<dyn Potential>> {
        (member.dim() == 0).then(|| Arc::new(self.clone()) as Arc<dyn Potential>)
    }
}

/// Logarithmic one-center potential `U = -M(t) log|x|`.
///
/// Its limiting potential vanishes identically on the ellipsoid.
#[derive(Debug, Clone)]
pub struct CentralLog {
    metric: MassMetric,
    coefficient: TimeFunction,
}

impl CentralLog {
    pub fn new(metric: MassMetric, coefficient: TimeFunction) -> Result<Self> {
        if !(coefficient.min_sampled() > 0.0) {
            return Err(Error::InvalidInput("M(t) must stay positive".into()));
        }
        Ok(Self { metric, coefficient })
    }
}

impl Potential for CentralLog {
    fn kind(&self) -> &str {
        "log-one-center"
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        Scaling::Logarithmic
    }
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        -0.5 * self.coefficient.value(t) * self.metric.norm_sq(x).ln()
    }
    fn partial_x(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let m = self.coefficient.value(t);
        let r2 = self.metric.norm_sq(x);
        for (k, o) in out.iter_mut().enumerate() {
            *o = -m * self.metric.coord_mass(k) * x[k] / r2;
        }
    }
    fn partial_t(&self, t: f64, x: &[f64]) -> f64 {
        -0.5 * self.coefficient.derivative(t) * self.metric.norm_sq(x).ln()
    }
    fn is_time_dependent(&self) -> bool {
        !self.coefficient.is_constant()
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        self.metric.norm(x)
    }
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        Some(vec![Subspace::zero(&self.metric)])
    }
    fn log_coefficient(&self, t: f64) -> f64 {
        self.coefficient.value(t)
    }
    fn log_coefficient_rate(&self, t: f64) -> f64 {
        self.coefficient.derivative(t)
    }
    fn cluster_part(&self, member: &Subspace) -> Option<Arc<dyn Potential>> {
        (member.dim() == 0).then(|| Arc::new(self.clone()) as Arc<dyn Potential>)
    }
}

/// `U = Q(x)^{-α/2}` with `Q(x) = xᵀ A x`, `A` symmetric positive definite
/// in Euclidean coordinates.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    metric: MassMetric,
    alpha: f64,
    matrix: Vec<f64>,
}

impl QuadraticForm {
    pub fn new(metric: MassMetric, alpha: f64, matrix: Vec<Vec<f64>>) -> Result<Self> {
        check_alpha(alpha)?;
        let n = metric.size();
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput(format!("quadratic form must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..i {
                if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 * (matrix[i][j].abs() + 1.0) {
                    return Err(Error::InvalidInput("quadratic form must be symmetric".into()));
                }
            }
        }
        let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
        if DMatrix::from_row_slice(n, n, &flat).cholesky().is_none() {
            return Err(Error::InvalidInput("quadratic form must be positive definite".into()));
        }
        Ok(Self { metric, alpha, matrix: flat })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| self.matrix[i * n + j] * x[j]).sum()).collect()
    }

    pub fn form(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

impl Potential for QuadraticForm {
    fn kind(&self) -> &str {
        "quadratic-form"
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        Scaling::Homogeneous { alpha: self.alpha }
    }
    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        self.form(x).powf(-0.5 * self.alpha)
    }
    fn partial_x(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let ax = self.apply(x);
        let q: f64 = ax.iter().zip(x).map(|(a, b)| a * b).sum();
        let f = -self.alpha * q.powf(-0.5 * self.alpha - 1.0);
        out.iter_mut().zip(&ax).for_each(|(o, a)| *o = f * a);
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        self.metric.norm(x)
    }
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        Some(vec![Subspace::zero(&self.metric)])
    }
    fn approach_params(&self, zeta: &[f64], delta: &[f64]) -> Vec<f64> {
        let az = self.apply(zeta);
        let zz: f64 = az.iter().zip(zeta).map(|(a, b)| a * b).sum();
        let zd: f64 = az.iter().zip(delta).map(|(a, b)| a * b).sum();
        let s = -zd / zz;
        if s > 0.0 {
            vec![s]
        } else {
            Vec::new()
        }
    }
    fn cluster_part(&self, member: &Subspace) -> Option<Arc<dyn Potential>> {
        (member.dim() == 0).then(|| Arc::new(self.clone()) as Arc<dyn Potential>)
    }
}

/// `U = Σ_ν K_ν dist(x, V_ν)^{-α}` or, in the logarithmic variant,
/// `U = -Σ_ν K_ν log dist(x, V_ν)`. Each `V_ν` has codimension at least 2.
#[derive(Debug, Clone)]
pub struct SubspaceDistance {
    metric: MassMetric,
    alpha: Option<f64>,
    terms: Vec<(f64, Subspace)>,
}

impl SubspaceDistance {
    /// Power variant; `alpha = None` selects the logarithmic variant.
    pub fn new(metric: MassMetric, alpha: Option<f64>, terms: Vec<(f64, Subspace)>) -> Result<Self> {
        if let Some(a) = alpha {
            check_alpha(a)?;
        }
        if terms.is_empty() {
            return Err(Error::InvalidInput("subspace-distance potential needs at least one subspace".into()));
        }
        for (k, v) in &terms {
            if !(*k > 0.0) {
                return Err(Error::InvalidInput(format!("weights must be positive, got {k}")));
            }
            if v.codim() < 2 {
                return Err(Error::InvalidInput(format!(
                    "subspace of dimension {} has codimension {} < 2",
                    v.dim(),
                    v.codim()
                )));
            }
        }
        Ok(Self { metric, alpha, terms })
    }
}

impl Potential for SubspaceDistance {
    fn kind(&self) -> &str {
        if self.alpha.is_some() {
            "subspace-distance"
        } else {
            "log-subspace-distance"
        }
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        match self.alpha {
            Some(alpha) => Scaling::Homogeneous { alpha },
            None => Scaling::Logarithmic,
        }
    }
    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(k, v)| {
                let d2 = self.metric.norm_sq(&v.complement(x));
                match self.alpha {
                    Some(a) => k * d2.powf(-0.5 * a),
                    None => -0.5 * k * d2.ln(),
                }
            })
            .sum()
    }
    fn partial_x(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, v) in &self.terms {
            let w = v.complement(x);
            let d2 = self.metric.norm_sq(&w);
            let f = match self.alpha {
                Some(a) => -a * k * d2.powf(-0.5 * a - 1.0),
                None => -k / d2,
            };
            for (idx, o) in out.iter_mut().enumerate() {
                *o += f * self.metric.coord_mass(idx) * w[idx];
            }
        }
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(_, v)| v.distance(x)).fold(f64::INFINITY, f64::min)
    }
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        Some(self.terms.iter().map(|(_, v)| v.clone()).collect())
    }
    fn log_coefficient(&self, _t: f64) -> f64 {
        match self.alpha {
            Some(_) => 0.0,
            None => self.terms.iter().map(|(k, _)| k).sum(),
        }
    }
    fn cluster_part(&self, member: &Subspace) -> Option<Arc<dyn Potential>> {
        let terms: Vec<(f64, Subspace)> =
            self.terms.iter().filter(|(_, v)| member.is_subset_of(v, 1e-10)).cloned().collect();
        if terms.is_empty() {
            return None;
        }
        Some(Arc::new(Self { metric: self.metric.clone(), alpha: self.alpha, terms }))
    }
}

/// `K(N) = Σ_{k=1}^{N-1} sin^{-α}(kπ/N)`.
pub fn hip_hop_constant(n: usize, alpha: f64) -> f64 {
    (1..n).map(|k| (k as f64 * PI / n as f64).sin().powf(-alpha)).sum()
}

/// Reduced potential of the hip-hop symmetric `2N`-body problem on
/// `(u, ζ) ∈ C × R ≅ R^3`:
/// `U = K(N)|u|^{-α} + Σ_{k=1}^N (sin²((2k-1)π/2N)|u|² + ζ²)^{-α/2}`.
#[derive(Debug, Clone)]
pub struct HipHop {
    metric: MassMetric,
    alpha: f64,
    n: usize,
    k_n: f64,
    sines: Vec<f64>,
}

impl HipHop {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if n < 2 {
            return Err(Error::InvalidInput("hip-hop needs N >= 2".into()));
        }
        let sines = (1..=n)
            .map(|k| ((2 * k - 1) as f64 * PI / (2 * n) as f64).sin().powi(2))
            .collect();
        Ok(Self { metric: MassMetric::unit(1, 3), alpha, n, k_n: hip_hop_constant(n, alpha), sines })
    }

    pub fn polygon_constant(&self) -> f64 {
        self.k_n
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl Potential for HipHop {
    fn kind(&self) -> &str {
        "hip-hop"
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        Scaling::Homogeneous { alpha: self.alpha }
    }
    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        let u2 = x[0] * x[0] + x[1] * x[1];
        let z2 = x[2] * x[2];
        let v: f64 = self.sines.iter().map(|s| (s * u2 + z2).powf(-0.5 * self.alpha)).sum();
        v + self.k_n * u2.powf(-0.5 * self.alpha)
    }
    fn partial_x(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let a = self.alpha;
        let u2 = x[0] * x[0] + x[1] * x[1];
        let z2 = x[2] * x[2];
        let mut fu = 0.0;
        let mut fz = 0.0;
        for s in &self.sines {
            let q = (s * u2 + z2).powf(-0.5 * a - 1.0);
            fu -= a * s * q;
            fz -= a * q;
        }
        fu -= a * self.k_n * u2.powf(-0.5 * a - 1.0);
        out[0] = fu * x[0];
        out[1] = fu * x[1];
        out[2] = fz * x[2];
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        x[0].hypot(x[1])
    }
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        Some(vec![Subspace::from_spanning(&self.metric, &[vec![0.0, 0.0, 1.0]]).expect("axis")])
    }
    fn approach_params(&self, zeta: &[f64], delta: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        // closest approach to the ζ-axis
        let uu = zeta[0] * zeta[0] + zeta[1] * zeta[1];
        if uu > 0.0 {
            let s = -(zeta[0] * delta[0] + zeta[1] * delta[1]) / uu;
            if s > 0.0 {
                out.push(s);
            }
        }
        let zz: f64 = zeta.iter().map(|v| v * v).sum();
        let s = -zeta.iter().zip(delta).map(|(a, b)| a * b).sum::<f64>() / zz;
        if s > 0.0 {
            out.push(s);
        }
        out.sort_by(f64::total_cmp);
        out
    }
    fn cluster_part(&self, member: &Subspace) -> Option<Arc<dyn Potential>> {
        match member.dim() {
            0 => Some(Arc::new(self.clone())),
            // only the polygon term is singular along the ζ-axis
            1 => Some(Arc::new(PolygonTerm { k_n: self.k_n, alpha: self.alpha, metric: self.metric.clone() })),
            _ => None,
        }
    }
}

/// The `K(N)|u|^{-α}` term of [`HipHop`] alone.
#[derive(Debug, Clone)]
struct PolygonTerm {
    k_n: f64,
    alpha: f64,
    metric: MassMetric,
}

impl Potential for PolygonTerm {
    fn kind(&self) -> &str {
        "hip-hop-polygon"
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        Scaling::Homogeneous { alpha: self.alpha }
    }
    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        self.k_n * (x[0] * x[0] + x[1] * x[1]).powf(-0.5 * self.alpha)
    }
    fn partial_x(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let u2 = x[0] * x[0] + x[1] * x[1];
        let f = -self.alpha * self.k_n * u2.powf(-0.5 * self.alpha - 1.0);
        out[0] = f * x[0];
        out[1] = f * x[1];
        out[2] = 0.0;
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        x[0].hypot(x[1])
    }
}

pub type ShapeFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `U(x) = |x|^{-α} Ũ(x/|x|)` for a user-supplied angular profile `Ũ`.
///
/// The profile is called on unit configurations; its gradient is taken by
/// central differences of `y ↦ Ũ(y/|y|)`.
#[derive(Clone)]
pub struct AnisotropicHomogeneous {
    name: String,
    metric: MassMetric,
    alpha: f64,
    shape: ShapeFn,
    singular: Vec<Subspace>,
}

impl fmt::Debug for AnisotropicHomogeneous {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnisotropicHomogeneous")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("singular", &self.singular.len())
            .finish()
    }
}

impl AnisotropicHomogeneous {
    /// `singular` lists the subspaces on which the profile blows up; the
    /// origin is always singular.
    pub fn new(name: &str, metric: MassMetric, alpha: f64, shape: ShapeFn, singular: Vec<Subspace>) -> Result<Self> {
        check_alpha(alpha)?;
        let singular = if singular.is_empty() { vec![Subspace::zero(&metric)] } else { singular };
        Ok(Self { name: name.to_string(), metric, alpha, shape, singular })
    }

    fn profile(&self, y: &[f64]) -> f64 {
        let r = self.metric.norm(y);
        let s: Vec<f64> = y.iter().map(|v| v / r).collect();
        (self.shape)(&s)
    }
}

impl Potential for AnisotropicHomogeneous {
    fn kind(&self) -> &str {
        &self.name
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        Scaling::Homogeneous { alpha: self.alpha }
    }
    fn value(&self, _t: f64, x: &[f64]) -> f64 {
        self.metric.norm(x).powf(-self.alpha) * self.profile(x)
    }
    fn partial_x(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let r = self.metric.norm(x);
        let s: Vec<f64> = x.iter().map(|v| v / r).collect();
        let g0 = self.profile(&s);
        let h = 1e-6;
        let ra = r.powf(-self.alpha);
        let mut y = s.clone();
        for k in 0..x.len() {
            y[k] = s[k] + h;
            let fp = self.profile(&y);
            y[k] = s[k] - h;
            let fm = self.profile(&y);
            y[k] = s[k];
            let dg = (fp - fm) / (2.0 * h);
            out[k] = ra * dg / r - self.alpha * ra * g0 * self.metric.coord_mass(k) * x[k] / (r * r);
        }
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        self.singular.iter().map(|v| v.distance(x)).fold(f64::INFINITY, f64::min)
    }
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        Some(self.singular.clone())
    }
}

pub type ValueFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type DistanceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type PartialFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// A potential given entirely by closures. Without a partials closure the
/// gradient is taken by central differences.
#[derive(Clone)]
pub struct CustomPotential {
    name: String,
    metric: MassMetric,
    scaling: Scaling,
    value: ValueFn,
    distance: DistanceFn,
    partial: Option<PartialFn>,
    log_coefficient: f64,
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential").field("name", &self.name).field("scaling", &self.scaling).finish()
    }
}

impl CustomPotential {
    pub fn new(name: &str, metric: MassMetric, scaling: Scaling, value: ValueFn, distance: DistanceFn) -> Self {
        Self { name: name.to_string(), metric, scaling, value, distance, partial: None, log_coefficient: 0.0 }
    }

    pub fn with_partial(mut self, partial: PartialFn) -> Self {
        self.partial = Some(partial);
        self
    }

    pub fn with_log_coefficient(mut self, m: f64) -> Self {
        self.log_coefficient = m;
        self
    }
}

impl Potential for CustomPotential {
    fn kind(&self) -> &str {
        &self.name
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        self.scaling
    }
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        (self.value)(t, x)
    }
    fn partial_x(&self, t: f64, x: &[f64], out: &mut [f64]) {
        if let Some(p) = &self.partial {
            return p(t, x, out);
        }
        let scale = self.metric.norm(x).max(1e-300);
        let h = 1e-6 * scale;
        let mut y = x.to_vec();
        for k in 0..x.len() {
            y[k] = x[k] + h;
            let fp = (self.value)(t, &y);
            y[k] = x[k] - h;
            let fm = (self.value)(t, &y);
            y[k] = x[k];
            out[k] = (fp - fm) / (2.0 * h);
        }
    }
    fn singular_distance(&self, x: &[f64]) -> f64 {
        (self.distance)(x)
    }
    fn log_coefficient(&self, _t: f64) -> f64 {
        self.log_coefficient
    }
}

/// The zero potential.
#[derive(Debug, Clone)]
pub struct FreePotential {
    metric: MassMetric,
}

impl FreePotential {
    pub fn new(metric: MassMetric) -> Self {
        Self { metric }
    }
}

impl Potential for FreePotential {
    fn kind(&self) -> &str {
        "free"
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn scaling(&self) -> Scaling {
        Scaling::Free
    }
    fn value(&self, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }
    fn partial_x(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn singular_distance(&self, _x: &[f64]) -> f64 {
        f64::INFINITY
    }
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        Some(Vec::new())
    }
}
