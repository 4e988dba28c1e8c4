//! Singular potentials `U(t, x)`, their mass-metric gradients, time
//! derivatives and limiting potentials `Ũ`, plus sampled verification of
//! the structural assumptions.
//!
//! Every concrete kind implements [`Potential`]; a [`PotentialSpec`] wraps a
//! shared handle together with the assumption constants and the
//! singularity floor, and is what the rest of the crate consumes. Kinds are
//! constructed from JSON documents through [`PotentialRegistry`].

mod assumptions;
mod kinds;
mod registry;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use assumptions::{AssumptionEntry, AssumptionReport, CheckSettings, FittedConstants, Sampler};
pub use kinds::{
    hip_hop_constant, AnisotropicHomogeneous, CentralLog, CentralPower, CustomPotential, FreePotential,
    HipHop, PairLog, PairPower, QuadraticForm, SubspaceDistance,
};
pub use registry::{PotentialBuilder, PotentialDoc, PotentialRegistry};

use crate::error::{Error, Result};
use crate::metric::MassMetric;
use crate::subspace::Subspace;

/// Default relative singularity floor.
pub const SINGULARITY_FLOOR: f64 = 1e-13;

/// How a potential scales near the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Scaling {
    /// `U(λx) = λ^{-α} U(x)`.
    Homogeneous { alpha: f64 },
    /// Leading `α`-homogeneous part plus a weaker `β`-homogeneous one.
    QuasiHomogeneous { alpha: f64, beta: f64 },
    /// `U(λx) = U(x) - M(t) log λ`.
    Logarithmic,
    /// No singular part.
    Free,
}

impl Scaling {
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Scaling::Homogeneous { alpha } | Scaling::QuasiHomogeneous { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self, Scaling::Logarithmic)
    }
}

/// A singular potential on `R^{nd}`.
///
/// `value` and `partial_x` return raw values: `+∞` (or non-finite
/// partials) on the singular set, no floor check. Partials are Euclidean
/// covectors `∂U/∂x`; [`PotentialSpec::gradient`] raises them with the mass
/// metric.
pub trait Potential: Send + Sync + Debug {
    fn kind(&self) -> &str;
    fn metric(&self) -> &MassMetric;
    fn scaling(&self) -> Scaling;

    fn value(&self, t: f64, x: &[f64]) -> f64;
    fn partial_x(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn partial_t(&self, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }

    fn is_time_dependent(&self) -> bool {
        false
    }

    /// Mass-metric distance from `x` to the singular set (`∞` when empty).
    fn singular_distance(&self, x: &[f64]) -> f64;

    /// The singular set as a finite union of subspaces, when it is one.
    fn singular_subspaces(&self) -> Option<Vec<Subspace>> {
        None
    }

    /// `M(t)` for logarithmic kinds, `0` otherwise.
    fn log_coefficient(&self, _t: f64) -> f64 {
        0.0
    }

    /// `dM/dt` for logarithmic kinds.
    fn log_coefficient_rate(&self, _t: f64) -> f64 {
        0.0
    }

    /// The limiting potential extended off the ellipsoid: `|x|^{-α}Ũ(t,s)`
    /// or `Ũ(t,s) - M(t) log|x|`.
    fn limit_value(&self, t: f64, x: &[f64]) -> f64 {
        match self.scaling() {
            Scaling::Free => 0.0,
            _ => self.value(t, x),
        }
    }

    /// Euclidean partials of [`limit_value`](Self::limit_value).
    fn limit_partial(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self.scaling() {
            Scaling::Free => out.iter_mut().for_each(|v| *v = 0.0),
            _ => self.partial_x(t, x, out),
        }
    }

    /// Parameters `σ = t^p > 0` at which the ray `σ ζ + δ` comes closest
    /// to a component of the singular set; used as quadrature breakpoints.
    fn approach_params(&self, zeta: &[f64], delta: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(subs) = self.singular_subspaces() {
            for v in subs {
                let wz = v.complement(zeta);
                let wd = v.complement(delta);
                let m = self.metric();
                let nz = m.norm_sq(&wz);
                if nz > 0.0 {
                    let s = -m.dot(&wz, &wd) / nz;
                    if s > 0.0 && s.is_finite() {
                        out.push(s);
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
        out
    }

    /// The part of the potential that only depends on `w_μ(x)` near the
    /// collision subspace `member`, when the kind knows it.
    fn cluster_part(&self, _member: &Subspace) -> Option<Arc<dyn Potential>> {
        None
    }
}

/// Assumption constants attached to a spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// (U1) bound; `None` leaves `∂U/∂t` unchecked.
    pub c1: Option<f64>,
    pub c2: f64,
    pub gamma: f64,
    /// Relaxed exponent of (U2); defaults to `(α+2)/2`.
    pub alpha_tilde: Option<f64>,
}

impl Default for Constants {
    fn default() -> Self {
        Self { c1: None, c2: 0.0, gamma: 1.0, alpha_tilde: None }
    }
}

/// A potential together with its constants and evaluation floor.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    potential: Arc<dyn Potential>,
    pub constants: Constants,
    pub floor: f64,
}

impl PotentialSpec {
    pub fn new(potential: Arc<dyn Potential>) -> Self {
        Self { potential, constants: Constants::default(), floor: SINGULARITY_FLOOR }
    }

    pub fn with_constants(mut self, constants: Constants) -> Self {
        self.constants = constants;
        self
    }

    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }

    pub fn metric(&self) -> &MassMetric {
        self.potential.metric()
    }

    pub fn size(&self) -> usize {
        self.metric().size()
    }

    pub fn scaling(&self) -> Scaling {
        self.potential.scaling()
    }

    pub fn alpha(&self) -> Option<f64> {
        self.scaling().alpha()
    }

    /// `α̃` of (U2): user value or `(α+2)/2`; logarithmic kinds use 1.
    pub fn alpha_tilde(&self) -> f64 {
        self.constants.alpha_tilde.unwrap_or_else(|| match self.alpha() {
            Some(a) => 0.5 * (a + 2.0),
            None => 1.0,
        })
    }

    pub fn is_singular(&self, x: &[f64]) -> bool {
        let d = self.potential.singular_distance(x);
        d <= self.floor * (1.0 + self.metric().norm(x))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.size() {
            return Err(Error::InvalidInput(format!(
                "configuration has length {}, expected {}",
                x.len(),
                self.size()
            )));
        }
        if self.is_singular(x) {
            return Err(Error::singular());
        }
        Ok(())
    }

    /// `U(t, x)`.
    pub fn evaluate(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.potential.value(t, x))
    }

    /// Mass-metric gradient `M^{-1} ∂U/∂x`.
    pub fn gradient(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut g = vec![0.0; x.len()];
        self.potential.partial_x(t, x, &mut g);
        self.metric().raise(&mut g);
        Ok(g)
    }

    /// Euclidean covector `∂U/∂x`.
    pub fn partial_x(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut g = vec![0.0; x.len()];
        self.potential.partial_x(t, x, &mut g);
        Ok(g)
    }

    /// `∂U/∂t`, checked against (U1) when `C₁` is set.
    pub fn partial_t(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        if !self.potential.is_time_dependent() {
            return Ok(0.0);
        }
        let dt = self.potential.partial_t(t, x);
        if let Some(c1) = self.constants.c1 {
            let u = self.potential.value(t, x);
            if dt.abs() > c1 * (u + 1.0) * (1.0 + 1e-12) {
                return Err(Error::violation(
                    "U1",
                    format!("|∂U/∂t| = {} exceeds C1 (U + 1) = {}", dt.abs(), c1 * (u + 1.0)),
                ));
            }
        }
        Ok(dt)
    }

    /// `Ũ(t, s)` on the ellipsoid (any nonzero `s` is read through the
    /// homogeneous or logarithmic extension).
    pub fn limit_potential(&self, t: f64, s: &[f64]) -> Result<f64> {
        if s.len() != self.size() {
            return Err(Error::InvalidInput("direction has wrong length".into()));
        }
        if self.is_singular(s) {
            return Err(Error::SingularDirection);
        }
        Ok(self.potential.limit_value(t, s))
    }

    /// Mass-metric gradient of the extended limit potential.
    pub fn limit_gradient(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if self.is_singular(x) {
            return Err(Error::SingularDirection);
        }
        let mut g = vec![0.0; x.len()];
        self.potential.limit_partial(t, x, &mut g);
        self.metric().raise(&mut g);
        Ok(g)
    }

    /// Tangential gradient `∇_T Ũ(t, s)` on the ellipsoid.
    pub fn limit_tangential_gradient(&self, t: f64, s: &[f64]) -> Result<Vec<f64>> {
        let g = self.limit_gradient(t, s)?;
        Ok(tangential(self.metric(), &g, s))
    }

    /// `M(t)` for logarithmic kinds.
    pub fn log_coefficient(&self, t: f64) -> f64 {
        self.potential.log_coefficient(t)
    }

    pub fn singular_distance(&self, x: &[f64]) -> f64 {
        self.potential.singular_distance(x)
    }
}

/// Component of `g` tangent to the sphere through `s` (mass metric).
pub fn tangential(metric: &MassMetric, g: &[f64], s: &[f64]) -> Vec<f64> {
    let ss = metric.norm_sq(s);
    let c = metric.dot(g, s) / ss;
    g.iter().zip(s).map(|(a, b)| a - c * b).collect()
}

#[cfg(test)]
mod tests;
