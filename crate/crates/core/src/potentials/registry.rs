use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kinds::{
    CentralLog, CentralPower, FreePotential, HipHop, PairLog, PairPower, QuadraticForm, SubspaceDistance,
};
use super::{Constants, Potential, PotentialSpec};
use crate::error::{Error, Result};
use crate::metric::MassMetric;
use crate::spline::{SplineDoc, TimeFunction};
use crate::subspace::Subspace;

/// JSON form of a potential.
///
/// ```json
/// {"kind": "nbody", "alpha": 1.0, "dim": 2, "masses": [1, 1, 1],
///  "constants": {"C1": null, "C2": 0.0, "gamma": 1.0}}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialDoc {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Ambient dimension `d` of each body.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    /// Time-dependent coupling masses, one spline per body.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_poly: Option<Vec<SplineDoc>>,
    #[serde(default, rename = "M_poly", skip_serializing_if = "Option::is_none")]
    pub m_poly: Option<SplineDoc>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m_const: Option<f64>,
    /// Each entry is a list of spanning vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspaces: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Quasi-homogeneous base: `"one-center"` (default) or `"nbody"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    /// Polygon order `N` of the hip-hop reduced potential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_gon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsDoc {
    #[serde(default, rename = "C1")]
    pub c1: Option<f64>,
    #[serde(default, rename = "C2")]
    pub c2: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub alpha_tilde: Option<f64>,
}

impl PotentialDoc {
    fn require_alpha(&self) -> Result<f64> {
        self.alpha.ok_or_else(|| Error::Config(format!("kind `{}` requires `alpha`", self.kind)))
    }

    fn metric(&self, default_bodies: usize) -> Result<MassMetric> {
        let dim = self.dim.unwrap_or(2);
        let masses = match (&self.masses, &self.mass_poly) {
            (Some(m), _) => m.clone(),
            (None, Some(p)) => p.iter().map(|s| TimeFunction::from_doc(s).map(|f| f.value(0.0))).collect::<Result<_>>()?,
            (None, None) => vec![1.0; default_bodies],
        };
        MassMetric::new(masses, dim)
    }

    fn couplings(&self, metric: &MassMetric) -> Result<Vec<TimeFunction>> {
        match &self.mass_poly {
            Some(polys) => {
                if polys.len() != metric.bodies() {
                    return Err(Error::Config("`mass_poly` needs one entry per body".into()));
                }
                polys.iter().map(TimeFunction::from_doc).collect()
            }
            None => Ok(metric.masses().iter().map(|m| TimeFunction::Constant(*m)).collect()),
        }
    }

    fn log_coefficient(&self) -> Result<TimeFunction> {
        match (&self.m_poly, self.m_const) {
            (Some(p), _) => TimeFunction::from_doc(p),
            (None, Some(m)) => Ok(TimeFunction::Constant(m)),
            (None, None) => Ok(TimeFunction::Constant(1.0)),
        }
    }

    fn power_terms(&self) -> Result<Vec<(f64, f64)>> {
        let alpha = self.require_alpha()?;
        let mut terms = vec![(1.0, alpha)];
        if let Some(beta) = self.beta {
            terms.push((self.lambda.unwrap_or(1.0), beta));
        }
        Ok(terms)
    }

    fn subspace_list(&self, metric: &MassMetric) -> Result<Vec<Subspace>> {
        let subs = self
            .subspaces
            .as_ref()
            .ok_or_else(|| Error::Config(format!("kind `{}` requires `subspaces`", self.kind)))?;
        subs.iter().map(|vs| Subspace::from_spanning(metric, vs)).collect()
    }

    fn constants(&self) -> Constants {
        let mut c = Constants::default();
        if let Some(doc) = &self.constants {
            c.c1 = doc.c1;
            if let Some(v) = doc.c2 {
                c.c2 = v;
            }
            if let Some(v) = doc.gamma {
                c.gamma = v;
            }
            c.alpha_tilde = doc.alpha_tilde;
        }
        c
    }
}

pub type PotentialBuilder = Arc<dyn Fn(&PotentialDoc) -> Result<Arc<dyn Potential>> + Send + Sync>;

/// Name-keyed registry of potential kinds.
pub struct PotentialRegistry {
    builders: BTreeMap<String, PotentialBuilder>,
}

impl Default for PotentialRegistry {
    fn default() -> Self {
        let mut r = Self { builders: BTreeMap::new() };
        r.register("nbody", |doc| {
            let metric = doc.metric(2)?;
            let couplings = doc.couplings(&metric)?;
            Ok(Arc::new(PairPower::with_couplings(metric, couplings, vec![(1.0, doc.require_alpha()?)])?))
        });
        r.register("one-center", |doc| {
            Ok(Arc::new(CentralPower::new(doc.metric(1)?, vec![(1.0, doc.require_alpha()?)])?))
        });
        r.register("quasi-homogeneous", |doc| {
            if doc.beta.is_none() {
                return Err(Error::Config("quasi-homogeneous kind requires `beta`".into()));
            }
            match doc.base.as_deref().unwrap_or("one-center") {
                "one-center" => Ok(Arc::new(CentralPower::new(doc.metric(1)?, doc.power_terms()?)?)),
                "nbody" => {
                    let metric = doc.metric(2)?;
                    let couplings = doc.couplings(&metric)?;
                    Ok(Arc::new(PairPower::with_couplings(metric, couplings, doc.power_terms()?)?))
                }
                other => Err(Error::Config(format!("unknown quasi-homogeneous base `{other}`"))),
            }
        });
        r.register("log-nbody", |doc| {
            let metric = doc.metric(2)?;
            let couplings = doc.couplings(&metric)?;
            Ok(Arc::new(PairLog::with_couplings(metric, couplings)?))
        });
        r.register("log-one-center", |doc| Ok(Arc::new(CentralLog::new(doc.metric(1)?, doc.log_coefficient()?)?)));
        r.register("quadratic-form", |doc| {
            let matrix = doc.matrix.clone().ok_or_else(|| Error::Config("quadratic-form requires `matrix`".into()))?;
            Ok(Arc::new(QuadraticForm::new(doc.metric(1)?, doc.require_alpha()?, matrix)?))
        });
        let subspace_builder = |doc: &PotentialDoc, alpha: Option<f64>| -> Result<Arc<dyn Potential>> {
            let metric = doc.metric(1)?;
            let subs = doc.subspace_list(&metric)?;
            let weights = doc.weights.clone().unwrap_or_else(|| vec![1.0; subs.len()]);
            if weights.len() != subs.len() {
                return Err(Error::Config("`weights` must match `subspaces`".into()));
            }
            Ok(Arc::new(SubspaceDistance::new(metric, alpha, weights.into_iter().zip(subs).collect())?))
        };
        r.register("subspace-distance", move |doc| subspace_builder(doc, Some(doc.require_alpha()?)));
        r.register("log-subspace-distance", move |doc| subspace_builder(doc, None));
        r.register("hip-hop", |doc| {
            let n = doc.n_gon.ok_or_else(|| Error::Config("hip-hop requires `n_gon`".into()))?;
            Ok(Arc::new(HipHop::new(n, doc.require_alpha()?)?))
        });
        r.register("free", |doc| Ok(Arc::new(FreePotential::new(doc.metric(1)?))));
        r
    }
}

impl PotentialRegistry {
    pub fn register<F>(&mut self, name: &str, builder: F)
    where
        F: Fn(&PotentialDoc) -> Result<Arc<dyn Potential>> + Send + Sync + 'static,
    {
        self.builders.insert(name.to_string(), Arc::new(builder));
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }

    pub fn build(&self, doc: &PotentialDoc) -> Result<PotentialSpec> {
        let builder = self
            .builders
            .get(&doc.kind)
            .ok_or_else(|| Error::UnknownName { registry: "potential", name: doc.kind.clone() })?;
        let potential = builder(doc)?;
        let mut spec = PotentialSpec::new(potential).with_constants(doc.constants());
        if let Some(f) = doc.floor {
            spec.floor = f;
        }
        Ok(spec)
    }

    pub fn from_json(&self, text: &str) -> Result<PotentialSpec> {
        let doc: PotentialDoc = serde_json::from_str(text)?;
        self.build(&doc)
    }
}
