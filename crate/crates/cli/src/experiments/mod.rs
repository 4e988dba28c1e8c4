//! Experiment pipelines, selected by name at runtime.

mod assumptions;
mod averaging;
mod minimize;
mod reduce;
mod simulate;
mod sundman;

use std::collections::BTreeMap;
use std::sync::Arc;

use singlab::integrator::OdeSolution;
use singlab::PotentialSpec;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Artifacts, Series};

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub verbose: bool,
}

impl Context<'_> {
    pub fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[singlab] {}", msg.as_ref());
        }
    }
}

pub trait Experiment: Send + Sync {
    /// Value of the config `experiment` field.
    fn name(&self) -> &'static str;
    /// Subcommand running it.
    fn command(&self) -> &'static str;
    fn run(&self, ctx: &Context) -> CliResult<Artifacts>;
}

pub struct ExperimentRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Experiment>>,
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register(Arc::new(simulate::Simulate));
        r.register(Arc::new(minimize::Minimize));
        r.register(Arc::new(sundman::Sundman));
        r.register(Arc::new(averaging::Averaging));
        r.register(Arc::new(assumptions::Assumptions));
        r.register(Arc::new(reduce::Reduce));
        r
    }
}

impl ExperimentRegistry {
    pub fn register(&mut self, e: Arc<dyn Experiment>) {
        self.entries.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> CliResult<Arc<dyn Experiment>> {
        self.entries
            .values()
            .find(|e| e.name() == name || e.command() == name)
            .cloned()
            .ok_or_else(|| CliError::Config(format!("unknown experiment `{name}`; known: {}", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

fn trajectory_series(sol: &OdeSolution) -> Series {
    let m = &sol.metric;
    let mut s = Series::new("trajectory").column("t", sol.times.clone());
    for (label, data) in [("x", &sol.x), ("v", &sol.v)] {
        for i in 0..m.bodies() {
            for a in 0..m.dim() {
                let k = i * m.dim() + a;
                s = s.column(&format!("{label}_{}_{}", i + 1, a + 1), data.iter().map(|p| p[k]).collect());
            }
        }
    }
    s
}

fn diagnostics_series(sol: &OdeSolution, spec: &PotentialSpec) -> Series {
    Series::new("diagnostics")
        .column("t", sol.times.clone())
        .column("energy", sol.energy(spec))
        .column("lagrange_jacobi_margin", sol.lagrange_jacobi_margin(spec))
}

fn finite_min(v: &[f64]) -> Option<f64> {
    v.iter().copied().filter(|x| x.is_finite()).reduce(f64::min)
}
