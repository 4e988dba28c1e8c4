use serde::{Deserialize, Serialize};
use singlab::asymptotics::{detect_collisions, DetectSettings};
use singlab::integrator::{IntegratorRegistry, IntegratorSettings};

use super::{diagnostics_series, finite_min, trajectory_series, Context, Experiment};
use crate::config::InitialData;
use crate::error::CliResult;
use crate::output::Artifacts;

pub struct Simulate;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    initial: InitialData,
    #[serde(default = "default_integrator")]
    integrator: String,
    #[serde(default)]
    settings: IntegratorSettings,
    #[serde(default)]
    detect: DetectSettings,
}

pub(super) fn default_integrator() -> String {
    "dop853".into()
}

#[derive(Serialize)]
struct Summary {
    experiment: &'static str,
    method: String,
    samples: usize,
    accepted: usize,
    rejected: usize,
    t_final: f64,
    halted_on_collision: bool,
    max_energy_drift: f64,
    min_lagrange_jacobi_margin: Option<f64>,
    collisions: usize,
}

impl Experiment for Simulate {
    fn name(&self) -> &'static str {
        "integrate"
    }

    fn command(&self) -> &'static str {
        "simulate"
    }

    fn run(&self, ctx: &Context) -> CliResult<Artifacts> {
        let spec = ctx.config.spec()?;
        let p: Params = ctx.config.params()?;
        p.initial.check(&spec)?;
        let integrator = IntegratorRegistry::default().get(&p.integrator)?;
        let span = (p.initial.t_span[0], p.initial.t_span[1]);
        let sol = integrator.integrate(&spec, &p.initial.x0, &p.initial.v0, span, &p.settings)?;
        ctx.note(format!("{} samples, {} accepted / {} rejected steps", sol.len(), sol.accepted, sol.rejected));
        let collisions = detect_collisions(&sol, &spec, &p.detect)?;
        let diag = diagnostics_series(&sol, &spec);
        let summary = Summary {
            experiment: self.name(),
            method: sol.method.clone(),
            samples: sol.len(),
            accepted: sol.accepted,
            rejected: sol.rejected,
            t_final: sol.last().0,
            halted_on_collision: sol.halted_on_collision(),
            max_energy_drift: sol.max_energy_drift(&spec),
            min_lagrange_jacobi_margin: finite_min(&diag.columns[2].1),
            collisions: collisions.len(),
        };
        Ok(Artifacts::new(summary)?
            .with_events(serde_json::json!({"integration": sol.events, "collisions": collisions}))?
            .with_series(trajectory_series(&sol))
            .with_series(diag))
    }
}
