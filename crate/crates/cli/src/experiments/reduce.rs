use serde::{Deserialize, Serialize};
use singlab::asymptotics::{detect_collisions, events_isolated, CollisionKind, DetectSettings, SundmanFit};
use singlab::clusters::{build_lattice, reduce_partial_collision};
use singlab::integrator::{IntegratorRegistry, IntegratorSettings};

use super::simulate::default_integrator;
use super::sundman::{fit_event, fit_series};
use super::{Context, Experiment};
use crate::config::InitialData;
use crate::error::{CliError, CliResult};
use crate::output::{Artifacts, Series};

pub struct Reduce;

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

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    t_star: f64,
    cluster: Option<Vec<Vec<usize>>>,
    member: usize,
    identity: bool,
    p_second_difference_max: f64,
    expected_exponent: Option<f64>,
    reduced_exponent: Option<f64>,
    events_isolated: bool,
    reduced_fit: &'a SundmanFit,
}

impl Experiment for Reduce {
    fn name(&self) -> &'static str {
        "reduce"
    }

    fn command(&self) -> &'static str {
        "reduce-partial"
    }

    fn run(&self, ctx: &Context) -> CliResult<Artifacts> {
        let spec = ctx.config.spec()?;
        let p: Params = ctx.config.params()?;
        p.initial.check(&spec)?;
        let integrator = IntegratorRegistry::default().get(&p.integrator)?;
        let span = (p.initial.t_span[0], p.initial.t_span[1]);
        let sol = integrator.integrate(&spec, &p.initial.x0, &p.initial.v0, span, &p.settings)?;
        let events = detect_collisions(&sol, &spec, &p.detect)?;
        let event = events
            .iter()
            .find(|e| e.kind == CollisionKind::Partial)
            .or_else(|| events.first())
            .ok_or_else(|| CliError::Numerical("no collision detected".into()))?;
        let lattice = build_lattice(&spec)?;
        let red = reduce_partial_collision(&sol, event, &lattice, &spec)?;
        let reduced_events = detect_collisions(&red.window, &red.spec, &p.detect)?;
        let reduced_event = reduced_events
            .iter()
            .find(|e| e.kind == CollisionKind::Total)
            .ok_or_else(|| CliError::Numerical("reduced solution shows no total collision".into()))?;
        let fit = fit_event(reduced_event, &red.window, &red.spec)?;
        ctx.note(format!("reduced exponent {:?}", fit.exponent));
        let window = fit.series.tau.iter().copied().fold(0.0, f64::max);
        let summary = Summary {
            experiment: self.name(),
            t_star: event.t_star,
            cluster: event.cluster.clone(),
            member: red.member,
            identity: red.identity,
            p_second_difference_max: red.p_second_difference_max,
            expected_exponent: red.spec.alpha().map(|a| 2.0 / (2.0 + a)),
            reduced_exponent: fit.exponent,
            events_isolated: events_isolated(&events, window),
            reduced_fit: &fit,
        };
        let m = &red.window.metric;
        let radius = Series::new("reduced")
            .column("t", red.window.times.clone())
            .column("w_norm", red.window.x.iter().map(|w| m.norm(w)).collect())
            .column("p_norm", red.p.iter().map(|p| m.norm(p)).collect());
        Ok(Artifacts::new(summary)?
            .with_events(serde_json::json!({"full": events, "reduced": reduced_events}))?
            .with_series(radius)
            .with_series(fit_series(&fit)))
    }
}
