use serde::{Deserialize, Serialize};
use singlab::asymptotics::{
    detect_collisions, events_isolated, fit_sundman, fit_sundman_log, CollisionEvent, DetectSettings, SundmanFit,
};
use singlab::integrator::{IntegratorRegistry, IntegratorSettings, OdeSolution};
use singlab::PotentialSpec;

use super::simulate::default_integrator;
use super::{Context, Experiment};
use crate::config::InitialData;
use crate::error::{CliError, CliResult};
use crate::output::{Artifacts, Series};

pub struct Sundman;

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
    /// Which detected event to fit.
    #[serde(default)]
    event: usize,
    /// Largest accepted departure of the fitted exponent from `2/(2+α)`.
    #[serde(default)]
    band: Option<f64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    expected_exponent: Option<f64>,
    exponent: Option<f64>,
    events_isolated: bool,
    fit: &'a SundmanFit,
}

pub(super) fn fit_event(event: &CollisionEvent, sol: &OdeSolution, spec: &PotentialSpec) -> CliResult<SundmanFit> {
    Ok(if spec.scaling().is_log() { fit_sundman_log(event, sol, spec)? } else { fit_sundman(event, sol, spec)? })
}

pub(super) fn fit_series(fit: &SundmanFit) -> Series {
    let s = &fit.series;
    Series::new("fit")
        .column("tau", s.tau.clone())
        .column("r", s.r.clone())
        .column("rdot", s.rdot.clone())
        .column("ratio", s.ratio.clone())
        .column("kinetic", s.kinetic.clone())
        .column("potential", s.potential.clone())
        .column("phi", s.phi.clone())
}

impl Experiment for Sundman {
    fn name(&self) -> &'static str {
        "sundman"
    }

    fn command(&self) -> &'static str {
        "sundman-fit"
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
            .get(p.event)
            .ok_or_else(|| CliError::Numerical(format!("no collision event #{} ({} detected)", p.event, events.len())))?;
        ctx.note(format!("fitting event at t* ≈ {:.12}", event.t_star));
        let fit = fit_event(event, &sol, &spec)?;
        let expected = spec.alpha().map(|a| 2.0 / (2.0 + a));
        if let (Some(band), Some(e), Some(f)) = (p.band, expected, fit.exponent) {
            if (f - e).abs() > band {
                return Err(CliError::Numerical(format!("fitted exponent {f} departs from {e} by more than {band}")));
            }
        }
        let summary = Summary {
            experiment: self.name(),
            expected_exponent: expected,
            exponent: fit.exponent,
            events_isolated: events_isolated(&events, fit.series.tau.iter().copied().fold(0.0, f64::max)),
            fit: &fit,
        };
        Ok(Artifacts::new(summary)?.with_events(&events)?.with_series(fit_series(&fit)))
    }
}
