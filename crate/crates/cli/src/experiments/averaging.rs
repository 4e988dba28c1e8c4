use serde::{Deserialize, Serialize};
use singlab::variations::{variation_report, AveragingSettings, VariationReport, Verdict};

use super::{Context, Experiment};
use crate::error::{CliError, CliResult};
use crate::output::{Artifacts, Series};

pub struct Averaging;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    /// Taken from the potential when absent.
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    settings: AveragingSettings,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    alpha: f64,
    average_phi: f64,
    average_phi_check: f64,
    average_negative: bool,
    circle_average_s: f64,
    s_prediction: f64,
    delta_exponent: f64,
    verdict: Verdict,
    report: &'a VariationReport,
}

impl Experiment for Averaging {
    fn name(&self) -> &'static str {
        "averaging"
    }

    fn command(&self) -> &'static str {
        "averaging"
    }

    fn run(&self, ctx: &Context) -> CliResult<Artifacts> {
        let p: Params = ctx.config.params()?;
        let alpha = match (p.alpha, &ctx.config.potential) {
            (Some(a), _) => a,
            (None, Some(_)) => ctx
                .config
                .spec()?
                .alpha()
                .ok_or_else(|| CliError::Config("averaging needs a homogeneous potential".into()))?,
            (None, None) => return Err(CliError::Config("give `params.alpha` or a potential".into())),
        };
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(CliError::Config(format!("α = {alpha} outside (0, 2)")));
        }
        let report = variation_report(alpha, &p.settings)?;
        ctx.note(format!("average Φ = {} (check {})", report.average_phi, report.average_phi_check));
        let expo = 1.0 - alpha / 2.0;
        let scaled: Vec<f64> =
            report.delta_grid.iter().zip(&report.action_differentials).map(|(d, a)| a / d.powf(expo)).collect();
        let phi = Series::new("phi")
            .column("theta", report.phi_values.iter().map(|v| v.0).collect())
            .column("phi", report.phi_values.iter().map(|v| v.1).collect())
            .column("s", report.s_samples.iter().map(|v| v.1).collect());
        let action = Series::new("action")
            .column("delta", report.delta_grid.clone())
            .column("action_differential", report.action_differentials.clone())
            .column("scaled", scaled);
        let summary = Summary {
            experiment: self.name(),
            alpha,
            average_phi: report.average_phi,
            average_phi_check: report.average_phi_check,
            average_negative: report.average_phi < 0.0,
            circle_average_s: report.circle_average,
            s_prediction: report.s_prediction,
            delta_exponent: report.delta_exponent,
            verdict: report.verdict,
            report: &report,
        };
        Ok(Artifacts::new(summary)?.with_series(phi).with_series(action))
    }
}
