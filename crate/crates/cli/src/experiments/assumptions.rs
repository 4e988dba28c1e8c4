use serde::{Deserialize, Serialize};
use singlab::potentials::{AssumptionReport, CheckSettings, FittedConstants};

use super::{Context, Experiment};
use crate::error::{CliError, CliResult};
use crate::output::{Artifacts, Series};

pub struct Assumptions;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    #[serde(default)]
    settings: CheckSettings,
    /// Also estimate the constants from the same sampler.
    #[serde(default)]
    fit_constants: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    kind: &'a str,
    all_passed: bool,
    report: &'a AssumptionReport,
    fitted_constants: Option<FittedConstants>,
}

impl Experiment for Assumptions {
    fn name(&self) -> &'static str {
        "assumptions"
    }

    fn command(&self) -> &'static str {
        "check-assumptions"
    }

    fn run(&self, ctx: &Context) -> CliResult<Artifacts> {
        let spec = ctx.config.spec()?;
        let mut p: Params = ctx.config.params()?;
        p.settings.sampler.seed = ctx.seed;
        let report = spec.check_assumptions(&p.settings);
        if !report.all_passed() {
            let lines: Vec<String> = report
                .failures()
                .iter()
                .map(|e| format!("{} (margin {:e}): {}", e.name, e.worst_margin, e.detail))
                .collect();
            return Err(CliError::Assumption(lines.join("; ")));
        }
        ctx.note(format!("{} assumptions checked", report.entries.len()));
        let fitted = p.fit_constants.then(|| spec.fit_constants(&p.settings.sampler));
        let margins = Series::new("margins")
            .column("index", (0..report.entries.len()).map(|k| k as f64).collect())
            .column("worst_margin", report.entries.iter().map(|e| e.worst_margin).collect())
            .column("samples", report.entries.iter().map(|e| e.samples as f64).collect());
        let summary =
            Summary { experiment: self.name(), kind: &report.kind, all_passed: true, report: &report, fitted_constants: fitted };
        Ok(Artifacts::new(summary)?.with_series(margins))
    }
}
