use serde::{Deserialize, Serialize};
use singlab::minimizer::{
    multistart_minimize, objective_el_residual, BoundaryCondition, DiscreteAction, MinimizeStatus, MinimizerSettings,
};
use singlab::regularization::EtaCutoff;
use singlab::trajectory::Path;

use super::{Context, Experiment};
use crate::error::{CliError, CliResult};
use crate::output::{Artifacts, Series};

pub struct Minimize;

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Boundary {
    #[default]
    Fixed,
    Periodic,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    t_span: [f64; 2],
    /// Number of grid cells.
    cells: usize,
    #[serde(default)]
    start: Option<Vec<f64>>,
    #[serde(default)]
    end: Option<Vec<f64>>,
    /// CSV path (`t,x_1_1,...`) used as the initial guess instead of the
    /// straight segment; relative to the config file.
    #[serde(default)]
    init_path: Option<String>,
    #[serde(default)]
    boundary: Boundary,
    /// Replace `U` by the cut-off `U_ε`.
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    settings: MinimizerSettings,
    /// Amplitude of the random bumps used for extra starts.
    #[serde(default = "default_amplitude")]
    amplitude: f64,
}

fn default_amplitude() -> f64 {
    0.05
}

#[derive(Serialize)]
struct Summary {
    experiment: &'static str,
    action: f64,
    gradient_norm: f64,
    iterations: usize,
    status: MinimizeStatus,
    stationarity: f64,
    max_el_residual: f64,
    nodes: usize,
    epsilon: Option<f64>,
}

impl Experiment for Minimize {
    fn name(&self) -> &'static str {
        "minimize"
    }

    fn command(&self) -> &'static str {
        "minimize"
    }

    fn run(&self, ctx: &Context) -> CliResult<Artifacts> {
        let spec = ctx.config.spec()?;
        let p: Params = ctx.config.params()?;
        if p.cells < 2 {
            return Err(CliError::Config("`cells` must be at least 2".into()));
        }
        let metric = spec.metric().clone();
        let grid = Path::uniform_grid(p.t_span[0], p.t_span[1], p.cells);
        let init = match (&p.init_path, &p.start, &p.end) {
            (Some(file), _, _) => {
                let path = ctx.config.resolve(file);
                let f = std::fs::File::open(&path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let read = Path::read_csv(metric.clone(), f)?;
                if read.grid().len() != grid.len() {
                    return Err(CliError::Config(format!("`init_path` has {} samples, expected {}", read.len(), grid.len())));
                }
                Path::new(metric.clone(), grid.clone(), read.points().to_vec())?
            }
            (None, Some(a), Some(b)) => {
                if a.len() != metric.size() || b.len() != metric.size() {
                    return Err(CliError::Config(format!("`start`/`end` need {} coordinates", metric.size())));
                }
                Path::linear(metric.clone(), grid.clone(), a, b)?
            }
            _ => return Err(CliError::Config("give `init_path` or both `start` and `end`".into())),
        };
        let mut objective = DiscreteAction::new(spec.clone(), grid)?;
        if let Some(eps) = p.epsilon {
            objective = objective.with_cutoff(EtaCutoff::new(eps)?);
        }
        let bc = match p.boundary {
            Boundary::Fixed => BoundaryCondition::FixedEnds,
            Boundary::Periodic => BoundaryCondition::Periodic,
        };
        let settings = MinimizerSettings { seed: ctx.seed, ..p.settings };
        let res = multistart_minimize(&objective, &init, &bc, &settings, p.amplitude)?;
        ctx.note(format!("{:?} after {} iterations, action {}", res.status, res.iterations, res.action));
        if res.status != MinimizeStatus::Converged {
            return Err(CliError::Numerical(format!(
                "minimizer stopped with status {:?} (gradient {:e})",
                res.status, res.gradient_norm
            )));
        }
        let residual: Vec<f64> =
            objective_el_residual(&objective, &res.path, &bc)?.iter().map(|r| metric.norm(r)).collect();
        let summary = Summary {
            experiment: self.name(),
            action: res.action,
            gradient_norm: res.gradient_norm,
            iterations: res.iterations,
            status: res.status,
            stationarity: res.stationarity,
            max_el_residual: residual.iter().copied().fold(0.0, f64::max),
            nodes: res.path.len(),
            epsilon: p.epsilon,
        };
        let mut series = Series::new("path").column("t", res.path.grid().to_vec());
        for k in 0..metric.size() {
            let (i, a) = (k / metric.dim(), k % metric.dim());
            series = series.column(&format!("x_{}_{}", i + 1, a + 1), res.path.points().iter().map(|x| x[k]).collect());
        }
        Ok(Artifacts::new(summary)?
            .with_series(series)
            .with_series(Series::new("el_residual").column("residual", residual)))
    }
}
