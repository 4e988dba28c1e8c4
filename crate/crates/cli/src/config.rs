use std::path::{Path, PathBuf};

use serde::Deserialize;
use singlab::potentials::{PotentialDoc, PotentialRegistry};
use singlab::PotentialSpec;

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

/// A parsed configuration file.
///
/// ```json
/// {"version": 1, "experiment": "sundman", "seed": 7,
///  "potential": {"kind": "one-center", "alpha": 1.0, "dim": 2},
///  "params": {"x0": [1, 0], "v0": [-1.414, 0], "t_span": [0, 1]}}
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub potential: Option<PotentialDoc>,
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!("unsupported config version {} (expected {CONFIG_VERSION})", cfg.version)));
        }
        Ok(cfg)
    }

    pub fn params<T: serde::de::DeserializeOwned>(&self) -> CliResult<T> {
        serde_json::from_value(self.params.clone()).map_err(|e| CliError::Config(format!("params: {e}")))
    }

    pub fn spec(&self) -> CliResult<PotentialSpec> {
        let doc = self.potential.as_ref().ok_or_else(|| CliError::Config("missing `potential`".into()))?;
        Ok(PotentialRegistry::default().build(doc)?)
    }

    pub fn resolve(&self, file: &str) -> PathBuf {
        self.base_dir.join(file)
    }
}

/// Positions and velocities with the integration span.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub t_span: [f64; 2],
}

impl InitialData {
    pub fn check(&self, spec: &PotentialSpec) -> CliResult<()> {
        let n = spec.size();
        if self.x0.len() != n || self.v0.len() != n {
            return Err(CliError::Config(format!(
                "initial data has lengths {}/{}, the potential needs {n}",
                self.x0.len(),
                self.v0.len()
            )));
        }
        if !(self.t_span[1] != self.t_span[0]) {
            return Err(CliError::Config("empty `t_span`".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse(r#"{"version": 1, "colour": 3}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"version": 2}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"experiment": "averaging"}"#).is_err());
        let cfg = ExperimentConfig::parse(r#"{"version": 1, "potential": {"kind": "one-center", "alpha": 1}}"#).unwrap();
        assert_eq!(cfg.spec().unwrap().alpha(), Some(1.0));
    }
}
