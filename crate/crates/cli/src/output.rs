use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Named numeric columns destined for `series/<name>.csv`.
#[derive(Debug, Clone, Default)]
pub struct Series {
    pub name: String,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Series {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), columns: Vec::new() }
    }

    pub fn column(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push((name.to_string(), values));
        self
    }

    fn write(&self, path: &Path) -> CliResult<()> {
        let file = fs::File::create(path).map_err(io_err)?;
        let cols: Vec<(&str, &[f64])> = self.columns.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
        singlab::trajectory::write_series_csv(file, &cols).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Everything an experiment produces; nothing touches the disk until
/// [`Artifacts::write`].
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub summary: serde_json::Value,
    pub events: serde_json::Value,
    pub series: Vec<Series>,
}

impl Artifacts {
    pub fn new(summary: impl Serialize) -> CliResult<Self> {
        Ok(Self {
            summary: serde_json::to_value(summary)?,
            events: serde_json::Value::Array(Vec::new()),
            series: Vec::new(),
        })
    }

    pub fn with_events(mut self, events: impl Serialize) -> CliResult<Self> {
        self.events = serde_json::to_value(events)?;
        Ok(self)
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    /// Stage everything in a sibling directory, then move it into `out`.
    pub fn write(&self, out: &Path) -> CliResult<()> {
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => Path::new(".").to_path_buf(),
        };
        fs::create_dir_all(&parent).map_err(io_err)?;
        let stage = tempfile::Builder::new().prefix(".singlab-stage").tempdir_in(&parent).map_err(io_err)?;
        let root = stage.path();
        fs::create_dir(root.join("series")).map_err(io_err)?;
        write_json(&root.join("summary.json"), &self.summary)?;
        write_json(&root.join("events.json"), &self.events)?;
        for s in &self.series {
            s.write(&root.join("series").join(format!("{}.csv", s.name)))?;
        }
        if !out.exists() {
            fs::rename(root, out).map_err(io_err)?;
            return Ok(());
        }
        fs::create_dir_all(out.join("series")).map_err(io_err)?;
        for name in ["summary.json", "events.json"] {
            fs::rename(root.join(name), out.join(name)).map_err(io_err)?;
        }
        for s in &self.series {
            let file = format!("{}.csv", s.name);
            fs::rename(root.join("series").join(&file), out.join("series").join(&file)).map_err(io_err)?;
        }
        Ok(())
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err)
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Config(format!("output: {e}"))
}
