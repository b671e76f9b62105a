use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use laprop::harness::{trajectory_csv, StudyTrajectory};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance written next to the outputs of every invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Subcommand that produced the outputs, e.g. `bench rosenbrock`.
    pub command: String,
    /// Fully resolved configuration (defaults and overrides applied).
    pub config: serde_json::Value,
    pub rng_algorithm: String,
    pub seeds: Vec<u64>,
    /// Output files, relative to the output directory.
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<RunManifest, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.into(), message: e.to_string() })
    }
}

/// Collects the files written into one output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<OutputDir, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, relative: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(relative.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Config(format!("cannot serialize {relative}: {e}")))?;
        self.write(relative, &(text + "\n"))
    }

    pub fn write_trajectories(&mut self, trajectories: &[StudyTrajectory]) -> Result<(), CliError> {
        for t in trajectories {
            self.write(&format!("trajectories/{}.csv", sanitize(&t.label)), &trajectory_csv(&t.record))?;
        }
        Ok(())
    }

    pub fn finish(
        mut self,
        command: &str,
        config: serde_json::Value,
        seeds: Vec<u64>,
        elapsed: Duration,
    ) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            rng_algorithm: laprop::rng::RNG_ALGORITHM.to_string(),
            seeds,
            outputs: self.written.clone(),
            duration_secs: elapsed.as_secs_f64(),
        };
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(manifest)
    }
}

/// File-name-safe version of a label.
pub fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

pub fn float(x: f64) -> String {
    laprop::harness::format_float(x)
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}
