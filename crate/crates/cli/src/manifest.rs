use std::io::Write;
use std::path::Path;

use serde::Serialize;

/// Record of one invocation, kept next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: Status,
    pub code_version: String,
    pub precision: String,
    /// Effective configuration in the text format accepted by `--config`.
    pub config: String,
    pub started_unix_s: f64,
    pub finished_unix_s: Option<f64>,
    pub predicted_bytes: u64,
    pub factorization_s: Option<f64>,
    pub per_step_s: Option<f64>,
    pub steps: Option<usize>,
    pub wall_s: Option<f64>,
    pub r_final: Option<f64>,
    pub stationary_at_s: Option<f64>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    pub error: Option<String>,
    /// Per-point timing of a sweep; empty for single runs.
    pub points: Vec<PointTiming>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointTiming {
    pub axis_value: String,
    pub wall_s: f64,
    pub factorization_s: f64,
    pub per_step_s: f64,
    pub steps: usize,
    pub shared_factorization: bool,
}

impl Manifest {
    pub fn new(command: &str, precision: &str, config: String, predicted_bytes: u64) -> Self {
        Self {
            command: command.to_string(),
            status: Status::Running,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            precision: precision.to_string(),
            config,
            started_unix_s: crate::unix_time(),
            finished_unix_s: None,
            predicted_bytes,
            factorization_s: None,
            per_step_s: None,
            steps: None,
            wall_s: None,
            r_final: None,
            stationary_at_s: None,
            warnings: Vec::new(),
            outputs: Vec::new(),
            error: None,
            points: Vec::new(),
        }
    }

    pub fn finish(&mut self, error: Option<String>) {
        self.finished_unix_s = Some(crate::unix_time());
        self.wall_s = self.finished_unix_s.map(|t| t - self.started_unix_s);
        self.status = if error.is_some() {
            Status::Failed
        } else {
            Status::Complete
        };
        self.error = error;
    }

    /// Writes to a temporary sibling and renames it over `path`, so readers
    /// never see a partially written manifest.
    pub fn write_atomic(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
        tmp_name.push(".tmp");
        let tmp = path.with_file_name(tmp_name);
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(json.as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)
    }
}
