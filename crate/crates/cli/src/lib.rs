//! Library half of the `qreflect` command-line tool. The binary only parses
//! arguments and maps errors to exit codes; everything testable lives here.

pub mod manifest;
pub mod oracle;
pub mod run;
pub mod sweep;

use std::fmt;
use std::path::Path;

use qreflect::{memory_model_for, Error as CoreError, MemoryEstimate, SimConfig};

pub use run::{run_single, RunOptions, RunSummary};
pub use sweep::{run_sweep, SweepAxis, SweepOptions, SweepOutcome, SweepRow};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const RESOURCE: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

/// Floating-point width used for the propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }

    pub fn memory(self, n_x: usize, n_y: usize) -> MemoryEstimate {
        match self {
            Precision::F32 => memory_model_for::<f32>(n_x, n_y),
            Precision::F64 => memory_model_for::<f64>(n_x, n_y),
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f32" | "single" => Ok(Precision::F32),
            "f64" | "double" => Ok(Precision::F64),
            other => Err(format!("unknown precision `{other}` (expected f32 or f64)")),
        }
    }
}

/// A run was refused before any large allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceRefusal {
    pub predicted_bytes: u64,
    pub budget_bytes: u64,
}

impl fmt::Display for ResourceRefusal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "predicted memory {} bytes ({:.3} GB) exceeds the budget of {} bytes ({:.3} GB)",
            self.predicted_bytes,
            self.predicted_bytes as f64 / 1e9,
            self.budget_bytes,
            self.budget_bytes as f64 / 1e9
        )
    }
}

impl std::error::Error for ResourceRefusal {}

/// The configuration file could not be read at all.
#[derive(Debug)]
pub struct ConfigFileError {
    pub path: String,
    pub source: std::io::Error,
}

impl fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot read config `{}`: {}", self.path, self.source)
    }
}

impl std::error::Error for ConfigFileError {}

/// Exit code for a core library error.
pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidConfig { .. }
        | CoreError::UnknownKey { .. }
        | CoreError::Parse { .. }
        | CoreError::PacketOutsideGrid { .. }
        | CoreError::NonPowerOfTwo(_)
        | CoreError::NonPositiveEnergy(_)
        | CoreError::InsufficientSamples { .. }
        | CoreError::NonLogUniform => exit::CONFIG,
        CoreError::PivotBreakdown { .. }
        | CoreError::NoConvergence { .. }
        | CoreError::DimensionMismatch { .. }
        | CoreError::GridMismatch { .. } => exit::NUMERICAL,
        CoreError::Io(_) => exit::OTHER,
    }
}

/// Exit code for any error produced by the tool.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.downcast_ref::<ResourceRefusal>().is_some() {
            return exit::RESOURCE;
        }
        if cause.downcast_ref::<ConfigFileError>().is_some() {
            return exit::CONFIG;
        }
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return core_exit_code(core);
        }
    }
    exit::OTHER
}

/// Named starting points for a configuration.
pub fn preset(name: &str) -> Option<SimConfig> {
    match name {
        "reference" => Some(SimConfig::reference()),
        "desk" => Some(SimConfig::desk()),
        "desk-flat" | "desk_flat" => Some(SimConfig::desk_flat()),
        _ => None,
    }
}

pub const PRESETS: &[&str] = &["reference", "desk", "desk-flat"];

/// Builds a configuration from a preset, an optional file and `key=value`
/// overrides, applied in that order.
pub fn load_config(
    preset_name: &str,
    path: Option<&Path>,
    overrides: &[String],
) -> anyhow::Result<SimConfig> {
    let mut cfg = preset(preset_name).ok_or_else(|| CoreError::InvalidConfig {
        field: "preset",
        reason: format!(
            "unknown preset `{preset_name}` (known: {})",
            PRESETS.join(", ")
        ),
    })?;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError {
            path: path.display().to_string(),
            source,
        })?;
        cfg = qreflect::parse_config(&text, cfg)?;
    }
    for o in overrides {
        cfg.apply_assignment(o)?;
    }
    Ok(cfg)
}

/// Refuses the request when `predicted` exceeds `budget`.
pub fn check_budget(predicted: u64, budget: Option<u64>) -> Result<(), ResourceRefusal> {
    match budget {
        Some(b) if predicted > b => Err(ResourceRefusal {
            predicted_bytes: predicted,
            budget_bytes: b,
        }),
        _ => Ok(()),
    }
}

/// `MemAvailable` from `/proc/meminfo`, in bytes.
pub fn available_memory() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    parse_meminfo(&text)
}

fn parse_meminfo(text: &str) -> Option<u64> {
    let line = text.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let mut parts = line.split_whitespace().skip(1);
    let value: u64 = parts.next()?.parse().ok()?;
    match parts.next() {
        Some("kB") | None => Some(value * 1024),
        _ => None,
    }
}

/// Parses a byte count such as `4000000000`, `4G`, `512MiB` or `1.5GB`.
/// Decimal suffixes are powers of 1000, `i` suffixes powers of 1024.
pub fn parse_bytes(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let split = t
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || c == '+'))
        .unwrap_or(t.len());
    let (num, suffix) = t.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| format!("cannot parse byte count `{s}`"))?;
    let scale = match suffix.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1.0,
        "k" | "kb" => 1e3,
        "m" | "mb" => 1e6,
        "g" | "gb" => 1e9,
        "t" | "tb" => 1e12,
        "ki" | "kib" => 1024.0,
        "mi" | "mib" => 1024.0 * 1024.0,
        "gi" | "gib" => 1024.0 * 1024.0 * 1024.0,
        other => return Err(format!("unknown byte suffix `{other}` in `{s}`")),
    };
    let bytes = value * scale;
    if !(bytes >= 0.0 && bytes.is_finite()) {
        return Err(format!("byte count `{s}` is out of range"));
    }
    Ok(bytes.round() as u64)
}

/// Seconds since the Unix epoch.
pub fn unix_time() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
