//! Parameter sweeps. Each point is an independent run, except along
//! `sigma_y`: the packet width does not enter the Hamiltonian, so one
//! factorized system serves every point.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Context;
use qreflect::{
    prepare_system, run_with_system, validate, CayleySystem, Real, SimConfig, ValidatedConfig,
};

use crate::manifest::{Manifest, PointTiming};
use crate::run::Finished;
use crate::{check_budget, Precision, ResourceRefusal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NX,
    NY,
    Cutoff,
    Amplitude,
    SigmaY,
    Dt,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::NX => "n_x",
            SweepAxis::NY => "n_y",
            SweepAxis::Cutoff => "cutoff",
            SweepAxis::Amplitude => "amplitude",
            SweepAxis::SigmaY => "sigma_y",
            SweepAxis::Dt => "dt",
        }
    }

    /// Whether every point can share one factorized Cayley system.
    pub fn shares_factorization(self) -> bool {
        self == SweepAxis::SigmaY
    }

    /// Canonical text for the swept value, in SI units.
    fn label(self, cfg: &SimConfig) -> String {
        match self {
            SweepAxis::NX => cfg.n_x.to_string(),
            SweepAxis::NY => cfg.n_y.to_string(),
            SweepAxis::Cutoff => format!("{:e}", cfg.cutoff),
            SweepAxis::Amplitude => format!("{:e}", cfg.amplitude),
            SweepAxis::SigmaY => format!("{:e}", cfg.sigma_y),
            SweepAxis::Dt => format!("{:e}", cfg.dt),
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "n_x" | "nx" => SweepAxis::NX,
            "n_y" | "ny" => SweepAxis::NY,
            "cutoff" | "delta" => SweepAxis::Cutoff,
            "amplitude" | "A" => SweepAxis::Amplitude,
            "sigma_y" => SweepAxis::SigmaY,
            "dt" => SweepAxis::Dt,
            other => {
                return Err(format!(
                    "unknown sweep axis `{other}` (expected n_x, n_y, cutoff, amplitude, sigma_y or dt)"
                ))
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub base: SimConfig,
    pub axis: SweepAxis,
    /// Raw values, parsed like config entries so units are accepted.
    pub values: Vec<String>,
    pub parallel: usize,
    pub max_mem: Option<u64>,
    pub precision: Precision,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub r_final: f64,
    pub stationary_at_s: Option<f64>,
    pub timing: PointTiming,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_value: String,
    pub predicted_bytes: Option<u64>,
    pub result: Result<PointResult, String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub workers: usize,
    /// Factorization time of the shared system, when one was used.
    pub shared_factorization_s: Option<f64>,
    pub wall_s: f64,
}

impl SweepOutcome {
    /// Writes the result table. Timing is left out so that repeated sweeps
    /// give byte-identical files.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "{},r_final,stationary,stationary_at_s,predicted_bytes,error",
            self.axis.key()
        )?;
        for row in &self.rows {
            let bytes = row.predicted_bytes.map_or(String::new(), |b| b.to_string());
            match &row.result {
                Ok(p) => writeln!(
                    out,
                    "{},{:e},{},{},{},",
                    csv_field(&row.axis_value),
                    p.r_final,
                    p.stationary_at_s.is_some(),
                    p.stationary_at_s
                        .map_or(String::new(), |t| format!("{t:e}")),
                    bytes
                )?,
                Err(e) => writeln!(
                    out,
                    "{},,,,{},{}",
                    csv_field(&row.axis_value),
                    bytes,
                    csv_field(e)
                )?,
            }
        }
        Ok(())
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

enum Point {
    Ready {
        label: String,
        validated: Box<ValidatedConfig>,
        predicted: u64,
    },
    Rejected(SweepRow),
}

fn prepare_points(opts: &SweepOptions) -> Vec<Point> {
    opts.values
        .iter()
        .map(|raw| {
            let mut cfg = opts.base.clone();
            if let Err(e) = cfg.set(opts.axis.key(), raw.trim(), 0) {
                return Point::Rejected(SweepRow {
                    axis_value: raw.trim().to_string(),
                    predicted_bytes: None,
                    result: Err(e.to_string()),
                });
            }
            let label = opts.axis.label(&cfg);
            let predicted = opts.precision.memory(cfg.n_x, cfg.n_y).total();
            match validate(&cfg) {
                Ok(validated) => Point::Ready {
                    label,
                    validated: Box::new(validated),
                    predicted,
                },
                Err(e) => Point::Rejected(SweepRow {
                    axis_value: label,
                    predicted_bytes: Some(predicted),
                    result: Err(e.to_string()),
                }),
            }
        })
        .collect()
}

/// Runs every point of the sweep. Failures of single points are recorded in
/// their rows; the returned error is reserved for problems that stop the
/// whole sweep.
pub fn run_sweep(opts: &SweepOptions) -> anyhow::Result<SweepOutcome> {
    if opts.values.is_empty() {
        anyhow::bail!(qreflect::Error::InvalidConfig {
            field: "values",
            reason: "a sweep needs at least one value".into(),
        });
    }
    match opts.precision {
        Precision::F64 => sweep_generic::<f64>(opts),
        Precision::F32 => sweep_generic::<f32>(opts),
    }
}

fn sweep_generic<T: Real>(opts: &SweepOptions) -> anyhow::Result<SweepOutcome> {
    let t0 = Instant::now();
    let mut points = prepare_points(opts);

    // refuse points that could never fit, then size the worker pool
    let shared_mode = opts.axis.shares_factorization();
    for p in points.iter_mut() {
        if let Point::Ready {
            label, predicted, ..
        } = p
        {
            if let Err(refusal) = check_budget(*predicted, opts.max_mem) {
                *p = Point::Rejected(refused_row(label.clone(), refusal));
            }
        }
    }
    let ready: Vec<usize> = (0..points.len())
        .filter(|&i| matches!(points[i], Point::Ready { .. }))
        .collect();
    let largest = ready
        .iter()
        .map(|&i| match &points[i] {
            Point::Ready { validated, .. } => {
                let c = validated.config();
                opts.precision.memory(c.n_x, c.n_y)
            }
            Point::Rejected(_) => unreachable!(),
        })
        .max_by_key(|m| m.total());
    let workers = match (largest, opts.max_mem) {
        (Some(m), Some(budget)) => {
            let fits = if shared_mode {
                budget.saturating_sub(m.factor_bytes) / m.workspace_bytes.max(1)
            } else {
                budget / m.total().max(1)
            };
            (fits as usize).clamp(1, opts.parallel.max(1))
        }
        _ => opts.parallel.max(1),
    }
    .min(ready.len().max(1));

    let mut shared_factorization_s = None;
    let shared: Option<CayleySystem<T>> = match (shared_mode, ready.first()) {
        (true, Some(&first)) => {
            let Point::Ready { validated, .. } = &points[first] else {
                unreachable!()
            };
            match prepare_system::<T>(validated) {
                Ok((system, secs)) => {
                    shared_factorization_s = Some(secs);
                    Some(system)
                }
                Err(e) => {
                    // every point depends on this system
                    for &i in &ready {
                        if let Point::Ready {
                            label, predicted, ..
                        } = &points[i]
                        {
                            points[i] = Point::Rejected(SweepRow {
                                axis_value: label.clone(),
                                predicted_bytes: Some(*predicted),
                                result: Err(e.to_string()),
                            });
                        }
                    }
                    None
                }
            }
        }
        _ => None,
    };

    let slots: Vec<Mutex<Option<SweepRow>>> = points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let row = match &points[i] {
                    Point::Rejected(row) => row.clone(),
                    Point::Ready {
                        label,
                        validated,
                        predicted,
                    } => {
                        let result = run_point::<T>(validated, shared.as_ref(), label);
                        SweepRow {
                            axis_value: label.clone(),
                            predicted_bytes: Some(*predicted),
                            result: result.map_err(|e| format!("{e:#}")),
                        }
                    }
                };
                *slots[i].lock().unwrap() = Some(row);
            });
        }
    });

    let rows = slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap()
                .expect("every sweep point is visited")
        })
        .collect();
    Ok(SweepOutcome {
        axis: opts.axis,
        rows,
        workers,
        shared_factorization_s,
        wall_s: t0.elapsed().as_secs_f64(),
    })
}

fn refused_row(label: String, refusal: ResourceRefusal) -> SweepRow {
    SweepRow {
        axis_value: label,
        predicted_bytes: Some(refusal.predicted_bytes),
        result: Err(format!("resource refusal: {refusal}")),
    }
}

fn run_point<T: Real>(
    validated: &ValidatedConfig,
    shared: Option<&CayleySystem<T>>,
    label: &str,
) -> anyhow::Result<PointResult> {
    let t0 = Instant::now();
    let done = match shared {
        Some(system) => finished(run_with_system(validated, system, |_, _| {})?, 0.0),
        None => {
            let (system, secs) = prepare_system::<T>(validated)?;
            finished(run_with_system(validated, &system, |_, _| {})?, secs)
        }
    };
    let units = validated.units();
    Ok(PointResult {
        r_final: done.r_final,
        stationary_at_s: done.stationary_at.map(|t| units.time_to_si(t)),
        timing: PointTiming {
            axis_value: label.to_string(),
            wall_s: t0.elapsed().as_secs_f64(),
            factorization_s: done.timings.factorization_s,
            per_step_s: done.timings.per_step_s(),
            steps: done.timings.steps,
            shared_factorization: shared.is_some(),
        },
    })
}

fn finished<T>(report: qreflect::RunReport<T>, factorization_s: f64) -> Finished {
    let mut timings = report.timings;
    timings.factorization_s = factorization_s;
    Finished {
        r_final: report.r_final,
        stationary_at: report.series.stationary_at,
        warnings: report.warnings,
        timings,
    }
}

/// Writes `sweep.csv` and `manifest.json` for a finished sweep into `out`.
pub fn write_outputs(
    outcome: &SweepOutcome,
    opts: &SweepOptions,
    out: &Path,
) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv_path = out.join("sweep.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    outcome.write_csv(&mut w)?;
    w.flush()?;

    let predicted = outcome
        .rows
        .iter()
        .filter_map(|r| r.predicted_bytes)
        .max()
        .unwrap_or(0);
    let mut manifest = Manifest::new(
        &format!("sweep {}", opts.axis.key()),
        opts.precision.name(),
        opts.base.to_config_string(),
        predicted,
    );
    manifest.factorization_s = outcome.shared_factorization_s;
    manifest.points = outcome
        .rows
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|p| p.timing.clone()))
        .collect();
    manifest.warnings = outcome
        .rows
        .iter()
        .filter_map(|r| {
            r.result
                .as_ref()
                .err()
                .map(|e| format!("{}: {e}", r.axis_value))
        })
        .collect();
    manifest.outputs = vec!["sweep.csv".into()];
    manifest.started_unix_s -= outcome.wall_s;
    manifest.finish(None);
    manifest.write_atomic(&out.join("manifest.json"))?;
    Ok(csv_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names_round_trip() {
        for axis in [
            SweepAxis::NX,
            SweepAxis::NY,
            SweepAxis::Cutoff,
            SweepAxis::Amplitude,
            SweepAxis::SigmaY,
            SweepAxis::Dt,
        ] {
            assert_eq!(axis.key().parse::<SweepAxis>().unwrap(), axis);
        }
        assert!("mass".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
    }

    #[test]
    fn bad_values_become_rows() {
        let opts = SweepOptions {
            base: SimConfig::desk(),
            axis: SweepAxis::NX,
            values: vec!["lots".into(), "1000".into()],
            parallel: 1,
            max_mem: None,
            precision: Precision::F64,
        };
        let outcome = run_sweep(&opts).unwrap();
        assert_eq!(outcome.failures(), 2);
        assert_eq!(outcome.rows[1].axis_value, "1000");
        let mut buf = Vec::new();
        outcome.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n_x,r_final,"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn over_budget_points_are_refused_individually() {
        let opts = SweepOptions {
            base: SimConfig::desk(),
            axis: SweepAxis::NY,
            values: vec!["8".into(), "4096".into()],
            parallel: 1,
            max_mem: Some(1),
            precision: Precision::F64,
        };
        let outcome = run_sweep(&opts).unwrap();
        for row in &outcome.rows {
            let err = row.result.as_ref().unwrap_err();
            assert!(err.starts_with("resource refusal"), "{err}");
        }
    }
}
