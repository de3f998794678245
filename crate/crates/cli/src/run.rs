use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use qreflect::{
    prepare_system, run_with_system, validate, write_snapshot, Real, RunTimings, SimConfig,
    ValidatedConfig,
};

use crate::manifest::Manifest;
use crate::{check_budget, Precision};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: SimConfig,
    pub out: PathBuf,
    pub max_mem: Option<u64>,
    pub precision: Precision,
    /// Write the wave function every this many recorded samples.
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub r_final: f64,
    pub stationary_at_s: Option<f64>,
    pub predicted_bytes: u64,
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

impl RunSummary {
    /// The one-line result printed on stdout.
    pub fn line(&self) -> String {
        let at = self
            .stationary_at_s
            .map_or_else(|| "none".to_string(), |t| format!("{t:e}"));
        format!("R_final={:e} stationary_at={at}", self.r_final)
    }
}

/// Precision-independent part of a finished run.
pub(crate) struct Finished {
    pub r_final: f64,
    pub stationary_at: Option<f64>,
    pub warnings: Vec<String>,
    pub timings: RunTimings,
}

/// Validates, checks the memory budget, runs and writes `series.csv` plus
/// `manifest.json` into `opts.out`. The manifest is written before the run
/// starts and rewritten when it ends, including on failure.
pub fn run_single(opts: &RunOptions) -> anyhow::Result<RunSummary> {
    let validated = validate(&opts.config)?;
    let predicted = opts
        .precision
        .memory(opts.config.n_x, opts.config.n_y)
        .total();
    check_budget(predicted, opts.max_mem)?;

    std::fs::create_dir_all(&opts.out)
        .with_context(|| format!("creating output directory {}", opts.out.display()))?;
    let manifest_path = opts.out.join("manifest.json");
    let mut manifest = Manifest::new(
        "run",
        opts.precision.name(),
        opts.config.to_config_string(),
        predicted,
    );
    manifest.write_atomic(&manifest_path)?;

    let result = match opts.precision {
        Precision::F64 => execute::<f64>(&validated, &opts.out, opts.snapshot_every),
        Precision::F32 => execute::<f32>(&validated, &opts.out, opts.snapshot_every),
    };
    match result {
        Ok((done, outputs)) => {
            let units = validated.units();
            let stationary_at_s = done.stationary_at.map(|t| units.time_to_si(t));
            manifest.factorization_s = Some(done.timings.factorization_s);
            manifest.per_step_s = Some(done.timings.per_step_s());
            manifest.steps = Some(done.timings.steps);
            manifest.r_final = Some(done.r_final);
            manifest.stationary_at_s = stationary_at_s;
            manifest.warnings = done.warnings.clone();
            manifest.outputs = outputs.iter().map(|p| relative(p, &opts.out)).collect();
            manifest.finish(None);
            manifest.write_atomic(&manifest_path)?;
            Ok(RunSummary {
                r_final: done.r_final,
                stationary_at_s,
                predicted_bytes: predicted,
                warnings: done.warnings,
                outputs,
            })
        }
        Err(e) => {
            manifest.finish(Some(format!("{e:#}")));
            // the original error matters more than a failure to record it
            let _ = manifest.write_atomic(&manifest_path);
            Err(e)
        }
    }
}

fn relative(p: &Path, base: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).display().to_string()
}

fn execute<T: Real>(
    validated: &ValidatedConfig,
    out: &Path,
    snapshot_every: Option<usize>,
) -> anyhow::Result<(Finished, Vec<PathBuf>)> {
    let units = *validated.units();
    let (system, factor_s) = prepare_system::<T>(validated)?;

    let mut outputs = Vec::new();
    let snap_dir = out.join("snapshots");
    if snapshot_every.is_some() {
        std::fs::create_dir_all(&snap_dir)?;
    }
    let mut snap_error: Option<anyhow::Error> = None;
    let mut sample_index = 0usize;
    let mut report = run_with_system(validated, &system, |state, sample| {
        let due =
            snapshot_every.is_some_and(|every| every > 0 && sample_index.is_multiple_of(every));
        sample_index += 1;
        if !due || snap_error.is_some() {
            return;
        }
        let path = snap_dir.join(format!("psi_{:08}.bin", state.step_count));
        let written = File::create(&path)
            .map_err(anyhow::Error::from)
            .and_then(|f| {
                let mut w = BufWriter::new(f);
                write_snapshot(
                    &mut w,
                    &state.field,
                    units.time_to_si(sample.time),
                    units.length_to_si(1.0),
                )?;
                std::io::Write::flush(&mut w)?;
                Ok(())
            });
        match written {
            Ok(()) => outputs.push(path),
            Err(e) => snap_error = Some(e.context(format!("writing {}", path.display()))),
        }
    })?;
    if let Some(e) = snap_error {
        return Err(e);
    }
    report.timings.factorization_s = factor_s;

    let series_path = out.join("series.csv");
    let mut w = BufWriter::new(File::create(&series_path)?);
    report.series.write_csv(&mut w, &units)?;
    std::io::Write::flush(&mut w)?;
    outputs.insert(0, series_path);

    Ok((
        Finished {
            r_final: report.r_final,
            stationary_at: report.series.stationary_at,
            warnings: report.warnings,
            timings: report.timings,
        },
        outputs,
    ))
}
