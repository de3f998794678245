use std::io::Write;

use qreflect::observables::log_spaced;
use qreflect::oracle1d::{reflectivity_1d, Potential1D};
use qreflect::{effective_reflectivity, packet_averaged_reflectivity, validate, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub cutoff_m: f64,
    pub reflectivity: f64,
    pub packet_averaged: f64,
}

/// Reads a cutoff such as `3nm` or `3e-9` through the config parser.
pub fn parse_cutoff(base: &SimConfig, raw: &str) -> qreflect::Result<f64> {
    let mut cfg = base.clone();
    cfg.set("cutoff", raw.trim(), 0)?;
    Ok(cfg.cutoff)
}

/// Expands `lo:hi:n` into `n` log-spaced cutoffs in metres.
pub fn parse_range(base: &SimConfig, spec: &str) -> qreflect::Result<Vec<f64>> {
    let bad = |reason: &str| qreflect::Error::Parse {
        line: 0,
        key: "range".into(),
        reason: format!("{reason} in `{spec}` (expected lo:hi:n)"),
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad("need three fields"));
    };
    let n: usize = n.trim().parse().map_err(|_| bad("bad count"))?;
    let (lo, hi) = (parse_cutoff(base, lo)?, parse_cutoff(base, hi)?);
    if !(lo > 0.0 && hi > 0.0) {
        return Err(bad("bounds must be positive"));
    }
    Ok(log_spaced(lo, hi, n))
}

/// Mono-energetic and packet-averaged 1D reflectivity for each cutoff, using
/// mass, interaction strength, speed and σ_x from `base`.
pub fn oracle_table(base: &SimConfig, cutoffs_m: &[f64]) -> qreflect::Result<Vec<OracleRow>> {
    cutoffs_m
        .iter()
        .map(|&cutoff_m| {
            let cfg = SimConfig {
                cutoff: cutoff_m,
                ..base.clone()
            };
            let v = validate(&cfg)?;
            let p = v.internal();
            let pot = Potential1D::new(p.c3, p.cutoff)?;
            let energy = 0.5 * p.mass * p.v_x0 * p.v_x0;
            Ok(OracleRow {
                cutoff_m,
                reflectivity: reflectivity_1d(&pot, p.mass, p.hbar, energy)?,
                packet_averaged: packet_averaged_reflectivity(
                    &pot, p.mass, p.hbar, p.v_x0, p.sigma_x,
                )?,
            })
        })
        .collect()
}

pub fn write_table<W: Write>(rows: &[OracleRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "cutoff_m,reflectivity,packet_averaged")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{:e},{:e}",
            r.cutoff_m, r.reflectivity, r.packet_averaged
        )?;
    }
    Ok(())
}

/// Log-uniform averages of both columns, when the cutoffs allow one.
pub fn effective(rows: &[OracleRow]) -> qreflect::Result<(f64, f64)> {
    let mono: Vec<_> = rows.iter().map(|r| (r.cutoff_m, r.reflectivity)).collect();
    let avg: Vec<_> = rows
        .iter()
        .map(|r| (r.cutoff_m, r.packet_averaged))
        .collect();
    Ok((
        effective_reflectivity(&mono)?,
        effective_reflectivity(&avg)?,
    ))
}
