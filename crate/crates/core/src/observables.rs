//! Momentum-space analysis of the wave field, the reflectivity functional,
//! stationarity detection and averaging over cutoff lengths.
//!
//! The transform convention is
//! ψ̃(p_x, p_y) = dx·dy/(2πħ) · Σ ψ(x, y)·exp(−i(p_x x + p_y y)/ħ)
//! on the DFT momentum grid p = ħk with spacing dp = 2πħ/(n·d). With this
//! choice Σ|ψ̃|²·dp_x·dp_y equals Σ|ψ|²·dx·dy exactly. Bin ordering follows
//! the usual `fftfreq` layout: bins `0..n/2` are non-negative and the Nyquist
//! bin `n/2` counts as negative.

use std::io::Write;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, WaveField};
use crate::scalar::{Complex, Real};
use crate::units::UnitSystem;

/// Signed DFT frequency index of bin `i` out of `n`.
pub fn signed_bin(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Reusable 2D transform: plans and buffers sized for one grid.
pub struct MomentumAnalyzer<T: Real> {
    geometry: GridGeometry<T>,
    fft_x: Arc<dyn Fft<T>>,
    fft_y: Arc<dyn Fft<T>>,
    buffer: Vec<Complex<T>>,
    column: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> MomentumAnalyzer<T> {
    pub fn new(geometry: GridGeometry<T>) -> Result<Self> {
        for n in [geometry.n_x, geometry.n_y] {
            if !n.is_power_of_two() {
                return Err(Error::NonPowerOfTwo(n));
            }
        }
        let mut planner = FftPlanner::new();
        let fft_x = planner.plan_fft_forward(geometry.n_x);
        let fft_y = planner.plan_fft_forward(geometry.n_y);
        let scratch_len = fft_x
            .get_inplace_scratch_len()
            .max(fft_y.get_inplace_scratch_len());
        let zero = Complex::new(T::zero(), T::zero());
        Ok(Self {
            geometry,
            fft_x,
            fft_y,
            buffer: vec![zero; geometry.len()],
            column: vec![zero; geometry.n_x],
            scratch: vec![zero; scratch_len],
        })
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    /// Unnormalised 2D DFT of `field`, x-major like the field itself.
    fn transform(&mut self, field: &WaveField<T>) -> Result<&[Complex<T>]> {
        let g = &self.geometry;
        if field.geometry.n_x != g.n_x || field.geometry.n_y != g.n_y {
            return Err(Error::GridMismatch {
                expected: (g.n_x, g.n_y),
                found: (field.geometry.n_x, field.geometry.n_y),
            });
        }
        self.buffer.copy_from_slice(&field.amplitudes);
        // rows are contiguous along y; rustfft handles the batch
        self.fft_y
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        let (nx, ny) = (g.n_x, g.n_y);
        for j in 0..ny {
            for i in 0..nx {
                self.column[i] = self.buffer[i * ny + j];
            }
            self.fft_x
                .process_with_scratch(&mut self.column, &mut self.scratch);
            for i in 0..nx {
                self.buffer[i * ny + j] = self.column[i];
            }
        }
        Ok(&self.buffer)
    }

    /// Probability split by the sign of p_x.
    pub fn parts(&mut self, field: &WaveField<T>) -> Result<ReflectivityParts> {
        let (nx, ny) = (self.geometry.n_x, self.geometry.n_y);
        let weight = self.geometry.cell().as_f64() / (nx * ny) as f64;
        let spectrum = self.transform(field)?;
        let mut sums = [0.0f64; 3];
        let mut moment = 0.0f64;
        for (i, row) in spectrum.chunks_exact(ny).enumerate() {
            let s: f64 = row.iter().map(|c| c.norm_sqr().as_f64()).sum();
            let bin = signed_bin(i, nx);
            let slot = match bin {
                0 => 2,
                b if b > 0 => 0,
                _ => 1,
            };
            sums[slot] += s;
            moment += s * bin as f64;
        }
        let total = sums.iter().sum::<f64>();
        Ok(ReflectivityParts {
            positive: sums[0] * weight,
            negative: sums[1] * weight,
            zero: sums[2] * weight,
            mean_bin: if total > 0.0 { moment / total } else { 0.0 },
        })
    }

    /// Momentum spacing 2πħ/(n_x·dx) along x.
    pub fn dp_x(&self, hbar: T) -> f64 {
        std::f64::consts::TAU * hbar.as_f64()
            / (self.geometry.n_x as f64 * self.geometry.dx.as_f64())
    }

    pub fn reflectivity(&mut self, field: &WaveField<T>) -> Result<f64> {
        Ok(self.parts(field)?.positive)
    }

    /// |ψ̃|² on the momentum grid.
    pub fn density(&mut self, field: &WaveField<T>, hbar: T) -> Result<MomentumDensity> {
        let g = self.geometry;
        let two_pi_hbar = std::f64::consts::TAU * hbar.as_f64();
        let scale = (g.cell().as_f64() / two_pi_hbar).powi(2);
        let spectrum = self.transform(field)?;
        Ok(MomentumDensity {
            density: spectrum
                .iter()
                .map(|c| c.norm_sqr().as_f64() * scale)
                .collect(),
            n_x: g.n_x,
            n_y: g.n_y,
            dp_x: two_pi_hbar / (g.n_x as f64 * g.dx.as_f64()),
            dp_y: two_pi_hbar / (g.n_y as f64 * g.dy.as_f64()),
        })
    }
}

/// Probability carried by p_x > 0, p_x < 0 and the p_x = 0 bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectivityParts {
    pub positive: f64,
    pub negative: f64,
    pub zero: f64,
    /// Density-weighted mean of the signed p_x bin index; multiply by dp_x
    /// for ⟨p_x⟩.
    pub mean_bin: f64,
}

impl ReflectivityParts {
    pub fn total(&self) -> f64 {
        self.positive + self.negative + self.zero
    }
}

/// Momentum density |ψ̃|² in the field's x-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDensity {
    pub density: Vec<f64>,
    pub n_x: usize,
    pub n_y: usize,
    pub dp_x: f64,
    pub dp_y: f64,
}

impl MomentumDensity {
    pub fn p_x(&self, i: usize) -> f64 {
        signed_bin(i, self.n_x) as f64 * self.dp_x
    }

    pub fn p_y(&self, j: usize) -> f64 {
        signed_bin(j, self.n_y) as f64 * self.dp_y
    }

    /// Σ density·dp_x·dp_y.
    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.dp_x * self.dp_y
    }

    /// (⟨p_x⟩, ⟨p_y⟩, spread of p_x, spread of p_y).
    pub fn moments(&self) -> (f64, f64, f64, f64) {
        let mut s = [0.0f64; 5];
        for i in 0..self.n_x {
            let px = self.p_x(i);
            for j in 0..self.n_y {
                let d = self.density[i * self.n_y + j];
                let py = self.p_y(j);
                s[0] += d;
                s[1] += d * px;
                s[2] += d * py;
                s[3] += d * px * px;
                s[4] += d * py * py;
            }
        }
        let mx = s[1] / s[0];
        let my = s[2] / s[0];
        (
            mx,
            my,
            (s[3] / s[0] - mx * mx).max(0.0).sqrt(),
            (s[4] / s[0] - my * my).max(0.0).sqrt(),
        )
    }

    /// Dumps `p_x,p_y,density` rows in SI units (kg·m/s and s²/(kg²·m²)·…).
    pub fn write_csv<W: Write>(&self, out: &mut W, units: &UnitSystem) -> Result<()> {
        // density has dimensions 1/momentum², so it scales with the inverse
        // square of the momentum unit
        let p_unit = units.momentum_to_si(1.0);
        writeln!(out, "p_x,p_y,density")?;
        for i in 0..self.n_x {
            for j in 0..self.n_y {
                writeln!(
                    out,
                    "{:e},{:e},{:e}",
                    self.p_x(i) * p_unit,
                    self.p_y(j) * p_unit,
                    self.density[i * self.n_y + j] / (p_unit * p_unit)
                )?;
            }
        }
        Ok(())
    }
}

/// Momentum density of `field` with a freshly planned transform.
pub fn momentum_density<T: Real>(field: &WaveField<T>, hbar: T) -> Result<MomentumDensity> {
    MomentumAnalyzer::new(field.geometry)?.density(field, hbar)
}

/// Probability with strictly positive p_x, summed over every p_y.
pub fn reflectivity<T: Real>(field: &WaveField<T>) -> Result<f64> {
    MomentumAnalyzer::new(field.geometry)?.reflectivity(field)
}

pub fn reflectivity_parts<T: Real>(field: &WaveField<T>) -> Result<ReflectivityParts> {
    MomentumAnalyzer::new(field.geometry)?.parts(field)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_px: f64,
    pub mean_py: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

/// Position moments of |ψ|² along x.
pub fn position_x_moments<T: Real>(field: &WaveField<T>) -> (f64, f64) {
    let g = &field.geometry;
    let (mut s0, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
    for (i, row) in field.amplitudes.chunks_exact(g.n_y).enumerate() {
        let w: f64 = row.iter().map(|c| c.norm_sqr().as_f64()).sum();
        let x = g.x(i).as_f64();
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
    }
    let m = s1 / s0;
    (m, (s2 / s0 - m * m).max(0.0).sqrt())
}

/// Circular mean of the y marginal, and the spread of minimum-image
/// displacements about it.
///
/// For a density spread uniformly over the period the circular mean is
/// undefined; the angle then defaults to 0 and the spread evaluates to the
/// uniform value L/√12.
pub fn position_y_moments<T: Real>(field: &WaveField<T>) -> (f64, f64) {
    let g = &field.geometry;
    let period = g.period.as_f64();
    let marg: Vec<f64> = field.y_marginal().iter().map(|v| v.as_f64()).collect();
    let total: f64 = marg.iter().sum();
    let (mut c, mut s) = (0.0f64, 0.0f64);
    for (j, w) in marg.iter().enumerate() {
        let theta = std::f64::consts::TAU * g.y(j).as_f64() / period;
        c += w * theta.cos();
        s += w * theta.sin();
    }
    let resultant = (c * c + s * s).sqrt();
    let mean = if resultant > 1e-12 * total {
        (s.atan2(c) / std::f64::consts::TAU * period).rem_euclid(period)
    } else {
        0.0
    };
    let mut m2 = 0.0;
    for (j, w) in marg.iter().enumerate() {
        let d = (g.y(j).as_f64() - mean + 0.5 * period).rem_euclid(period) - 0.5 * period;
        m2 += w * d * d;
    }
    (mean, (m2 / total).sqrt())
}

pub fn expectations<T: Real>(field: &WaveField<T>, hbar: T) -> Result<Expectations> {
    let (mean_x, sigma_x) = position_x_moments(field);
    let (mean_y, sigma_y) = position_y_moments(field);
    let (mean_px, mean_py, _, _) = momentum_density(field, hbar)?.moments();
    Ok(Expectations {
        mean_x,
        mean_y,
        mean_px,
        mean_py,
        sigma_x,
        sigma_y,
    })
}

// ---------------------------------------------------------------------------
// time series

/// One observation. Times, lengths and momenta are in internal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub reflectivity: f64,
    pub norm: f64,
    pub absorbed: f64,
    pub mean_x: f64,
    pub mean_px: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReflectivitySeries {
    pub samples: Vec<Sample>,
    pub stationary_at: Option<f64>,
}

impl ReflectivitySeries {
    pub fn push(&mut self, s: Sample) {
        debug_assert!(self.samples.last().is_none_or(|l| l.time < s.time));
        self.samples.push(s);
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Writes `time_s,reflectivity,norm,absorbed,mean_x_m`.
    pub fn write_csv<W: Write>(&self, out: &mut W, units: &UnitSystem) -> Result<()> {
        writeln!(out, "time_s,reflectivity,norm,absorbed,mean_x_m")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                units.time_to_si(s.time),
                s.reflectivity,
                s.norm,
                s.absorbed,
                units.length_to_si(s.mean_x)
            )?;
        }
        Ok(())
    }
}

/// Windowed plateau rule in internal time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityCriterion {
    pub window: f64,
    pub tolerance: f64,
    pub min_time: f64,
}

/// Earliest sample time t ≥ `min_time` whose window [t, t + window] is fully
/// covered by the series and over which max R − min R ≤ tolerance·R(t).
pub fn detect_stationary(series: &ReflectivitySeries, crit: &StationarityCriterion) -> Option<f64> {
    let s = &series.samples;
    let end = s.last()?.time;
    for (a, start) in s.iter().enumerate() {
        if start.time < crit.min_time {
            continue;
        }
        if start.time + crit.window > end {
            return None;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in s[a..]
            .iter()
            .take_while(|x| x.time <= start.time + crit.window)
        {
            lo = lo.min(x.reflectivity);
            hi = hi.max(x.reflectivity);
        }
        if hi - lo <= crit.tolerance * start.reflectivity {
            return Some(start.time);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// averaging over cutoff lengths

/// `n` values from `lo` to `hi` inclusive, uniformly spaced in log.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Mean of R over samples `(Δ, R)` that are uniformly spaced in log Δ.
///
/// Needs at least three distinct Δ. Samples may come in any order; a spacing
/// that is not uniform in log Δ (relative deviation above 1e-6) is rejected
/// because the arithmetic mean would then weight the oscillation unevenly.
pub fn effective_reflectivity(samples: &[(f64, f64)]) -> Result<f64> {
    let mut s: Vec<(f64, f64)> = samples.to_vec();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    s.dedup_by(|a, b| a.0 == b.0);
    if s.len() < 3 || s.len() != samples.len() {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: s.len(),
        });
    }
    if s.iter().any(|(d, _)| !(*d > 0.0)) {
        return Err(Error::NonLogUniform);
    }
    let step = (s[1].0 / s[0].0).ln();
    for w in s.windows(2) {
        if ((w[1].0 / w[0].0).ln() - step).abs() > 1e-6 * step {
            return Err(Error::NonLogUniform);
        }
    }
    Ok(s.iter().map(|(_, r)| r).sum::<f64>() / s.len() as f64)
}
