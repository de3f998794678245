//! Time marching: one Cayley step per dt followed by the absorbing mask, plus
//! the observation loop that records R(t) until it settles.

use std::time::Instant;

use crate::config::{AbsorberSide, InternalParams, ValidatedConfig};
use crate::error::{Error, Result};
use crate::grid::{init_gaussian, make_grid, GridGeometry, PacketSpec, WaveField};
use crate::hamiltonian::{CayleySystem, Hamiltonian};
use crate::observables::{
    detect_stationary, position_x_moments, MomentumAnalyzer, ReflectivitySeries, Sample,
    StationarityCriterion,
};
use crate::potential::{evaluate_field, CorrugationParams};
use crate::scalar::{Complex, Real};

/// Logistic mask in x, constant along y.
///
/// On the lower side f(x) = 1/(1 + exp(−(x − x_a)/w)), which vanishes towards
/// x_min; the upper side uses the mirror image.
#[derive(Debug, Clone, PartialEq)]
pub struct Absorber<T> {
    mask: Vec<T>,
    /// Rows whose mask is not exactly one.
    active: std::ops::Range<usize>,
}

impl<T: Real> Absorber<T> {
    pub fn new(grid: &GridGeometry<T>, center: T, width: T, side: AbsorberSide) -> Self {
        let mask: Vec<T> = (0..grid.n_x)
            .map(|i| {
                let z = (grid.x(i) - center) / width;
                let z = match side {
                    AbsorberSide::Lower => -z,
                    AbsorberSide::Upper => z,
                };
                T::one() / (T::one() + z.exp())
            })
            .collect();
        let first = mask
            .iter()
            .position(|f| *f != T::one())
            .unwrap_or(mask.len());
        let last = mask
            .iter()
            .rposition(|f| *f != T::one())
            .map_or(first, |p| p + 1);
        Self {
            mask,
            active: first..last.max(first),
        }
    }

    /// A mask that is one everywhere.
    pub fn disabled(n_x: usize) -> Self {
        Self {
            mask: vec![T::one(); n_x],
            active: 0..0,
        }
    }

    pub fn from_params(grid: &GridGeometry<T>, p: &InternalParams) -> Self {
        if p.absorber_enabled {
            Self::new(
                grid,
                T::lit(p.absorber_center),
                T::lit(p.absorber_width),
                p.absorber_side,
            )
        } else {
            Self::disabled(grid.n_x)
        }
    }

    pub fn mask(&self) -> &[T] {
        &self.mask
    }

    /// Multiplies the field by the mask and returns the probability removed.
    pub fn apply(&self, field: &mut WaveField<T>) -> f64 {
        let ny = field.geometry.n_y;
        let cell = field.geometry.cell().as_f64();
        let mut removed = 0.0f64;
        for i in self.active.clone() {
            let f = self.mask[i];
            let row = &mut field.amplitudes[i * ny..(i + 1) * ny];
            let w: f64 = row.iter().map(|c| c.norm_sqr().as_f64()).sum();
            removed += w * (1.0 - f.as_f64() * f.as_f64());
            for a in row {
                *a = *a * f;
            }
        }
        removed * cell
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationState<T> {
    pub field: WaveField<T>,
    pub time: f64,
    pub step_count: usize,
    pub cumulative_absorbed: f64,
}

impl<T: Real> PropagationState<T> {
    pub fn new(field: WaveField<T>) -> Self {
        Self {
            field,
            time: 0.0,
            step_count: 0,
            cumulative_absorbed: 0.0,
        }
    }
}

/// One step: ψ ← (1 + iτH)⁻¹(1 − iτH)ψ, then the mask. `scratch` must have
/// the field's length.
pub fn step<T: Real>(
    state: &mut PropagationState<T>,
    system: &CayleySystem<T>,
    absorber: &Absorber<T>,
    scratch: &mut [Complex<T>],
) -> Result<()> {
    system.advance(&mut state.field.amplitudes, scratch)?;
    state.cumulative_absorbed += absorber.apply(&mut state.field);
    state.step_count += 1;
    state.time = state.step_count as f64 * system.dt.as_f64();
    Ok(())
}

/// Owns the scratch vector so repeated steps do not allocate.
pub struct Propagator<'a, T: Real> {
    pub system: &'a CayleySystem<T>,
    pub absorber: Absorber<T>,
    scratch: Vec<Complex<T>>,
}

impl<'a, T: Real> Propagator<'a, T> {
    pub fn new(system: &'a CayleySystem<T>, absorber: Absorber<T>) -> Self {
        Self {
            system,
            absorber,
            scratch: vec![Complex::new(T::zero(), T::zero()); system.hamiltonian.len()],
        }
    }

    pub fn step(&mut self, state: &mut PropagationState<T>) -> Result<()> {
        step(state, self.system, &self.absorber, &mut self.scratch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunOutcome {
    /// R settled; the value is the start of the accepted window.
    Stationary { at: f64 },
    /// R never settled before `t_max`. The series is still complete.
    NonStationary { t_max: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunTimings {
    pub factorization_s: f64,
    pub stepping_s: f64,
    pub observation_s: f64,
    pub steps: usize,
}

impl RunTimings {
    pub fn per_step_s(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.stepping_s / self.steps as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport<T> {
    pub series: ReflectivitySeries,
    pub state: PropagationState<T>,
    pub outcome: RunOutcome,
    /// Reflectivity of the last recorded sample.
    pub r_final: f64,
    /// Weight in the p_x = 0 bin at the last sample.
    pub zero_bin: f64,
    pub warnings: Vec<String>,
    pub timings: RunTimings,
}

/// Builds H for the configuration and factorizes its Cayley system. Returns
/// the system and the factorization wall time in seconds.
pub fn prepare_system<T: Real>(config: &ValidatedConfig) -> Result<(CayleySystem<T>, f64)> {
    let p = config.internal();
    let grid = make_grid::<T>(p);
    let params = CorrugationParams::<T>::from_params(p)?;
    let hamiltonian = {
        let potential = evaluate_field(&grid, &params);
        Hamiltonian::assemble(&grid, &potential, T::lit(p.mass), T::lit(p.hbar))?
    };
    let t0 = Instant::now();
    let system = CayleySystem::build(hamiltonian, T::lit(p.dt), T::lit(p.hbar))?;
    Ok((system, t0.elapsed().as_secs_f64()))
}

/// Full run: assemble, factorize, propagate.
pub fn run<T: Real>(config: &ValidatedConfig) -> Result<RunReport<T>> {
    let (system, factor_s) = prepare_system::<T>(config)?;
    let mut report = run_with_system(config, &system, |_, _| {})?;
    report.timings.factorization_s = factor_s;
    Ok(report)
}

/// Propagates with an already factorized system, which must have been built
/// from the same grid, potential and dt as `config`. `observer` sees the
/// state at every recorded sample.
pub fn run_with_system<T: Real>(
    config: &ValidatedConfig,
    system: &CayleySystem<T>,
    mut observer: impl FnMut(&PropagationState<T>, &Sample),
) -> Result<RunReport<T>> {
    let p = config.internal();
    let grid = make_grid::<T>(p);
    let sys_grid = system.hamiltonian.geometry;
    if (sys_grid.n_x, sys_grid.n_y) != (grid.n_x, grid.n_y) {
        return Err(Error::GridMismatch {
            expected: (grid.n_x, grid.n_y),
            found: (sys_grid.n_x, sys_grid.n_y),
        });
    }
    if sys_grid.dx != grid.dx || sys_grid.dy != grid.dy || system.dt != T::lit(p.dt) {
        return Err(Error::InvalidConfig {
            field: "dt",
            reason: "factorized system was built for a different grid spacing or time step".into(),
        });
    }

    let hbar = T::lit(p.hbar);
    let field = init_gaussian(&grid, &PacketSpec::from_params(p), T::lit(p.mass), hbar)?;
    let mut state = PropagationState::new(field);
    let mut propagator = Propagator::new(system, Absorber::from_params(&grid, p));
    let mut analyzer = MomentumAnalyzer::new(grid)?;
    let dp_x = analyzer.dp_x(hbar);
    let crit = StationarityCriterion {
        window: p.stationarity_window,
        tolerance: p.stationarity_tolerance,
        min_time: p.stationarity_min_time,
    };
    let n_steps = ((p.t_max / p.dt) - 1e-9).ceil().max(0.0) as usize;

    let mut series = ReflectivitySeries::default();
    let mut timings = RunTimings::default();
    let mut observe = |state: &PropagationState<T>,
                       series: &mut ReflectivitySeries,
                       timings: &mut RunTimings|
     -> Result<f64> {
        let t0 = Instant::now();
        let parts = analyzer.parts(&state.field)?;
        let (mean_x, _) = position_x_moments(&state.field);
        let sample = Sample {
            time: state.time,
            reflectivity: parts.positive,
            norm: state.field.norm(),
            absorbed: state.cumulative_absorbed,
            mean_x,
            mean_px: parts.mean_bin * dp_x,
        };
        series.push(sample);
        observer(state, &sample);
        timings.observation_s += t0.elapsed().as_secs_f64();
        Ok(parts.zero)
    };

    let mut zero_bin = observe(&state, &mut series, &mut timings)?;
    let mut stationary_at = None;
    let t_step = Instant::now();
    for n in 1..=n_steps {
        propagator.step(&mut state)?;
        if n % p.observe_every == 0 || n == n_steps {
            zero_bin = observe(&state, &mut series, &mut timings)?;
            stationary_at = detect_stationary(&series, &crit);
            if stationary_at.is_some() && p.stop_early {
                break;
            }
        }
    }
    timings.steps = state.step_count;
    timings.stepping_s = t_step.elapsed().as_secs_f64() - timings.observation_s;
    series.stationary_at = stationary_at;

    let mut warnings = Vec::new();
    let bookkeeping = state.field.norm() + state.cumulative_absorbed - 1.0;
    if bookkeeping.abs() > 1e-9 {
        warnings.push(format!(
            "norm + absorbed deviates from 1 by {bookkeeping:e}"
        ));
    }
    if zero_bin > 1e-6 {
        warnings.push(format!("p_x = 0 bin holds {zero_bin:e} of the probability"));
    }
    if let Some(edge) = reflected_extent(&state.field) {
        if edge >= grid.x_max().as_f64() {
            warnings.push(format!(
                "reflected packet reaches the upper x edge (<x> + 3 sigma_x = {:e} m)",
                p.units.length_to_si(edge)
            ));
        }
    }
    let outcome = match stationary_at {
        Some(at) => RunOutcome::Stationary { at },
        None => RunOutcome::NonStationary { t_max: p.t_max },
    };
    let r_final = series.last().map_or(0.0, |s| s.reflectivity);
    Ok(RunReport {
        series,
        state,
        outcome,
        r_final,
        zero_bin,
        warnings,
        timings,
    })
}

/// ⟨x⟩ + 3σ_x of the density on the x > 0 side, if any weight is there.
fn reflected_extent<T: Real>(field: &WaveField<T>) -> Option<f64> {
    let g = &field.geometry;
    let (mut s0, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
    for (i, row) in field.amplitudes.chunks_exact(g.n_y).enumerate() {
        let x = g.x(i).as_f64();
        if x <= 0.0 {
            continue;
        }
        let w: f64 = row.iter().map(|c| c.norm_sqr().as_f64()).sum();
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
    }
    (s0 > 0.0).then(|| {
        let m = s1 / s0;
        m + 3.0 * (s2 / s0 - m * m).max(0.0).sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate, SimConfig};
    use crate::potential::{PotentialField, Region};

    fn free_system(g: GridGeometry<f64>, mass: f64, hbar: f64, dt: f64) -> CayleySystem<f64> {
        let pot = PotentialField {
            values: vec![0.0; g.len()],
            regions: vec![Region::Far; g.len()],
            params: CorrugationParams::new(1.0, 0.0, g.period, 0.0, 1.0).unwrap(),
            n_x: g.n_x,
            n_y: g.n_y,
        };
        let h = Hamiltonian::assemble(&g, &pot, mass, hbar).unwrap();
        CayleySystem::build(h, dt, hbar).unwrap()
    }

    fn corrugated_system(g: GridGeometry<f64>, dt: f64) -> CayleySystem<f64> {
        let params = CorrugationParams::new(50.0, 1.0, g.period, 0.3, 2.0).unwrap();
        let pot = evaluate_field(&g, &params);
        let h = Hamiltonian::assemble(&g, &pot, 1.0, 1.0).unwrap();
        CayleySystem::build(h, dt, 1.0).unwrap()
    }

    fn gaussian(g: &GridGeometry<f64>, x0: f64, sigma_x: f64, v: f64) -> WaveField<f64> {
        let spec = PacketSpec {
            x0,
            y0: 0.5 * g.period,
            sigma_x,
            sigma_y: 0.25 * g.period,
            v_x0: v,
            v_y0: 0.0,
        };
        init_gaussian(g, &spec, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_hamiltonian_only_advances_time() {
        let g = GridGeometry::new(64, 4, -10.0, 10.0, 4.0);
        let h = Hamiltonian {
            geometry: g,
            diagonal: vec![0.0; g.len()],
            coupling_x: 0.0,
            coupling_y: 0.0,
        };
        let sys = CayleySystem::build(h, 0.1, 1.0).unwrap();
        let mut state = PropagationState::new(gaussian(&g, 2.0, 1.0, -1.0));
        let before = state.field.clone();
        let mut prop = Propagator::new(&sys, Absorber::disabled(g.n_x));
        for _ in 0..5 {
            prop.step(&mut state).unwrap();
        }
        assert_eq!(state.field, before);
        assert_eq!(state.step_count, 5);
        assert!((state.time - 0.5).abs() < 1e-15);
    }

    #[test]
    fn free_dispersion_matches_analytic_width() {
        let (mass, hbar, sigma0) = (1.0, 1.0, 10.0);
        let g = GridGeometry::new(1024, 4, -256.0, 256.0, 2.0);
        let dt = 0.05;
        let sys = free_system(g, mass, hbar, dt);
        let mut state = PropagationState::new(gaussian(&g, 0.0, sigma0, 0.0));
        let mut prop = Propagator::new(&sys, Absorber::disabled(g.n_x));
        let n = 1000;
        for _ in 0..n {
            prop.step(&mut state).unwrap();
        }
        let t = n as f64 * dt;
        let (_, s) = position_x_moments(&state.field);
        let expect = sigma0 * (1.0 + (hbar * t / (2.0 * mass * sigma0 * sigma0)).powi(2)).sqrt();
        assert!((s - expect).abs() / expect < 1e-3, "{s} vs {expect}");
    }

    #[test]
    fn ehrenfest_drift() {
        let g = GridGeometry::new(1024, 4, -256.0, 256.0, 2.0);
        let dt = 0.02;
        let sys = free_system(g, 1.0, 1.0, dt);
        let v = 0.2;
        let mut state = PropagationState::new(gaussian(&g, -50.0, 10.0, v));
        let mut prop = Propagator::new(&sys, Absorber::disabled(g.n_x));
        for _ in 0..2500 {
            prop.step(&mut state).unwrap();
        }
        let (m, _) = position_x_moments(&state.field);
        let expect = -50.0 + v * state.time;
        assert!(
            (m - expect).abs() < 1e-3 * expect.abs().max(50.0),
            "{m} vs {expect}"
        );
    }

    #[test]
    fn norm_preserved_without_absorber() {
        let g = GridGeometry::new(128, 8, -20.0, 20.0, 4.0);
        let sys = corrugated_system(g, 0.05);
        let mut state = PropagationState::new(gaussian(&g, 8.0, 2.0, -2.0));
        let mut prop = Propagator::new(&sys, Absorber::disabled(g.n_x));
        for _ in 0..200 {
            prop.step(&mut state).unwrap();
            let drift = (state.field.norm() - 1.0).abs();
            assert!(drift <= 1e-10 * state.step_count as f64, "{drift}");
        }
    }

    #[test]
    fn absorber_bookkeeping() {
        let g = GridGeometry::new(256, 4, -40.0, 20.0, 4.0);
        let sys = free_system(g, 1.0, 1.0, 0.05);
        let absorber = Absorber::new(&g, -30.0, 1.0, AbsorberSide::Lower);
        let mut state = PropagationState::new(gaussian(&g, 5.0, 2.0, -3.0));
        // far from the mask the loss per step is negligible
        let mut probe = state.clone();
        let mut prop = Propagator::new(&sys, absorber.clone());
        prop.step(&mut probe).unwrap();
        assert!((1.0 - probe.field.norm()).abs() < 1e-12);

        let (mut last_norm, mut last_abs) = (state.field.norm(), 0.0);
        for _ in 0..400 {
            prop.step(&mut state).unwrap();
            let n = state.field.norm();
            assert!(n <= last_norm + 1e-14);
            assert!(state.cumulative_absorbed >= last_abs);
            assert!((n + state.cumulative_absorbed - 1.0).abs() < 1e-9);
            last_norm = n;
            last_abs = state.cumulative_absorbed;
        }
        assert!(state.cumulative_absorbed > 0.5);
    }

    #[test]
    fn mask_shape() {
        let g = GridGeometry::new(300, 4, -100.0, 50.0, 4.0);
        let a = Absorber::new(&g, -50.0, 50.0 / (1e6f64.ln() + 0.2), AbsorberSide::Lower);
        assert!(a.mask()[0] < 1e-6);
        let i0 = 200;
        assert_eq!(g.x(i0), 0.0);
        assert!(a.mask()[i0] > 1.0 - 1e-6);
        assert!(a.mask().windows(2).all(|w| w[1] >= w[0]));
        let u = Absorber::new(&g, 25.0, 2.0, AbsorberSide::Upper);
        assert!(u.mask()[0] == 1.0 && u.mask()[g.n_x - 1] < 1e-3);
    }

    #[test]
    fn time_reversal_returns_initial_field() {
        let g = GridGeometry::new(64, 8, -10.0, 10.0, 4.0);
        let fwd = corrugated_system(g, 0.05);
        let bwd = corrugated_system(g, -0.05);
        let init = gaussian(&g, 3.0, 1.5, -1.0);
        let mut state = PropagationState::new(init.clone());
        let mut p = Propagator::new(&fwd, Absorber::disabled(g.n_x));
        for _ in 0..50 {
            p.step(&mut state).unwrap();
        }
        let mut q = Propagator::new(&bwd, Absorber::disabled(g.n_x));
        for _ in 0..50 {
            q.step(&mut state).unwrap();
        }
        let err = state
            .field
            .amplitudes
            .iter()
            .zip(&init.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    fn tiny_config() -> ValidatedConfig {
        let mut c = SimConfig::desk();
        c.n_x = 1 << 9;
        c.n_y = 4;
        c.t_max = Some(200e-9);
        c.observe_every = 5;
        validate(&c).unwrap()
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = tiny_config();
        let a = run::<f64>(&cfg).unwrap();
        let b = run::<f64>(&cfg).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.state.field, b.state.field);
        assert!(a.series.samples.windows(2).all(|w| w[0].time < w[1].time));
        assert!(a
            .series
            .samples
            .iter()
            .all(|s| (0.0..=1.0).contains(&s.reflectivity)));
    }

    #[test]
    fn reused_system_matches_fresh_run() {
        let cfg = tiny_config();
        let (sys, _) = prepare_system::<f64>(&cfg).unwrap();
        let a = run_with_system(&cfg, &sys, |_, _| {}).unwrap();
        let b = run::<f64>(&cfg).unwrap();
        assert_eq!(a.series, b.series);

        let mut other = cfg.config().clone();
        other.n_y = 8;
        let other = validate(&other).unwrap();
        assert!(matches!(
            run_with_system(&other, &sys, |_, _| {}),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn observer_sees_every_sample() {
        let cfg = tiny_config();
        let (sys, _) = prepare_system::<f64>(&cfg).unwrap();
        let mut seen = Vec::new();
        let r = run_with_system(&cfg, &sys, |st, s| seen.push((st.step_count, s.time))).unwrap();
        assert_eq!(seen.len(), r.series.len());
        assert_eq!(seen[0], (0, 0.0));
    }

    #[test]
    fn f32_run_tracks_f64() {
        let cfg = tiny_config();
        let a = run::<f64>(&cfg).unwrap();
        let b = run::<f32>(&cfg).unwrap();
        assert_eq!(a.series.len(), b.series.len());
        for (x, y) in a.series.samples.iter().zip(&b.series.samples) {
            assert!((x.norm - y.norm).abs() < 1e-4);
            assert!((x.reflectivity - y.reflectivity).abs() < 1e-4);
        }
    }
}
