//! Corrugated van der Waals surface potential with a parabolic cutoff.
//!
//! The distance to the surface is `r(x, y) = x − A·sin(2πy/L + φ)`. Beyond the
//! cutoff the potential is −C₃/r³; inside `0 ≤ r ≤ Δ` it continues as the
//! parabola matching value and slope at `r = Δ`; for `r < 0` it is flat at the
//! parabola's vertex value −5C₃/(2Δ³).

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::scalar::Real;
use crate::units::UnitSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrugationParams<T> {
    /// Interaction constant, energy · length³.
    pub c3: T,
    pub amplitude: T,
    pub period: T,
    pub phase: T,
    pub cutoff: T,
}

impl<T: Real> CorrugationParams<T> {
    pub fn new(c3: T, amplitude: T, period: T, phase: T, cutoff: T) -> Result<Self> {
        let bad = |field, reason: &str| {
            Err(Error::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if !(c3 > T::zero()) {
            return bad("c3", "must be > 0");
        }
        if !(amplitude >= T::zero()) {
            return bad("amplitude", "must be >= 0");
        }
        if !(period > T::zero()) {
            return bad("period", "must be > 0");
        }
        if !(cutoff > T::zero()) {
            return bad("cutoff", "must be > 0");
        }
        Ok(Self {
            c3,
            amplitude,
            period,
            phase,
            cutoff,
        })
    }

    pub fn from_params(p: &crate::config::InternalParams) -> Result<Self> {
        Self::new(
            T::lit(p.c3),
            T::lit(p.amplitude),
            T::lit(p.period),
            T::lit(p.phase),
            T::lit(p.cutoff),
        )
    }

    /// Depth of the flat inner region, −5C₃/(2Δ³).
    pub fn floor(&self) -> T {
        -T::lit(2.5) * self.c3 / self.cutoff.powi(3)
    }
}

/// Piecewise region of a point relative to the cutoff shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// r ≥ Δ: bare −C₃/r³.
    Far,
    /// 0 ≤ r < Δ: parabolic continuation.
    Shell,
    /// r < 0: constant floor.
    Inner,
}

pub fn classify<T: Real>(r: T, cutoff: T) -> Region {
    if r >= cutoff {
        Region::Far
    } else if r >= T::zero() {
        Region::Shell
    } else {
        Region::Inner
    }
}

#[inline]
pub fn effective_distance<T: Real>(x: T, y: T, p: &CorrugationParams<T>) -> T {
    x - p.amplitude * (T::TAU() * y / p.period + p.phase).sin()
}

/// Potential as a function of the effective distance `r`.
#[inline]
pub fn radial<T: Real>(r: T, c3: T, cutoff: T) -> T {
    if r >= cutoff {
        -c3 / (r * r * r)
    } else if r >= T::zero() {
        T::lit(1.5) * c3 / cutoff.powi(5) * r * r - T::lit(2.5) * c3 / cutoff.powi(3)
    } else {
        -T::lit(2.5) * c3 / cutoff.powi(3)
    }
}

/// dV/dr of [`radial`].
#[inline]
pub fn radial_derivative<T: Real>(r: T, c3: T, cutoff: T) -> T {
    if r >= cutoff {
        T::lit(3.0) * c3 / r.powi(4)
    } else if r >= T::zero() {
        T::lit(3.0) * c3 / cutoff.powi(5) * r
    } else {
        T::zero()
    }
}

#[inline]
pub fn evaluate<T: Real>(x: T, y: T, p: &CorrugationParams<T>) -> T {
    radial(effective_distance(x, y, p), p.c3, p.cutoff)
}

/// ∂V/∂x; equals dV/dr since ∂r/∂x = 1.
#[inline]
pub fn evaluate_dx<T: Real>(x: T, y: T, p: &CorrugationParams<T>) -> T {
    radial_derivative(effective_distance(x, y, p), p.c3, p.cutoff)
}

/// Potential sampled on every grid point, x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField<T> {
    pub values: Vec<T>,
    pub regions: Vec<Region>,
    pub params: CorrugationParams<T>,
    pub n_x: usize,
    pub n_y: usize,
}

impl<T: Real> PotentialField<T> {
    #[inline]
    pub fn at(&self, i_x: usize, i_y: usize) -> T {
        self.values[i_x * self.n_y + i_y]
    }

    pub fn min(&self) -> T {
        self.values.iter().cloned().fold(T::infinity(), T::min)
    }

    /// Writes `x_m,V_J` rows along the grid row `i_y`.
    pub fn write_row_csv<W: Write>(
        &self,
        out: &mut W,
        grid: &GridGeometry<T>,
        i_y: usize,
        units: &UnitSystem,
    ) -> Result<()> {
        if i_y >= self.n_y {
            return Err(Error::DimensionMismatch {
                expected: self.n_y,
                found: i_y,
            });
        }
        writeln!(out, "x_m,V_J")?;
        for i in 0..self.n_x {
            writeln!(
                out,
                "{:e},{:e}",
                units.length_to_si(grid.x(i).as_f64()),
                units.energy_to_si(self.at(i, i_y).as_f64())
            )?;
        }
        Ok(())
    }
}

/// Samples the potential and its region classifier on `grid`.
pub fn evaluate_field<T: Real>(
    grid: &GridGeometry<T>,
    params: &CorrugationParams<T>,
) -> PotentialField<T> {
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    let mut regions = Vec::with_capacity(n);
    // the y modulation is shared by every x column
    let shift: Vec<T> = (0..grid.n_y)
        .map(|j| params.amplitude * (T::TAU() * grid.y(j) / params.period + params.phase).sin())
        .collect();
    for i in 0..grid.n_x {
        let x = grid.x(i);
        for s in &shift {
            let r = x - *s;
            values.push(radial(r, params.c3, params.cutoff));
            regions.push(classify(r, params.cutoff));
        }
    }
    PotentialField {
        values,
        regions,
        params: *params,
        n_x: grid.n_x,
        n_y: grid.n_y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate, SimConfig};
    use std::f64::consts::PI;

    fn params(amplitude: f64, phase: f64) -> CorrugationParams<f64> {
        CorrugationParams::new(1.0, amplitude, 100.0, phase, 10.0).unwrap()
    }

    #[test]
    fn effective_distance_examples() {
        let p = params(10.0, 0.0);
        assert_eq!(effective_distance(50.0, 0.0, &p), 50.0);
        assert!((effective_distance(50.0, 25.0, &p) - 40.0).abs() < 1e-12);
        let p = params(10.0, PI);
        // independent scalar evaluation
        let expect = 50.0 - 10.0 * (2.0 * PI * 25.0 / 100.0 + PI).sin();
        let got = effective_distance(50.0, 25.0, &p);
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 60.0).abs() < 1e-12);
    }

    #[test]
    fn branch_values() {
        let (c3, d): (f64, f64) = (1.0, 1.0);
        assert_eq!(radial(2.0, c3, d), -0.125);
        let far = -c3 / d.powi(3);
        let shell = 1.5 * c3 / d.powi(5) * d * d - 2.5 * c3 / d.powi(3);
        assert!((far - shell).abs() < 1e-15);
        assert_eq!(radial(0.0, c3, d), -2.5);
        assert_eq!(radial(-3.0, c3, d), -2.5);
    }

    #[test]
    fn continuity_and_slope_at_cutoff() {
        let (c3, d): (f64, f64) = (7984.0, 10.0);
        let eps = d * 1e-12;
        let lo = radial(d - eps, c3, d);
        let hi = radial(d + eps, c3, d);
        assert!(((lo - hi) / hi).abs() < 1e-10);
        let s_lo = radial_derivative(d * (1.0 - 1e-15), c3, d);
        let s_hi = radial_derivative(d, c3, d);
        assert!(((s_lo - 3.0 * c3 / d.powi(4)) / s_hi).abs() < 1e-12);
        assert!(((s_hi - 3.0 * c3 / d.powi(4)) / s_hi).abs() < 1e-15);
        // one-sided finite differences at h = Δ·1e-4
        let h = d * 1e-4;
        let fd_left = (radial(d, c3, d) - radial(d - h, c3, d)) / h;
        let fd_right = (radial(d + h, c3, d) - radial(d, c3, d)) / h;
        let exact = 3.0 * c3 / d.powi(4);
        assert!(((fd_left - exact) / exact).abs() < 1e-3);
        assert!(((fd_right - exact) / exact).abs() < 1e-3);
        // central differences straddling the junction: the curvature jumps
        // from 3c3/Δ⁵ to −12c3/Δ⁵, leaving an O(h) residue of 15h/(12Δ)
        let fd = (radial(d + h, c3, d) - radial(d - h, c3, d)) / (2.0 * h);
        assert!(((fd - exact) / exact).abs() < 1.5 * 15.0 * h / (12.0 * d));
    }

    #[test]
    fn monotone_increasing_outside() {
        let (c3, d): (f64, f64) = (1.0, 1.0);
        let mut prev = radial(0.0, c3, d);
        for k in 1..2000 {
            let r = k as f64 * 0.01;
            let v = radial(r, c3, d);
            assert!(v > prev, "not increasing at r = {r}");
            assert!(v < 0.0);
            prev = v;
        }
    }

    #[test]
    fn classify_regions() {
        assert_eq!(classify(10.0, 10.0), Region::Far);
        assert_eq!(classify(9.9, 10.0), Region::Shell);
        assert_eq!(classify(0.0, 10.0), Region::Shell);
        assert_eq!(classify(-0.1, 10.0), Region::Inner);
    }

    #[test]
    fn flat_surface_rows_are_identical() {
        let g = GridGeometry::<f64>::new(64, 8, -50.0, 200.0, 100.0);
        let f = evaluate_field(&g, &params(0.0, 0.0));
        for row in f.values.chunks_exact(8) {
            assert!(row.iter().all(|v| *v == row[0]));
        }
    }

    #[test]
    fn field_at_packet_centre() {
        let v = validate(&SimConfig::reference()).unwrap();
        let p = v.internal();
        let cp = CorrugationParams::<f64>::from_params(p).unwrap();
        let got = v.units().energy_to_si(evaluate(p.x0, 0.0, &cp));
        let expect = -4.0e-50 / (2.0e-6f64).powi(3);
        assert!(((got - expect) / expect).abs() < 1e-12);
        assert!((got + 5.0e-33).abs() < 1e-45);
    }

    #[test]
    fn half_period_shift_with_phase_pi() {
        let g = GridGeometry::<f64>::new(32, 16, -50.0, 100.0, 100.0);
        let a = evaluate_field(&g, &params(10.0, 0.0));
        let b = evaluate_field(&g, &params(10.0, PI));
        for i in 0..g.n_x {
            for j in 0..g.n_y {
                let shifted = (j + g.n_y / 2) % g.n_y;
                let (va, vb) = (a.at(i, j), b.at(i, shifted));
                assert!((va - vb).abs() <= 1e-12 * va.abs().max(1e-30), "{va} {vb}");
            }
        }
    }

    #[test]
    fn region_invariants_and_floor() {
        let p = params(10.0, 0.3);
        let g = GridGeometry::<f64>::new(128, 16, -50.0, 100.0, 100.0);
        let f = evaluate_field(&g, &p);
        for i in 0..g.n_x {
            for j in 0..g.n_y {
                let r = effective_distance(g.x(i), g.y(j), &p);
                let k = g.index(i, j);
                assert_eq!(f.regions[k], classify(r, p.cutoff));
                assert!(f.values[k].is_finite());
                if f.regions[k] == Region::Inner {
                    assert_eq!(f.values[k], p.floor());
                }
            }
        }
        assert_eq!(f.min(), p.floor());
    }

    #[test]
    fn translation_covariance_and_equipotential_junction() {
        let p = params(10.0, 0.7);
        for k in 0..50 {
            let y = k as f64 * 2.0;
            let s = p.amplitude * (2.0 * PI * y / p.period + p.phase).sin();
            assert!((evaluate(37.0 + s, y, &p) - radial(37.0, 1.0, 10.0)).abs() < 1e-15);
            // the junction locus r = Δ is an equipotential
            let at_junction = evaluate(p.cutoff + s, y, &p);
            assert!((at_junction + 1.0 / 1000.0).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_row_dump() {
        let g = GridGeometry::<f64>::new(8, 4, -50.0, 100.0, 100.0);
        let f = evaluate_field(&g, &params(0.0, 0.0));
        let mut out = Vec::new();
        f.write_row_csv(&mut out, &g, 1, &UnitSystem::nano())
            .unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.lines().count(), 9);
        let first: Vec<f64> = s
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|t| t.parse().unwrap())
            .collect();
        assert!((first[0] + 5e-8).abs() < 1e-20);
        assert!(first[1] < 0.0);
        assert!(f
            .write_row_csv(&mut Vec::new(), &g, 4, &UnitSystem::nano())
            .is_err());
    }
}
