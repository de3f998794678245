//! Unit system used inside the engine.
//!
//! Configuration is expressed in SI. The numerics run in a scaled system
//! (nanometre, nanosecond, ³He mass by default) where the Hamiltonian entries
//! of a typical run are of order unity to a few thousand.

use crate::error::{Error, Result};

/// Reduced Planck constant in J·s (CODATA 2018, exact).
pub const HBAR_SI: f64 = 1.054_571_817e-34;

/// Mass of a ³He atom in kg, as used for the reference parameter set.
pub const HE3_MASS_KG: f64 = 5.01e-27;

/// Conversion factors from internal units to SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    length_m: f64,
    time_s: f64,
    mass_kg: f64,
}

impl UnitSystem {
    pub fn new(length_m: f64, time_s: f64, mass_kg: f64) -> Result<Self> {
        for (field, v) in [
            ("length_unit", length_m),
            ("time_unit", time_s),
            ("mass_unit", mass_kg),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig {
                    field,
                    reason: format!("unit factor must be positive and finite, got {v}"),
                });
            }
        }
        Ok(Self {
            length_m,
            time_s,
            mass_kg,
        })
    }

    /// Nanometre / nanosecond / ³He-mass system used by default.
    pub const fn nano() -> Self {
        Self {
            length_m: 1e-9,
            time_s: 1e-9,
            mass_kg: HE3_MASS_KG,
        }
    }

    pub const fn si() -> Self {
        Self {
            length_m: 1.0,
            time_s: 1.0,
            mass_kg: 1.0,
        }
    }

    pub fn length_unit(&self) -> f64 {
        self.length_m
    }

    pub fn time_unit(&self) -> f64 {
        self.time_s
    }

    pub fn mass_unit(&self) -> f64 {
        self.mass_kg
    }

    fn energy_unit(&self) -> f64 {
        self.mass_kg * self.length_m * self.length_m / (self.time_s * self.time_s)
    }

    /// ħ expressed in internal units.
    pub fn hbar(&self) -> f64 {
        HBAR_SI * self.time_s / (self.mass_kg * self.length_m * self.length_m)
    }

    pub fn length(&self, meters: f64) -> f64 {
        meters / self.length_m
    }

    pub fn length_to_si(&self, internal: f64) -> f64 {
        internal * self.length_m
    }

    pub fn time(&self, seconds: f64) -> f64 {
        seconds / self.time_s
    }

    pub fn time_to_si(&self, internal: f64) -> f64 {
        internal * self.time_s
    }

    pub fn mass(&self, kg: f64) -> f64 {
        kg / self.mass_kg
    }

    pub fn mass_to_si(&self, internal: f64) -> f64 {
        internal * self.mass_kg
    }

    pub fn velocity(&self, m_per_s: f64) -> f64 {
        m_per_s * self.time_s / self.length_m
    }

    pub fn velocity_to_si(&self, internal: f64) -> f64 {
        internal * self.length_m / self.time_s
    }

    pub fn energy(&self, joules: f64) -> f64 {
        joules / self.energy_unit()
    }

    pub fn energy_to_si(&self, internal: f64) -> f64 {
        internal * self.energy_unit()
    }

    pub fn momentum_to_si(&self, internal: f64) -> f64 {
        internal * self.mass_kg * self.length_m / self.time_s
    }

    /// Converts an interaction constant in J·m³.
    pub fn c3(&self, joule_m3: f64) -> f64 {
        joule_m3 / (self.energy_unit() * self.length_m.powi(3))
    }

    pub fn c3_to_si(&self, internal: f64) -> f64 {
        internal * self.energy_unit() * self.length_m.powi(3)
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::nano()
    }
}
