//! Two-dimensional wave-packet simulation of quantum reflection of atoms
//! from a corrugated attractive surface potential.
//!
//! The time step is the Crank-Nicolson scheme in Cayley form. Its implicit
//! system is complex symmetric and banded under x-major ordering, so one
//! pivot-free LLᵀ factorization is computed per run and reused for every step.
//! Reflectivity is read off the 2D momentum distribution; a stationary 1D
//! Numerov solver provides the flat-surface reference.
//!
//! Numerical types are generic over the real scalar ([`Real`], implemented
//! for `f32` and `f64`). Aliases for both precisions are provided below.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas in the banded solver.
#![allow(clippy::needless_range_loop)]

pub mod banded;
pub mod config;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod observables;
pub mod oracle1d;
pub mod potential;
pub mod propagator;
pub mod scalar;
pub mod units;

pub use banded::{memory_model, memory_model_for, BandedFactor, BandedMatrix, MemoryEstimate};
pub use config::{parse_config, validate, InternalParams, SimConfig, ValidatedConfig};
pub use error::{Error, Result};
pub use grid::{init_gaussian, write_snapshot, GridGeometry, PacketSpec, WaveField};
pub use hamiltonian::{assemble_h, build_cayley, CayleySystem, Hamiltonian};
pub use observables::{
    detect_stationary, effective_reflectivity, expectations, log_spaced, momentum_density,
    reflectivity, ReflectivitySeries, Sample,
};
pub use oracle1d::{packet_averaged_reflectivity, reflectivity_1d, Potential1D};
pub use potential::{evaluate_field, CorrugationParams, PotentialField};
pub use propagator::{
    prepare_system, run, run_with_system, Absorber, PropagationState, RunOutcome, RunReport,
    RunTimings,
};
pub use scalar::{Complex, Real};
pub use units::UnitSystem;

pub type BandedMatrix64 = BandedMatrix<f64>;
pub type BandedMatrix32 = BandedMatrix<f32>;
pub type BandedFactor64 = BandedFactor<f64>;
pub type BandedFactor32 = BandedFactor<f32>;
pub type WaveField64 = WaveField<f64>;
pub type WaveField32 = WaveField<f32>;
pub type Hamiltonian64 = Hamiltonian<f64>;
pub type Hamiltonian32 = Hamiltonian<f32>;
pub type CayleySystem64 = CayleySystem<f64>;
pub type CayleySystem32 = CayleySystem<f32>;
pub type RunReport64 = RunReport<f64>;
pub type RunReport32 = RunReport<f32>;
