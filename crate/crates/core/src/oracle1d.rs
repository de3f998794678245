//! Stationary 1D scattering off the cutoff potential (flat surface), solved
//! with the Numerov recursion. Serves as the reference for flat-surface
//! wave-packet runs.
//!
//! The solution is seeded deep inside the flat inner region as a pure
//! left-moving wave e^{−iq_in x} and integrated outward to `x_match`, where
//! the last two samples are split into incoming e^{−iqx} and reflected
//! e^{+iqx} parts. Wavenumbers are the exact discrete ones of the recursion,
//! 2cos(qh) = (12 − 10w)/w with w = 1 + h²k²/12, so a constant potential is
//! propagated without phase error.

use crate::error::{Error, Result};
use crate::potential::radial;
use crate::scalar::Complex;

type C64 = Complex<f64>;

/// V(x) = −c3/x³ beyond the cutoff, its parabolic continuation inside, and
/// the constant floor −5c3/(2Δ³) for x < 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential1D {
    pub c3: f64,
    pub cutoff: f64,
}

impl Potential1D {
    pub fn new(c3: f64, cutoff: f64) -> Result<Self> {
        if !(c3 > 0.0 && c3.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "c3",
                reason: format!("must be positive and finite, got {c3}"),
            });
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "cutoff",
                reason: format!("must be positive and finite, got {cutoff}"),
            });
        }
        Ok(Self { c3, cutoff })
    }

    pub fn value(&self, x: f64) -> f64 {
        radial(x, self.c3, self.cutoff)
    }

    pub fn floor(&self) -> f64 {
        -2.5 * self.c3 / self.cutoff.powi(3)
    }

    /// Distance beyond which |V| < `fraction`·E.
    pub fn tail_distance(&self, energy: f64, fraction: f64) -> f64 {
        (self.c3 / (fraction * energy)).cbrt()
    }
}

/// Discrete wavenumber of the Numerov recursion for local k and step h.
fn discrete_q(k: f64, h: f64) -> (f64, f64) {
    let w = 1.0 + h * h * k * k / 12.0;
    let c = (12.0 - 10.0 * w) / (2.0 * w);
    (c.clamp(-1.0, 1.0).acos() / h, w)
}

/// Outcome of one integration at fixed step and matching point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scattering {
    pub reflectivity: f64,
    /// Transmitted flux fraction, from the discrete Wronskian.
    pub transmissivity: f64,
    pub step: f64,
    pub x_match: f64,
}

impl Scattering {
    pub fn flux_error(&self) -> f64 {
        (self.reflectivity + self.transmissivity - 1.0).abs()
    }
}

/// Integrates ψ'' = −(2m/ħ²)(E − V(x))ψ from the constant region at x ≤ 0,
/// where `v(x) == v_inner`, out to `x_match`, and returns |r|².
///
/// `v` must be negligible at `x_match`.
pub fn scatter(
    v: impl Fn(f64) -> f64,
    v_inner: f64,
    mass: f64,
    hbar: f64,
    energy: f64,
    step: f64,
    x_match: f64,
) -> Result<Scattering> {
    if !(energy > 0.0) {
        return Err(Error::NonPositiveEnergy(energy));
    }
    let scale = 2.0 * mass / (hbar * hbar);
    let ksq = |x: f64| scale * (energy - v(x));
    let h = step;
    let h2 = h * h / 12.0;

    let k_in = (scale * (energy - v_inner)).sqrt();
    let (q_in, w_in) = discrete_q(k_in, h);
    let x0 = -2.0 * h;
    let n_end = ((x_match - x0) / h).ceil() as usize;

    let mut psi_prev = C64::from_polar(1.0, -q_in * x0);
    let mut psi = C64::from_polar(1.0, -q_in * (x0 + h));
    let mut w_prev = 1.0 + h2 * ksq(x0);
    let mut w_cur = 1.0 + h2 * ksq(x0 + h);
    for n in 2..=n_end + 1 {
        let x_next = x0 + n as f64 * h;
        let w_next = 1.0 + h2 * ksq(x_next);
        let next = (psi * (12.0 - 10.0 * w_cur) - psi_prev * w_prev) / w_next;
        psi_prev = psi;
        psi = next;
        w_prev = w_cur;
        w_cur = w_next;
    }
    let xa = x0 + n_end as f64 * h;
    let xb = xa + h;

    let k_out = (scale * energy).sqrt();
    let (q_out, w_out) = discrete_q(k_out, h);
    let a0 = C64::from_polar(1.0, q_out * xa);
    let a1 = C64::from_polar(1.0, q_out * xb);
    let det = a0 / a1 - a1 / a0;
    let reflected = (psi_prev / a1 - psi / a0) / det;
    let incoming = (a0 * psi - a1 * psi_prev) / det;

    let inc = incoming.norm_sqr();
    let reflectivity = reflected.norm_sqr() / inc;
    let transmissivity =
        (w_in * w_in * (q_in * h).sin()) / (w_out * w_out * (q_out * h).sin()) / inc;
    Ok(Scattering {
        reflectivity,
        transmissivity,
        step: h,
        x_match: xa,
    })
}

/// Numerical settings; `None` picks the defaults described on each field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    /// Default: min(Δ/50, 2π/(50·k_in)).
    pub step: Option<f64>,
    /// Default: where c3/x³ falls below 1e-9·E, at least 10Δ.
    pub x_match: Option<f64>,
    /// Largest accepted change of R under step halving or x_match doubling.
    pub tolerance: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            step: None,
            x_match: None,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub scattering: Scattering,
    /// |ΔR| under step halving.
    pub step_change: f64,
    /// |ΔR| under x_match doubling.
    pub match_change: f64,
}

impl OracleResult {
    pub fn reflectivity(&self) -> f64 {
        self.scattering.reflectivity
    }
}

/// Reflectivity with convergence checks. Energy is the kinetic energy ½mv²
/// of the incoming atom.
pub fn reflectivity_1d_checked(
    pot: &Potential1D,
    mass: f64,
    hbar: f64,
    energy: f64,
    settings: &OracleSettings,
) -> Result<OracleResult> {
    if !(energy > 0.0) {
        return Err(Error::NonPositiveEnergy(energy));
    }
    let k_in = (2.0 * mass * (energy - pot.floor())).sqrt() / hbar;
    let step = settings
        .step
        .unwrap_or_else(|| (pot.cutoff / 50.0).min(std::f64::consts::TAU / (50.0 * k_in)));
    let x_match = settings
        .x_match
        .unwrap_or_else(|| pot.tail_distance(energy, 1e-9).max(10.0 * pot.cutoff));
    let solve = |h: f64, xm: f64| scatter(|x| pot.value(x), pot.floor(), mass, hbar, energy, h, xm);
    let base = solve(step, x_match)?;
    let step_change = (solve(0.5 * step, x_match)?.reflectivity - base.reflectivity).abs();
    let match_change = (solve(step, 2.0 * x_match)?.reflectivity - base.reflectivity).abs();
    // report the refinement that moved R the most
    let (refinement, change) = if step_change >= match_change {
        ("step", step_change)
    } else {
        ("x_match", match_change)
    };
    if change > settings.tolerance {
        return Err(Error::NoConvergence { refinement, change });
    }
    Ok(OracleResult {
        scattering: base,
        step_change,
        match_change,
    })
}

/// |r|² at kinetic energy `energy` with default settings.
pub fn reflectivity_1d(pot: &Potential1D, mass: f64, hbar: f64, energy: f64) -> Result<f64> {
    Ok(
        reflectivity_1d_checked(pot, mass, hbar, energy, &OracleSettings::default())?
            .reflectivity(),
    )
}

/// Reflectivity averaged over the momentum distribution of a Gaussian packet
/// with mean speed `speed` and position width `sigma_x`.
///
/// The weight |φ(k)|² is a Gaussian of width 1/(2σ_x) about k₀ = m·speed/ħ,
/// integrated by the trapezoid rule over ±6 widths (121 nodes, negative k
/// dropped). Convergence of the underlying solver is checked at k₀ only.
pub fn packet_averaged_reflectivity(
    pot: &Potential1D,
    mass: f64,
    hbar: f64,
    speed: f64,
    sigma_x: f64,
) -> Result<f64> {
    let k0 = mass * speed.abs() / hbar;
    let energy0 = 0.5 * mass * speed * speed;
    let settings = OracleSettings::default();
    let central = reflectivity_1d_checked(pot, mass, hbar, energy0, &settings)?;
    if !sigma_x.is_finite() {
        return Ok(central.reflectivity());
    }
    let sk = 0.5 / sigma_x;
    let nodes = 121;
    let step = central.scattering.step;
    let x_match = central.scattering.x_match;
    let (mut num, mut den) = (0.0, 0.0);
    for n in 0..nodes {
        let u = -6.0 + 12.0 * n as f64 / (nodes - 1) as f64;
        let k = k0 + u * sk;
        if k <= 0.0 {
            continue;
        }
        let end = if n == 0 || n == nodes - 1 { 0.5 } else { 1.0 };
        let weight = end * (-0.5 * u * u).exp();
        let e = hbar * hbar * k * k / (2.0 * mass);
        let r = if n == (nodes - 1) / 2 {
            central.reflectivity()
        } else {
            scatter(|x| pot.value(x), pot.floor(), mass, hbar, e, step, x_match)?.reflectivity
        };
        num += weight * r;
        den += weight;
    }
    Ok(num / den)
}
