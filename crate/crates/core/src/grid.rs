//! Grid geometry, x-major flattening and the initial Gaussian packet.
//!
//! Grid point `(i_x, i_y)` is stored at `i_x * n_y + i_y`. With this ordering
//! y-neighbours sit at offset ±1 and x-neighbours at offset ±n_y, which keeps
//! the Hamiltonian inside a band of half-width n_y.

use std::io::{Read, Write};

use crate::config::InternalParams;
use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry<T> {
    pub n_x: usize,
    pub n_y: usize,
    pub dx: T,
    pub dy: T,
    pub x_min: T,
    /// Extent of the periodic y direction.
    pub period: T,
}

impl<T: Real> GridGeometry<T> {
    /// Uniform grid on `[x_min, x_max) × [0, period)`.
    pub fn new(n_x: usize, n_y: usize, x_min: T, x_max: T, period: T) -> Self {
        Self {
            n_x,
            n_y,
            dx: (x_max - x_min) / T::from_count(n_x),
            dy: period / T::from_count(n_y),
            x_min,
            period,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i_x: usize, i_y: usize) -> usize {
        i_x * self.n_y + i_y
    }

    /// Inverse of [`GridGeometry::index`].
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k / self.n_y, k % self.n_y)
    }

    #[inline]
    pub fn x(&self, i_x: usize) -> T {
        self.x_min + T::from_count(i_x) * self.dx
    }

    #[inline]
    pub fn y(&self, i_y: usize) -> T {
        T::from_count(i_y) * self.dy
    }

    pub fn x_max(&self) -> T {
        self.x_min + T::from_count(self.n_x) * self.dx
    }

    /// Area element of one grid cell.
    pub fn cell(&self) -> T {
        self.dx * self.dy
    }

    /// Signed periodic displacement of `y` from `center`, in `[-period/2, period/2)`.
    pub fn wrap_y(&self, y: T, center: T) -> T {
        let half = T::lit(0.5) * self.period;
        let mut d = (y - center + half) % self.period;
        if d < T::zero() {
            d += self.period;
        }
        d - half
    }
}

/// Builds the grid described by a validated configuration.
pub fn make_grid<T: Real>(p: &InternalParams) -> GridGeometry<T> {
    GridGeometry::new(
        p.n_x,
        p.n_y,
        T::lit(p.x_min),
        T::lit(p.x_max),
        T::lit(p.period),
    )
}

/// Complex amplitudes on the grid, x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField<T> {
    pub amplitudes: Vec<Complex<T>>,
    pub geometry: GridGeometry<T>,
}

impl<T: Real> WaveField<T> {
    pub fn zeros(geometry: GridGeometry<T>) -> Self {
        Self {
            amplitudes: vec![Complex::new(T::zero(), T::zero()); geometry.len()],
            geometry,
        }
    }

    /// Discrete norm Σ|ψ|²·dx·dy, accumulated in f64.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.amplitudes.iter().map(|c| c.norm_sqr().as_f64()).sum();
        s * self.geometry.cell().as_f64()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let s = T::lit(1.0 / n.sqrt());
            for a in &mut self.amplitudes {
                *a = *a * s;
            }
        }
    }

    /// |ψ|² summed over y for each x column, times dy.
    pub fn x_marginal(&self) -> Vec<T> {
        let g = &self.geometry;
        self.amplitudes
            .chunks_exact(g.n_y)
            .map(|row| row.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr()) * g.dy)
            .collect()
    }

    /// |ψ|² summed over x for each y row, times dx.
    pub fn y_marginal(&self) -> Vec<T> {
        let g = &self.geometry;
        let mut out = vec![T::zero(); g.n_y];
        for row in self.amplitudes.chunks_exact(g.n_y) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c.norm_sqr();
            }
        }
        out.iter_mut().for_each(|v| *v *= g.dx);
        out
    }
}

/// Parameters of the initial Gaussian packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpec<T> {
    pub x0: T,
    pub y0: T,
    pub sigma_x: T,
    /// `+inf` gives a profile that is flat along y.
    pub sigma_y: T,
    pub v_x0: T,
    pub v_y0: T,
}

impl<T: Real> PacketSpec<T> {
    pub fn from_params(p: &InternalParams) -> Self {
        Self {
            x0: T::lit(p.x0),
            y0: T::lit(p.y0),
            sigma_x: T::lit(p.sigma_x),
            sigma_y: T::lit(p.sigma_y),
            v_x0: T::lit(p.v_x0),
            v_y0: T::lit(p.v_y0),
        }
    }
}

/// Gaussian packet ψ ∝ exp(−(x−x0)²/4σx²) g(y) exp(i(p_x x + p_y y)/ħ).
///
/// The y factor is the Gaussian evaluated on the single period centred on
/// `y0` (periodic images are not summed), so for σ_y ≫ L it tends to a flat
/// profile. The result has unit discrete norm.
pub fn init_gaussian<T: Real>(
    grid: &GridGeometry<T>,
    spec: &PacketSpec<T>,
    mass: T,
    hbar: T,
) -> Result<WaveField<T>> {
    let x_max = grid.x_max();
    if !(spec.x0 >= grid.x_min && spec.x0 < x_max) {
        return Err(Error::PacketOutsideGrid {
            x0: spec.x0.as_f64(),
            x_min: grid.x_min.as_f64(),
            x_max: x_max.as_f64(),
        });
    }
    if !(spec.sigma_x > T::zero() && spec.sigma_y > T::zero()) {
        return Err(Error::InvalidConfig {
            field: "sigma",
            reason: "packet widths must be positive".into(),
        });
    }
    let kx = mass * spec.v_x0 / hbar;
    let ky = mass * spec.v_y0 / hbar;
    let four = T::lit(4.0);

    let fx: Vec<Complex<T>> = (0..grid.n_x)
        .map(|i| {
            let x = grid.x(i);
            let d = x - spec.x0;
            let env = (-(d * d) / (four * spec.sigma_x * spec.sigma_x)).exp();
            Complex::from_polar(env, kx * x)
        })
        .collect();
    let fy: Vec<Complex<T>> = (0..grid.n_y)
        .map(|j| {
            let d = grid.wrap_y(grid.y(j), spec.y0);
            let env = if spec.sigma_y.is_infinite() {
                T::one()
            } else {
                (-(d * d) / (four * spec.sigma_y * spec.sigma_y)).exp()
            };
            Complex::from_polar(env, ky * d)
        })
        .collect();

    let mut field = WaveField::zeros(*grid);
    for (row, ax) in field.amplitudes.chunks_exact_mut(grid.n_y).zip(&fx) {
        for (a, ay) in row.iter_mut().zip(&fy) {
            *a = *ax * *ay;
        }
    }
    field.normalize();
    Ok(field)
}

// ---------------------------------------------------------------------------
// binary snapshots

/// Writes a snapshot: little-endian header `n_x: u64, n_y: u64, dx: f64,
/// dy: f64, time: f64` (SI) followed by `(re: f32, im: f32)` pairs in x-major
/// order.
pub fn write_snapshot<T: Real, W: Write>(
    out: &mut W,
    field: &WaveField<T>,
    time_s: f64,
    length_unit_m: f64,
) -> Result<()> {
    let g = &field.geometry;
    out.write_all(&(g.n_x as u64).to_le_bytes())?;
    out.write_all(&(g.n_y as u64).to_le_bytes())?;
    out.write_all(&(g.dx.as_f64() * length_unit_m).to_le_bytes())?;
    out.write_all(&(g.dy.as_f64() * length_unit_m).to_le_bytes())?;
    out.write_all(&time_s.to_le_bytes())?;
    // amplitudes carry units of 1/length; rescale so Σ|ψ|² dx dy stays 1 in SI
    let scale = 1.0 / length_unit_m;
    let mut buf = Vec::with_capacity(field.amplitudes.len() * 8);
    for c in &field.amplitudes {
        buf.extend_from_slice(&((c.re.as_f64() * scale) as f32).to_le_bytes());
        buf.extend_from_slice(&((c.im.as_f64() * scale) as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Snapshot contents as read back from disk (SI units).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n_x: usize,
    pub n_y: usize,
    pub dx: f64,
    pub dy: f64,
    pub time: f64,
    pub amplitudes: Vec<Complex<f32>>,
}

pub fn read_snapshot<R: Read>(input: &mut R) -> Result<Snapshot> {
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word)?;
        Ok(word)
    };
    let n_x = u64::from_le_bytes(next(input)?) as usize;
    let n_y = u64::from_le_bytes(next(input)?) as usize;
    let dx = f64::from_le_bytes(next(input)?);
    let dy = f64::from_le_bytes(next(input)?);
    let time = f64::from_le_bytes(next(input)?);
    let n = n_x.checked_mul(n_y).ok_or(Error::DimensionMismatch {
        expected: usize::MAX,
        found: n_x,
    })?;
    let mut raw = vec![0u8; n * 8];
    input.read_exact(&mut raw)?;
    let amplitudes = raw
        .chunks_exact(8)
        .map(|c| {
            Complex::new(
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            )
        })
        .collect();
    Ok(Snapshot {
        n_x,
        n_y,
        dx,
        dy,
        time,
        amplitudes,
    })
}
