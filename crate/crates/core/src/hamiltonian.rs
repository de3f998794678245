//! Five-point Hamiltonian on the x-major grid and the Cayley system built
//! from it.

use crate::banded::{BandedFactor, BandedMatrix};
use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::potential::PotentialField;
use crate::scalar::{Complex, Real};

/// H = −ħ²/2m ∇² + V with three-point second differences, periodic in y and
/// truncated (implicit Dirichlet) at both x edges.
///
/// Kept in stencil form: one diagonal value per grid point plus the two
/// constant neighbour couplings. [`Hamiltonian::to_banded`] materialises the
/// matrix when needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian<T> {
    pub geometry: GridGeometry<T>,
    pub diagonal: Vec<T>,
    /// −ħ²/(2m·dx²), coupling at offset n_y.
    pub coupling_x: T,
    /// −ħ²/(2m·dy²), coupling at offset 1 and at the periodic wrap n_y − 1.
    pub coupling_y: T,
}

impl<T: Real> Hamiltonian<T> {
    pub fn assemble(
        grid: &GridGeometry<T>,
        potential: &PotentialField<T>,
        mass: T,
        hbar: T,
    ) -> Result<Self> {
        if (potential.n_x, potential.n_y) != (grid.n_x, grid.n_y)
            || potential.values.len() != grid.len()
        {
            return Err(Error::GridMismatch {
                expected: (grid.n_x, grid.n_y),
                found: (potential.n_x, potential.n_y),
            });
        }
        let h2m = hbar * hbar / mass;
        let kx = h2m / (grid.dx * grid.dx);
        let ky = h2m / (grid.dy * grid.dy);
        let diagonal = potential.values.iter().map(|v| kx + ky + *v).collect();
        let half = T::lit(0.5);
        Ok(Self {
            geometry: *grid,
            diagonal,
            coupling_x: -half * kx,
            coupling_y: -half * ky,
        })
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    /// Half-bandwidth of the assembled matrix, n_y.
    pub fn bandwidth(&self) -> usize {
        self.geometry.n_y
    }

    /// Visits every stored lower-triangle entry `(row, col, value)` once.
    fn for_each_lower(&self, mut f: impl FnMut(usize, usize, T)) {
        let g = &self.geometry;
        let ny = g.n_y;
        for i in 0..g.n_x {
            for j in 0..ny {
                let k = g.index(i, j);
                f(k, k, self.diagonal[k]);
                if j > 0 {
                    f(k, k - 1, self.coupling_y);
                }
                if i > 0 {
                    f(k, k - ny, self.coupling_x);
                }
            }
            // periodic wrap: last point of the block couples to the first
            let first = g.index(i, 0);
            f(first + ny - 1, first, self.coupling_y);
        }
    }

    /// Banded matrix `scale·H + shift·I`.
    pub fn to_banded_scaled(&self, scale: Complex<T>, shift: Complex<T>) -> BandedMatrix<T> {
        let mut m = BandedMatrix::zeros(self.len(), self.bandwidth());
        self.for_each_lower(|r, c, v| {
            let mut e = scale * v;
            if r == c {
                e += shift;
            }
            m.add(r, c, e);
        });
        m
    }

    /// The real symmetric Hamiltonian as a banded matrix.
    pub fn to_banded(&self) -> BandedMatrix<T> {
        self.to_banded_scaled(
            Complex::new(T::one(), T::zero()),
            Complex::new(T::zero(), T::zero()),
        )
    }

    /// out = H·v through the stencil.
    pub fn apply(&self, v: &[Complex<T>], out: &mut [Complex<T>]) -> Result<()> {
        self.apply_affine(
            v,
            out,
            Complex::new(T::one(), T::zero()),
            Complex::new(T::zero(), T::zero()),
        )
    }

    /// out = scale·H·v + shift·v.
    pub fn apply_affine(
        &self,
        v: &[Complex<T>],
        out: &mut [Complex<T>],
        scale: Complex<T>,
        shift: Complex<T>,
    ) -> Result<()> {
        let n = self.len();
        for len in [v.len(), out.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        let g = &self.geometry;
        let ny = g.n_y;
        let (cx, cy) = (self.coupling_x, self.coupling_y);
        for i in 0..g.n_x {
            let base = i * ny;
            for j in 0..ny {
                let k = base + j;
                let up = if j + 1 < ny { v[k + 1] } else { v[base] };
                let down = if j > 0 { v[k - 1] } else { v[base + ny - 1] };
                let mut hv = v[k] * self.diagonal[k] + (up + down) * cy;
                if i > 0 {
                    hv += v[k - ny] * cx;
                }
                if i + 1 < g.n_x {
                    hv += v[k + ny] * cx;
                }
                out[k] = scale * hv + shift * v[k];
            }
        }
        Ok(())
    }
}

/// Assembles the Hamiltonian and returns it as a banded matrix.
pub fn assemble_h<T: Real>(
    grid: &GridGeometry<T>,
    potential: &PotentialField<T>,
    mass: T,
    hbar: T,
) -> Result<BandedMatrix<T>> {
    Ok(Hamiltonian::assemble(grid, potential, mass, hbar)?.to_banded())
}

/// Crank-Nicolson step operators in Cayley form:
/// (1 + iτH)·ψ(t+dt) = (1 − iτH)·ψ(t), τ = dt/2ħ.
///
/// `a_plus` exists only as its LLᵀ factor; `a_minus` is applied through the
/// Hamiltonian stencil. Both can be materialised for inspection.
#[derive(Debug, Clone)]
pub struct CayleySystem<T> {
    pub hamiltonian: Hamiltonian<T>,
    pub factor: BandedFactor<T>,
    pub dt: T,
    tau: T,
}

impl<T: Real> CayleySystem<T> {
    pub fn build(hamiltonian: Hamiltonian<T>, dt: T, hbar: T) -> Result<Self> {
        let tau = dt / (T::lit(2.0) * hbar);
        let a_plus = hamiltonian.to_banded_scaled(
            Complex::new(T::zero(), tau),
            Complex::new(T::one(), T::zero()),
        );
        let factor = a_plus.factorize()?;
        Ok(Self {
            hamiltonian,
            factor,
            dt,
            tau,
        })
    }

    /// dt/(2ħ).
    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn a_plus(&self) -> BandedMatrix<T> {
        self.hamiltonian.to_banded_scaled(
            Complex::new(T::zero(), self.tau),
            Complex::new(T::one(), T::zero()),
        )
    }

    pub fn a_minus(&self) -> BandedMatrix<T> {
        self.hamiltonian.to_banded_scaled(
            Complex::new(T::zero(), -self.tau),
            Complex::new(T::one(), T::zero()),
        )
    }

    /// out = (1 − iτH)·psi.
    pub fn apply_a_minus(&self, psi: &[Complex<T>], out: &mut [Complex<T>]) -> Result<()> {
        self.hamiltonian.apply_affine(
            psi,
            out,
            Complex::new(T::zero(), -self.tau),
            Complex::new(T::one(), T::zero()),
        )
    }

    /// Advances `psi` by one step: psi ← (1 + iτH)⁻¹(1 − iτH)·psi, using
    /// `scratch` (same length) as workspace.
    pub fn advance(&self, psi: &mut [Complex<T>], scratch: &mut [Complex<T>]) -> Result<()> {
        self.apply_a_minus(psi, scratch)?;
        self.factor.solve_in_place(scratch)?;
        psi.copy_from_slice(scratch);
        Ok(())
    }
}

/// Builds the Cayley system of `h` for step `dt`, factorizing 1 + iτH once.
pub fn build_cayley<T: Real>(h: Hamiltonian<T>, dt: T, hbar: T) -> Result<CayleySystem<T>> {
    CayleySystem::build(h, dt, hbar)
}
