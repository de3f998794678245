//! Complex symmetric banded matrices and their LLᵀ factorization.
//!
//! Only the lower triangle is stored. Row `i` occupies a contiguous slot of
//! `b + 1` entries holding columns `i − b ..= i`; slots left of column 0 in the
//! first `b` rows are kept at zero. Storage is therefore exactly `n·(b+1)`
//! complex numbers, for the matrix as well as for its factor.
//!
//! The factorization is A = L·Lᵀ with the plain (non-conjugating) transpose,
//! which is what complex symmetric matrices such as 1 + iτH admit. No pivoting
//! is done; the Cholesky band-preservation property keeps L inside the band.

use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};

#[inline]
fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix<T> {
    n: usize,
    bandwidth: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> BandedMatrix<T> {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: vec![czero(); n * (bandwidth + 1)],
        }
    }

    pub fn identity(n: usize, bandwidth: usize) -> Self {
        let mut m = Self::zeros(n, bandwidth);
        for i in 0..n {
            m.set(i, i, Complex::new(T::one(), T::zero()));
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Number of stored complex entries, `n·(b+1)`.
    pub fn storage_len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bandwidth);
        i * (self.bandwidth + 1) + self.bandwidth - (i - j)
    }

    /// Logical entry A[i][j]; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bandwidth {
            czero()
        } else {
            self.data[self.slot(r, c)]
        }
    }

    /// Sets A[i][j] = A[j][i] = v.
    ///
    /// # Panics
    /// If `|i − j|` exceeds the half-bandwidth.
    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        assert!(
            r - c <= self.bandwidth,
            "entry ({i}, {j}) lies outside half-bandwidth {}",
            self.bandwidth
        );
        let s = self.slot(r, c);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex<T>) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// Stored lower-band slot of row `i`: columns `i − b ..= i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[Complex<T>] {
        let w = self.bandwidth + 1;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, c| m.max(c.norm()))
    }

    /// Applies `f` to every stored entry (including structural zeros).
    pub fn map_in_place(&mut self, mut f: impl FnMut(Complex<T>) -> Complex<T>) {
        for (k, v) in self.data.iter_mut().enumerate() {
            let i = k / (self.bandwidth + 1);
            let off = self.bandwidth - k % (self.bandwidth + 1);
            if off <= i {
                *v = f(*v);
            }
        }
    }

    /// y = A·v.
    pub fn matvec(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let mut y = vec![czero(); self.n];
        self.matvec_into(v, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, v: &[Complex<T>], y: &mut [Complex<T>]) -> Result<()> {
        check_len(self.n, v.len())?;
        check_len(self.n, y.len())?;
        let b = self.bandwidth;
        y.iter_mut().for_each(|e| *e = czero());
        for i in 0..self.n {
            let row = self.row(i);
            let lo = i.saturating_sub(b);
            let base = b + lo - i;
            let vi = v[i];
            let mut acc = row[b] * vi;
            for (k, a) in row[base..b].iter().enumerate() {
                let j = lo + k;
                acc += *a * v[j];
                y[j] += *a * vi;
            }
            y[i] += acc;
        }
        Ok(())
    }

    /// Dense copy, for small test problems.
    pub fn to_dense(&self) -> Vec<Vec<Complex<T>>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// LLᵀ factorization, consuming the matrix and reusing its storage.
    pub fn factorize(self) -> Result<BandedFactor<T>> {
        let scale = self.max_abs();
        let tol = scale * breakdown_tolerance::<T>();
        let b = self.bandwidth;
        let w = b + 1;
        let n = self.n;
        let mut data = self.data;

        for i in 0..n {
            let lo = i.saturating_sub(b);
            let (done, rest) = data.split_at_mut(i * w);
            let row_i = &mut rest[..w];
            for j in lo..=i {
                // row_i[k - (i - b)] holds L[i][k]; row_j likewise with j
                let ai = b + lo - i;
                let mut s = row_i[b + j - i];
                if j > lo {
                    let (li, lj) = if j == i {
                        (&row_i[ai..b], &row_i[ai..b])
                    } else {
                        let row_j = &done[j * w..(j + 1) * w];
                        let aj = b + lo - j;
                        (&row_i[ai..ai + (j - lo)], &row_j[aj..b])
                    };
                    s -= dot(li, lj);
                }
                if j == i {
                    let mag = s.norm();
                    if !(mag > tol) {
                        return Err(Error::PivotBreakdown {
                            row: i,
                            magnitude: mag.as_f64(),
                        });
                    }
                    row_i[b] = s.sqrt();
                } else {
                    let djj = done[j * w + b];
                    row_i[b + j - i] = s / djj;
                }
            }
        }
        Ok(BandedFactor {
            n,
            bandwidth: b,
            data,
        })
    }
}

/// Relative pivot threshold: 1e-13 in double precision, scaled up to remain
/// meaningful for `f32`.
pub fn breakdown_tolerance<T: Real>() -> T {
    T::lit(1e-13).max(T::epsilon() * T::lit(16.0))
}

#[inline]
fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    let mut re = T::zero();
    let mut im = T::zero();
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    Complex::new(re, im)
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Lower-triangular factor L with A = L·Lᵀ, stored in the band layout of
/// [`BandedMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandedFactor<T> {
    n: usize,
    bandwidth: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> BandedFactor<T> {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn storage_len(&self) -> usize {
        self.data.len()
    }

    /// L[i][j]; zero above the diagonal and below the band.
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        if j > i || i - j > self.bandwidth {
            czero()
        } else {
            self.data[i * (self.bandwidth + 1) + self.bandwidth - (i - j)]
        }
    }

    /// Solves L·Lᵀ·x = rhs.
    pub fn solve(&self, rhs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Forward then backward substitution, overwriting `x` (the right-hand side
    /// on entry) with the solution.
    pub fn solve_in_place(&self, x: &mut [Complex<T>]) -> Result<()> {
        check_len(self.n, x.len())?;
        let b = self.bandwidth;
        let w = b + 1;
        // L·y = rhs
        for i in 0..self.n {
            let lo = i.saturating_sub(b);
            let row = &self.data[i * w..(i + 1) * w];
            let s = x[i] - dot(&row[b + lo - i..b], &x[lo..i]);
            x[i] = s / row[b];
        }
        // Lᵀ·x = y, sweeping rows of L from the bottom
        for i in (0..self.n).rev() {
            let lo = i.saturating_sub(b);
            let row = &self.data[i * w..(i + 1) * w];
            let xi = x[i] / row[b];
            x[i] = xi;
            for (xj, l) in x[lo..i].iter_mut().zip(&row[b + lo - i..b]) {
                *xj -= *l * xi;
            }
        }
        Ok(())
    }

    /// Dense L·Lᵀ, for small test problems.
    pub fn reconstruct_dense(&self) -> Vec<Vec<Complex<T>>> {
        let n = self.n;
        let mut out = vec![vec![czero(); n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                let lo = i.max(j).saturating_sub(self.bandwidth);
                let mut s = czero();
                for k in lo..=i.min(j) {
                    s += self.get(i, k) * self.get(j, k);
                }
                *e = s;
            }
        }
        out
    }
}

/// Predicted memory of one propagation run, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryEstimate {
    /// The banded LLᵀ factor, `n_x·n_y·(n_y+1)` complex entries.
    pub factor_bytes: u64,
    /// Per-grid-point working arrays of the propagation loop.
    pub workspace_bytes: u64,
}

impl MemoryEstimate {
    pub fn total(&self) -> u64 {
        self.factor_bytes + self.workspace_bytes
    }
}

/// Bytes per grid point held besides the factor in double precision: wave
/// field, solve right-hand side and FFT buffer (complex), the Hamiltonian
/// diagonal and potential values (real), and the region tag.
pub const WORKSPACE_BYTES_PER_POINT: u64 = 3 * 16 + 8 + 8 + 1;

/// Memory model for complex128 storage.
pub fn memory_model(n_x: usize, n_y: usize) -> MemoryEstimate {
    memory_model_for::<f64>(n_x, n_y)
}

/// Memory model for storage built on the real type `T`.
pub fn memory_model_for<T>(n_x: usize, n_y: usize) -> MemoryEstimate {
    let real = std::mem::size_of::<T>() as u64;
    let points = n_x as u64 * n_y as u64;
    MemoryEstimate {
        factor_bytes: points * (n_y as u64 + 1) * 2 * real,
        workspace_bytes: points * (8 * real + 1),
    }
}
