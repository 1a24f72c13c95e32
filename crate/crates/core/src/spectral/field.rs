use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{max_abs, GridSpec, Mode};
use crate::real::Real;

use super::transform::{embed_cube, restrict_cube, Transform};

/// Real scalar field on `T^d` stored as Hermitian-symmetric Fourier coefficients on the
/// full mode cube of its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T: Real> {
    grid: GridSpec,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, coeffs: vec![Complex::new(T::zero(), T::zero()); grid.len()] }
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a grid of {} modes",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    /// Builds a field from its half-lattice coefficients (zero mode first), filling the
    /// conjugate half. The zero mode's imaginary part is discarded.
    pub fn from_half(grid: GridSpec, half: &[Complex<T>]) -> Result<Self> {
        if half.len() != grid.half_len() {
            return Err(Error::GridMismatch(format!(
                "{} half-lattice coefficients for a grid with {}",
                half.len(),
                grid.half_len()
            )));
        }
        let mut f = Self::zeros(grid);
        for (k, c) in half.iter().enumerate() {
            let i = grid.center() + k;
            if k == 0 {
                f.coeffs[i] = Complex::new(c.re, T::zero());
            } else {
                f.coeffs[i] = *c;
                f.coeffs[grid.conj_index(i)] = c.conj();
            }
        }
        Ok(f)
    }

    /// The constant field `u ≡ c`.
    pub fn constant(grid: GridSpec, c: T) -> Self {
        let mut f = Self::zeros(grid);
        let vol = T::lit((2.0 * std::f64::consts::PI).powf(0.5 * grid.dim() as f64));
        f.coeffs[grid.center()] = Complex::new(c * vol, T::zero());
        f
    }

    /// The real field `c e^{i n·x} + conj(c) e^{-i n·x}` (for `n = 0`, the constant `2 Re c`).
    pub fn plane_wave(grid: GridSpec, n: Mode, c: Complex<T>) -> Result<Self> {
        let mut f = Self::zeros(grid);
        let i = grid
            .index(n)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {n:?} outside the grid band")))?;
        let vol = T::lit((2.0 * std::f64::consts::PI).powf(0.5 * grid.dim() as f64));
        if i == grid.center() {
            f.coeffs[i] = Complex::new(T::lit(2.0) * c.re * vol, T::zero());
        } else {
            f.coeffs[i] = c * vol;
            f.coeffs[grid.conj_index(i)] = c.conj() * vol;
        }
        Ok(f)
    }

    /// `amplitude · cos(n·x)`.
    pub fn cosine(grid: GridSpec, n: Mode, amplitude: T) -> Result<Self> {
        if n == [0, 0, 0] {
            return Ok(Self::constant(grid, amplitude));
        }
        Self::plane_wave(grid, n, Complex::new(amplitude * T::lit(0.5), T::zero()))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn coeff(&self, n: Mode) -> Option<Complex<T>> {
        self.grid.index(n).map(|i| self.coeffs[i])
    }

    /// Sets `û(n) = c` and `û(-n) = conj(c)`.
    pub fn set_mode(&mut self, n: Mode, c: Complex<T>) -> Result<()> {
        let i = self
            .grid
            .index(n)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {n:?} outside the grid band")))?;
        if i == self.grid.center() {
            self.coeffs[i] = Complex::new(c.re, T::zero());
        } else {
            self.coeffs[i] = c;
            self.coeffs[self.grid.conj_index(i)] = c.conj();
        }
        Ok(())
    }

    /// Half-lattice view: zero mode followed by the lexicographically positive modes.
    pub fn half(&self) -> &[Complex<T>] {
        &self.coeffs[self.grid.center()..]
    }

    /// Restores exact Hermitian symmetry by averaging `û(n)` with `conj(û(-n))`.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in self.grid.half_lattice() {
            let j = self.grid.conj_index(i);
            let avg = (self.coeffs[i] + self.coeffs[j].conj()) * half;
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
        let c = self.grid.center();
        self.coeffs[c].im = T::zero();
    }

    /// Largest deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> T {
        self.grid
            .half_lattice()
            .map(|i| (self.coeffs[i] - self.coeffs[self.grid.conj_index(i)].conj()).norm())
            .fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scale(&self, a: T) -> Self {
        Self { grid: self.grid, coeffs: self.coeffs.iter().map(|c| *c * a).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: T, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x = *x + *y * a;
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Spectral (= `L²`) inner product `Σ û(n) conj(ĝ(n))`, real for real fields.
    pub fn dot(&self, other: &Self) -> T {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(T::zero(), |acc, (a, b)| acc + a.re * b.re + a.im * b.im)
    }

    /// `‖u‖²_{L²}` by Parseval.
    pub fn l2_norm_sq(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr())
    }

    /// Largest `max_j |n_j|` carrying a nonzero coefficient, `-1` for the zero field.
    pub fn band_extent(&self) -> i64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re != T::zero() || c.im != T::zero())
            .map(|(i, _)| max_abs(self.grid.mode(i)))
            .max()
            .unwrap_or(-1)
    }

    /// Coefficients on the cube of half-width `band` (must not exceed the grid band).
    pub fn cube_coeffs(&self, band: i64) -> Vec<Complex<T>> {
        restrict_cube(self.grid.dim(), self.grid.band(), &self.coeffs, band)
    }

    /// Field on `grid` whose cube of half-width `band` is `coeffs`.
    pub fn from_cube(grid: GridSpec, band: i64, coeffs: &[Complex<T>]) -> Self {
        Self { grid, coeffs: embed_cube(grid.dim(), band, coeffs, grid.band()) }
    }

    /// Values on the uniform grid of `len` points per axis.
    pub fn to_physical(&self, len: usize) -> Vec<T> {
        let band = self.band_extent().max(0).min(self.grid.band());
        Transform::new(self.grid.dim(), len).synthesize(band, &self.cube_coeffs(band))
    }

    /// Field on `grid` interpolating `values` sampled on `len^d` points. Modes outside the
    /// grid band or the Nyquist-safe range of `len` are dropped.
    pub fn from_physical(grid: GridSpec, len: usize, values: &[T]) -> Result<Self> {
        if values.len() != len.pow(grid.dim() as u32) {
            return Err(Error::GridMismatch(format!("{} values for {}^{} points", values.len(), len, grid.dim())));
        }
        let band = grid.band().min(((len - 1) / 2) as i64);
        let coeffs = Transform::new(grid.dim(), len).analyze(values, band);
        let mut f = Self::from_cube(grid, band, &coeffs);
        f.symmetrize();
        Ok(f)
    }

    /// Same coefficients re-homed on a grid with a wider (or equal) band.
    pub fn refined(&self, grid: GridSpec) -> Result<Self> {
        if grid.dim() != self.grid.dim() || grid.band() < self.grid.band() {
            return Err(Error::GridMismatch("refinement must keep the dimension and widen the band".into()));
        }
        Ok(Self::from_cube(grid, self.grid.band(), &self.coeffs))
    }
}

/// The state `(u, u_t)` evolved by the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct PairField<T: Real> {
    pub u: SpectralField<T>,
    pub p: SpectralField<T>,
}

impl<T: Real> PairField<T> {
    pub fn new(u: SpectralField<T>, p: SpectralField<T>) -> Result<Self> {
        if u.grid() != p.grid() {
            return Err(Error::GridMismatch("components of a pair must share one grid".into()));
        }
        Ok(Self { u, p })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { u: SpectralField::zeros(grid), p: SpectralField::zeros(grid) }
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    pub fn scale(&self, a: T) -> Self {
        Self { u: self.u.scale(a), p: self.p.scale(a) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { u: self.u.add(&other.u), p: self.p.add(&other.p) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { u: self.u.sub(&other.u), p: self.p.sub(&other.p) }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.p.is_finite()
    }

    /// Pairing `∫ u f + ∫ p f_t`.
    pub fn dot(&self, other: &Self) -> T {
        self.u.dot(&other.u) + self.p.dot(&other.p)
    }
}
