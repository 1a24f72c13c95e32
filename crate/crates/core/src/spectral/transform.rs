use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::{cube_index, cube_mode};
use crate::real::Real;

/// Real-field synthesis and analysis on a uniform `L^d` physical grid.
///
/// Coefficients follow the unitary convention `u(x) = (2π)^{-d/2} Σ û(n) e^{i n·x}`, so
/// that `Σ |û(n)|² = ∫ |u|²` over `[0, 2π)^d`.
pub struct Transform<T: Real> {
    dim: usize,
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scratch_len: usize,
}

impl<T: Real> Transform<T> {
    pub fn new(dim: usize, len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self { dim, len, forward, inverse, scratch_len }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total(&self) -> usize {
        self.len.pow(self.dim as u32)
    }

    /// Physical values of the real field whose coefficients on the cube of half-width
    /// `band` are `coeffs`. Requires `2 * band + 1 <= len`.
    pub fn synthesize(&self, band: i64, coeffs: &[Complex<T>]) -> Vec<T> {
        assert!(2 * band as usize + 1 <= self.len, "band {band} does not fit a length-{} transform", self.len);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.total()];
        for (i, c) in coeffs.iter().enumerate() {
            if c.re == T::zero() && c.im == T::zero() {
                continue;
            }
            let n = cube_mode(self.dim, band, i);
            buf[self.wrap(n)] = *c;
        }
        self.run_axes(&mut buf, true);
        let scale = T::lit((2.0 * std::f64::consts::PI).powf(-0.5 * self.dim as f64));
        buf.into_iter().map(|z| z.re * scale).collect()
    }

    /// Coefficients on the cube of half-width `band` of the field sampled as `values`.
    pub fn analyze(&self, values: &[T], band: i64) -> Vec<Complex<T>> {
        assert_eq!(values.len(), self.total());
        assert!(2 * band as usize + 1 <= self.len);
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.run_axes(&mut buf, false);
        let scale = T::lit(
            (2.0 * std::f64::consts::PI).powf(0.5 * self.dim as f64) / (self.total() as f64),
        );
        let side = (2 * band + 1) as usize;
        let count = side.pow(self.dim as u32);
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let n = cube_mode(self.dim, band, i);
            out.push(buf[self.wrap(n)] * scale);
        }
        out
    }

    /// Grid point coordinates are `2π j / len`; returns the flat index of mode `n` mod `len`.
    fn wrap(&self, n: [i64; 3]) -> usize {
        let l = self.len as i64;
        let mut idx = 0usize;
        for &c in n.iter().take(self.dim) {
            idx = idx * self.len + c.rem_euclid(l) as usize;
        }
        idx
    }

    fn run_axes(&self, buf: &mut [Complex<T>], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.scratch_len];
        let total = buf.len();
        let l = self.len;
        for axis in 0..self.dim {
            let stride = l.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(buf, &mut scratch);
                continue;
            }
            let outer = total / (l * stride);
            let mut lines = vec![Complex::new(T::zero(), T::zero()); total];
            let mut k = 0;
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * l * stride + inner;
                    for j in 0..l {
                        lines[k] = buf[base + j * stride];
                        k += 1;
                    }
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            k = 0;
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * l * stride + inner;
                    for j in 0..l {
                        buf[base + j * stride] = lines[k];
                        k += 1;
                    }
                }
            }
        }
    }
}

/// Copies the coefficients inside the cube `max_j |n_j| <= band` out of a larger cube.
pub fn restrict_cube<T: Real>(dim: usize, from_band: i64, coeffs: &[Complex<T>], band: i64) -> Vec<Complex<T>> {
    let side = (2 * band + 1) as usize;
    let count = side.pow(dim as u32);
    (0..count)
        .map(|i| {
            let n = cube_mode(dim, band, i);
            let j = cube_index(dim, from_band, n).expect("restriction to a smaller cube");
            coeffs[j]
        })
        .collect()
}

/// Embeds small-cube coefficients into a larger cube, zero elsewhere.
pub fn embed_cube<T: Real>(dim: usize, band: i64, coeffs: &[Complex<T>], into_band: i64) -> Vec<Complex<T>> {
    let side = (2 * into_band + 1) as usize;
    let mut out = vec![Complex::new(T::zero(), T::zero()); side.pow(dim as u32)];
    for (i, c) in coeffs.iter().enumerate() {
        let n = cube_mode(dim, band, i);
        let j = cube_index(dim, into_band, n).expect("embedding into a larger cube");
        out[j] = *c;
    }
    out
}
