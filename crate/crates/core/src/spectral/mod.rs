//! Field representation, transforms, sharp cube projection, the dealiased cubic
//! nonlinearity, and the norms used throughout the crate.

mod field;
mod transform;

pub use field::{PairField, SpectralField};
pub use transform::Transform;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{japanese, max_abs, smooth_len, GridSpec};
use crate::real::Real;

/// Sharp Fourier restriction to the cube `max_j |n_j| <= n`. `n = -1` gives the zero field.
pub fn project_cube<T: Real>(f: &SpectralField<T>, n: i64) -> Result<SpectralField<T>> {
    let k = f.grid().band();
    if n > k {
        return Err(Error::TruncationExceedsBand { n, k });
    }
    if n < -1 {
        return Err(Error::InvalidArgument(format!("truncation {n} < -1")));
    }
    let grid = *f.grid();
    let mut out = f.clone();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        if max_abs(grid.mode(i)) > n {
            *c = Complex::new(T::zero(), T::zero());
        }
    }
    Ok(out)
}

/// Points per axis needed to cube the `n` band without aliasing into it.
pub fn alias_free_points(n: i64) -> usize {
    (4 * n.max(0) + 2) as usize
}

/// Evaluates `P_{≤N}((P_{≤N} f)³)` exactly: the cube of the band is formed on a padded
/// grid where images of modes up to `3N` cannot wrap into `[-N, N]`.
///
/// Holds its transform so repeated calls (one per time step) do not re-plan.
pub struct Cuber<T: Real> {
    grid: GridSpec,
    truncation: i64,
    transform: Option<Transform<T>>,
}

impl<T: Real> Cuber<T> {
    pub fn new(grid: GridSpec, truncation: i64) -> Result<Self> {
        let k = grid.band();
        if truncation > k {
            return Err(Error::TruncationExceedsBand { n: truncation, k });
        }
        if truncation < -1 {
            return Err(Error::InvalidArgument(format!("truncation {truncation} < -1")));
        }
        let needed = alias_free_points(truncation);
        if truncation >= 0 && grid.points() < needed {
            return Err(Error::AliasingGuard { m: grid.points(), n: truncation, needed });
        }
        let transform = (truncation >= 0).then(|| Transform::new(grid.dim(), smooth_len(needed)));
        Ok(Self { grid, truncation, transform })
    }

    pub fn truncation(&self) -> i64 {
        self.truncation
    }

    /// Cube coefficients of `P_{≤N}((P_{≤N} f)³)` on the band `N` (empty for `N = -1`).
    pub fn cube_band(&self, f: &SpectralField<T>) -> Vec<Complex<T>> {
        let Some(tr) = &self.transform else {
            return Vec::new();
        };
        let n = self.truncation;
        let values = tr.synthesize(n, &f.cube_coeffs(n));
        let cubed: Vec<T> = values.into_iter().map(|v| v * v * v).collect();
        let mut out = tr.analyze(&cubed, n);
        // exact Hermitian symmetry of the band
        let len = out.len();
        let half = T::lit(0.5);
        for i in (len - 1) / 2..len {
            let j = len - 1 - i;
            let avg = (out[i] + out[j].conj()) * half;
            out[i] = avg;
            out[j] = avg.conj();
        }
        out
    }

    pub fn cube(&self, f: &SpectralField<T>) -> Result<SpectralField<T>> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch("field grid differs from the cuber grid".into()));
        }
        if self.transform.is_none() {
            return Ok(SpectralField::zeros(self.grid));
        }
        Ok(SpectralField::from_cube(self.grid, self.truncation, &self.cube_band(f)))
    }
}

/// `P_{≤N}((P_{≤N} f)³)`, free of aliasing in the retained band. Errors when the grid has
/// fewer than `4N + 2` points per axis.
pub fn dealiased_cube<T: Real>(f: &SpectralField<T>, n: i64) -> Result<SpectralField<T>> {
    Cuber::new(*f.grid(), n)?.cube(f)
}

/// `(Σ ⟨n⟩^{2α}|û(n)|² + Σ ⟨n⟩^{2α−s}|p̂(n)|²)^{1/2}`, the norm of `H^α × H^{α−s/2}`.
pub fn sobolev_pair_norm<T: Real>(v: &PairField<T>, alpha: f64) -> T {
    let grid = v.grid();
    let s = grid.dispersion();
    let mut acc = 0.0f64;
    for (i, n) in grid.modes() {
        let j2 = 1.0 + crate::grid::norm_sq(n) as f64;
        let wu = j2.powf(alpha);
        let wp = j2.powf(alpha - 0.5 * s);
        acc += wu * v.u.coeffs()[i].norm_sqr().as_f64() + wp * v.p.coeffs()[i].norm_sqr().as_f64();
    }
    T::lit(acc.sqrt())
}

/// Sobolev norm `‖(1−Δ)^{α/2} u‖_{L²}` of a single component.
pub fn sobolev_norm<T: Real>(u: &SpectralField<T>, alpha: f64) -> T {
    let grid = u.grid();
    let acc: f64 = grid
        .modes()
        .map(|(i, n)| (1.0 + crate::grid::norm_sq(n) as f64).powf(alpha) * u.coeffs()[i].norm_sqr().as_f64())
        .sum();
    T::lit(acc.sqrt())
}

/// Grid maximum of `|(1−Δ)^{w/2} f|` on a physical grid oversampling the field's band by 2.
/// A lower estimate of the `L^∞` norm.
pub fn weighted_sup<T: Real>(f: &SpectralField<T>, weight: f64) -> T {
    let band = f.band_extent();
    if band < 0 {
        return T::zero();
    }
    HolderProbe::new(f.grid().dim(), band).component(f, weight)
}

/// Hölder-type norm of `C^β × C^{β−s/2}` with `‖u‖_{C^β} := ‖(1−Δ)^{β/2}u‖_{L^∞}`.
pub fn holder_norm<T: Real>(v: &PairField<T>, beta: f64) -> T {
    let band = v.u.band_extent().max(v.p.band_extent());
    if band < 0 {
        return T::zero();
    }
    HolderProbe::new(v.grid().dim(), band).pair(v, beta)
}

/// Reusable grid-max evaluator for fields supported in a fixed band.
pub struct HolderProbe<T: Real> {
    band: i64,
    transform: Transform<T>,
}

impl<T: Real> HolderProbe<T> {
    pub fn new(dim: usize, band: i64) -> Self {
        let band = band.max(0);
        let len = smooth_len(2 * (2 * band as usize + 1)).max(4);
        Self { band, transform: Transform::new(dim, len) }
    }

    pub fn band(&self) -> i64 {
        self.band
    }

    /// Modes outside the probe band are ignored.
    pub fn component(&self, f: &SpectralField<T>, weight: f64) -> T {
        let dim = f.grid().dim();
        let coeffs: Vec<Complex<T>> = f
            .cube_coeffs(self.band)
            .into_iter()
            .enumerate()
            .map(|(i, c)| c * T::lit(japanese(crate::grid::cube_mode(dim, self.band, i)).powf(weight)))
            .collect();
        self.transform
            .synthesize(self.band, &coeffs)
            .into_iter()
            .fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn pair(&self, v: &PairField<T>, beta: f64) -> T {
        let s = v.grid().dispersion();
        self.component(&v.u, beta).max(self.component(&v.p, beta - 0.5 * s))
    }
}

/// `∫_{T^d} u⁴ dx`, exact for the band-limited field: the quadrature grid has at least
/// `4K + 2` points per axis for the field's band `K`.
pub fn quartic_integral<T: Real>(u: &SpectralField<T>) -> T {
    let band = u.band_extent();
    if band < 0 {
        return T::zero();
    }
    let dim = u.grid().dim();
    let len = smooth_len(4 * band as usize + 2);
    let tr = Transform::new(dim, len);
    quartic_with(&tr, band, &u.cube_coeffs(band))
}

pub(crate) fn quartic_with<T: Real>(tr: &Transform<T>, band: i64, coeffs: &[Complex<T>]) -> T {
    let values = tr.synthesize(band, coeffs);
    let sum = values.iter().fold(T::zero(), |acc, &v| {
        let v2 = v * v;
        acc + v2 * v2
    });
    let vol = (2.0 * std::f64::consts::PI).powi(tr.dim() as i32);
    sum * T::lit(vol / tr.total() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cube_index, norm_sq, Mode};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: GridSpec, band: i64, rng: &mut impl Rng) -> SpectralField<f64> {
        let mut f = SpectralField::zeros(grid);
        for i in grid.half_lattice() {
            let n = grid.mode(i);
            if max_abs(n) <= band {
                let c = Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                f.set_mode(n, c).unwrap();
            }
        }
        f
    }

    /// Brute-force `(P_{≤N}f)³` coefficient: `(2π)^{-d} Σ_{a+b+c=n} f̂(a)f̂(b)f̂(c)`.
    fn triple_convolution(f: &SpectralField<f64>, band: i64) -> SpectralField<f64> {
        let grid = *f.grid();
        let dim = grid.dim();
        let cube: Vec<(Mode, Complex<f64>)> = grid
            .modes()
            .filter(|(_, n)| max_abs(*n) <= band)
            .map(|(i, n)| (n, f.coeffs()[i]))
            .collect();
        let mut out = SpectralField::zeros(grid);
        let norm = (2.0 * PI).powi(-(dim as i32));
        for &(a, ca) in &cube {
            for &(b, cb) in &cube {
                for &(c, cc) in &cube {
                    let n = [a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]];
                    if max_abs(n) > band {
                        continue;
                    }
                    let j = cube_index(dim, grid.band(), n).unwrap();
                    out.coeffs_mut()[j] += ca * cb * cc * norm;
                }
            }
        }
        out
    }

    fn max_diff(a: &SpectralField<f64>, b: &SpectralField<f64>) -> f64 {
        a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn project_cube_edge_cases() {
        let grid = GridSpec::new(3, 9, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field(grid, 4, &mut rng);
        assert_eq!(project_cube(&f, 4).unwrap(), f);
        assert_eq!(project_cube(&f, -1).unwrap(), SpectralField::zeros(grid));
        let g = SpectralField::<f64>::cosine(grid, [2, 0, 0], 1.0).unwrap();
        assert_eq!(project_cube(&g, 1).unwrap(), SpectralField::zeros(grid));
        assert!(matches!(project_cube(&f, 5), Err(Error::TruncationExceedsBand { .. })));
    }

    #[test]
    fn projection_is_self_adjoint_and_idempotent() {
        let grid = GridSpec::new(2, 11, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in -1..=5 {
            let f = random_field(grid, 5, &mut rng);
            let g = random_field(grid, 5, &mut rng);
            let pf = project_cube(&f, n).unwrap();
            assert_eq!(project_cube(&pf, n).unwrap(), pf);
            let lhs = pf.dot(&g);
            let rhs = f.dot(&project_cube(&g, n).unwrap());
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn cube_of_constant_and_zero() {
        let grid = GridSpec::new(1, 19, 2.0).unwrap();
        let c = SpectralField::<f64>::constant(grid, 1.3);
        let cubed = dealiased_cube(&c, 4).unwrap();
        let expected = SpectralField::constant(grid, 1.3f64.powi(3));
        assert!(max_diff(&cubed, &expected) < 1e-13);
        let z = dealiased_cube(&SpectralField::<f64>::zeros(grid), 4).unwrap();
        assert_eq!(z, SpectralField::zeros(grid));
    }

    #[test]
    fn aliasing_guard() {
        let grid = GridSpec::new(1, 17, 2.0).unwrap();
        let f = SpectralField::<f64>::zeros(grid);
        assert!(matches!(dealiased_cube(&f, 4), Err(Error::AliasingGuard { needed: 18, .. })));
        assert!(dealiased_cube(&f, 3).is_ok());
    }

    #[test]
    fn dealiased_cube_matches_triple_convolution_1d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 0..=4 {
            let grid = GridSpec::new(1, alias_free_points(n) + 3, 2.0).unwrap();
            for _ in 0..5 {
                let f = random_field(grid, n, &mut rng);
                let fast = dealiased_cube(&f, n).unwrap();
                let slow = triple_convolution(&f, n);
                assert!(max_diff(&fast, &slow) < 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn dealiased_cube_matches_triple_convolution_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 0..=2 {
            let grid = GridSpec::new(3, alias_free_points(n).max(3), 4.0).unwrap();
            for _ in 0..3 {
                // field has modes beyond N; only the band enters
                let f = random_field(grid, grid.band(), &mut rng);
                let fast = dealiased_cube(&f, n).unwrap();
                let slow = triple_convolution(&f, n);
                assert!(max_diff(&fast, &slow) < 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn dealiased_cube_matches_in_single_precision() {
        let grid = GridSpec::new(1, 14, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(grid, 3, &mut rng);
        let f32_field = SpectralField::<f32>::from_coeffs(
            grid,
            f.coeffs().iter().map(|c| Complex::new(c.re as f32, c.im as f32)).collect(),
        )
        .unwrap();
        let slow = triple_convolution(&f, 3);
        let fast = dealiased_cube(&f32_field, 3).unwrap();
        for (a, b) in fast.coeffs().iter().zip(slow.coeffs()) {
            assert!((a.re as f64 - b.re).abs() < 1e-5 && (a.im as f64 - b.im).abs() < 1e-5);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for dim in 1..=3 {
            let grid = GridSpec::new(dim, 9, dim as f64 + 1.0).unwrap();
            let f = random_field(grid, grid.band(), &mut rng);
            let len = grid.points();
            let values = f.to_physical(len);
            let back = SpectralField::from_physical(grid, len, &values).unwrap();
            let rel = max_diff(&f, &back) / f.l2_norm_sq().sqrt();
            assert!(rel < 1e-12, "round trip {rel}");
            let cell = (2.0 * PI / len as f64).powi(dim as i32);
            let phys: f64 = values.iter().map(|v| v * v).sum::<f64>() * cell;
            assert!((phys - f.l2_norm_sq()).abs() / phys < 1e-12);
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        let grid = GridSpec::new(3, 9, 4.0).unwrap();
        assert_eq!(sobolev_pair_norm(&PairField::<f64>::zeros(grid), 0.7), 0.0);
        let n = [1, 2, -1];
        let u = SpectralField::<f64>::plane_wave(grid, n, Complex::new(0.3, -0.2)).unwrap();
        let v = PairField::new(u.clone(), SpectralField::zeros(grid)).unwrap();
        let alpha = 0.4;
        let expected = japanese(n).powf(alpha) * u.l2_norm_sq().sqrt();
        assert!((sobolev_pair_norm(&v, alpha) - expected).abs() < 1e-12);
    }

    #[test]
    fn sobolev_norm_matches_direct_sum() {
        let grid = GridSpec::new(2, 9, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = PairField::new(random_field(grid, 4, &mut rng), random_field(grid, 4, &mut rng)).unwrap();
        let alpha = 1.3;
        let mut direct = 0.0;
        for (i, n) in grid.modes() {
            let j = (1.0 + norm_sq(n) as f64).sqrt();
            direct += j.powf(2.0 * alpha) * v.u.coeffs()[i].norm_sqr();
            direct += j.powf(2.0 * alpha - 3.0) * v.p.coeffs()[i].norm_sqr();
        }
        assert!((sobolev_pair_norm(&v, alpha) - direct.sqrt()).abs() < 1e-12 * direct.sqrt());
    }

    #[test]
    fn holder_norm_examples() {
        let grid = GridSpec::new(3, 9, 4.0).unwrap();
        assert_eq!(holder_norm(&PairField::<f64>::zeros(grid), 0.4), 0.0);
        let n = [2, 1, 0];
        let u = SpectralField::<f64>::cosine(grid, n, 1.0).unwrap();
        let v = PairField::new(u, SpectralField::zeros(grid)).unwrap();
        assert!((holder_norm(&v, 0.0) - 1.0).abs() < 1e-12);
        assert!((holder_norm(&v, 0.4) - japanese(n).powf(0.4)).abs() < 1e-12);
    }

    #[test]
    fn quartic_examples() {
        let grid = GridSpec::new(1, 9, 2.0).unwrap();
        let c = SpectralField::<f64>::constant(grid, 1.5);
        assert!((quartic_integral(&c) - 1.5f64.powi(4) * 2.0 * PI).abs() < 1e-12);
        let cosx = SpectralField::<f64>::cosine(grid, [1, 0, 0], 1.0).unwrap();
        assert!((quartic_integral(&cosx) - 3.0 * PI / 4.0).abs() < 1e-13);
        let g3 = GridSpec::new(3, 7, 4.0).unwrap();
        let c3 = SpectralField::<f64>::constant(g3, 0.7);
        assert!((quartic_integral(&c3) - 0.7f64.powi(4) * (2.0 * PI).powi(3)).abs() < 1e-11);
    }

    #[test]
    fn quartic_matches_fine_grid_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for dim in 1..=2 {
            let grid = GridSpec::new(dim, 11, dim as f64 + 1.0).unwrap();
            let f = random_field(grid, grid.band(), &mut rng);
            let fine = 64;
            let values = f.to_physical(fine);
            let cell = (2.0 * PI / fine as f64).powi(dim as i32);
            let oracle: f64 = values.iter().map(|v| v.powi(4)).sum::<f64>() * cell;
            let q = quartic_integral(&f);
            assert!((q - oracle).abs() / oracle < 1e-10, "dim {dim}: {q} vs {oracle}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn norms_are_homogeneous_and_subadditive(seed in any::<u64>(), a in -3.0f64..3.0, alpha in -1.0f64..1.5) {
            let grid = GridSpec::new(1, 15, 2.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = PairField::new(random_field(grid, 7, &mut rng), random_field(grid, 7, &mut rng)).unwrap();
            let g = PairField::new(random_field(grid, 7, &mut rng), random_field(grid, 7, &mut rng)).unwrap();
            let tol = 1e-12;
            let nf = sobolev_pair_norm(&f, alpha);
            prop_assert!((sobolev_pair_norm(&f.scale(a), alpha) - a.abs() * nf).abs() <= tol * (1.0 + nf));
            prop_assert!(sobolev_pair_norm(&f.add(&g), alpha) <= nf + sobolev_pair_norm(&g, alpha) + tol);
            let hf = holder_norm(&f, alpha);
            prop_assert!((holder_norm(&f.scale(a), alpha) - a.abs() * hf).abs() <= 1e-10 * (1.0 + hf));
            // the grid max of a sum is bounded by the sum of exact sups; both sides use the same grid
            prop_assert!(holder_norm(&f.add(&g), alpha) <= hf + holder_norm(&g, alpha) + 1e-10);
        }
    }
}
