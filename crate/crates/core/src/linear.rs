//! Exact propagation of the damped linear system, exact Ornstein–Uhlenbeck steps for its
//! stochastically forced version, the stochastic convolution, and the `X^α` norm.
//!
//! Each Fourier mode `n` is an independent 2×2 system `ẋ = A_n x` with
//! `A_n = [[0, 1], [-(1 + |n|^s), -1]]`, forced by `√2 dW_n` in the velocity.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Mode};
use crate::noise::{Increment, NoisePath};
use crate::real::Real;
use crate::spectral::{PairField, SpectralField};

pub type Mat2<T> = [[T; 2]; 2];

/// `λ_n = (3/4 + |n|^s)^{1/2}`, the oscillation frequency of mode `n`.
pub fn frequency(grid: &GridSpec, n: Mode) -> f64 {
    (0.75 + grid.dispersion_symbol(n)).sqrt()
}

/// Generator `A_n` of the damped mode system.
pub fn generator(grid: &GridSpec, n: Mode) -> Mat2<f64> {
    [[0.0, 1.0], [-(1.0 + grid.dispersion_symbol(n)), -1.0]]
}

/// Stationary covariance `diag(1/(1+|n|^s), 1)` of the forced mode system.
pub fn stationary_covariance(grid: &GridSpec, n: Mode) -> Mat2<f64> {
    [[1.0 / (1.0 + grid.dispersion_symbol(n)), 0.0], [0.0, 1.0]]
}

/// `S(t)` restricted to one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMatrix<T> {
    pub mode: Mode,
    pub time: f64,
    pub matrix: Mat2<T>,
}

fn propagator_entries(lambda: f64, t: f64) -> Mat2<f64> {
    let (sin, cos) = (t * lambda).sin_cos();
    let decay = (-0.5 * t).exp();
    let half = sin / (2.0 * lambda);
    [
        [decay * (cos + half), decay * sin / lambda],
        // lower-left is −(1+|n|^s) sin/λ = −(λ + 1/(4λ)) sin
        [-decay * (lambda + 1.0 / (4.0 * lambda)) * sin, decay * (cos - half)],
    ]
}

pub fn mode_matrix<T: Real>(n: Mode, t: f64, grid: &GridSpec) -> ModeMatrix<T> {
    let m = propagator_entries(frequency(grid, n), t);
    ModeMatrix { mode: n, time: t, matrix: cast2(m) }
}

fn cast2<T: Real>(m: Mat2<f64>) -> Mat2<T> {
    [[T::lit(m[0][0]), T::lit(m[0][1])], [T::lit(m[1][0]), T::lit(m[1][1])]]
}

pub(crate) fn mul2(a: &Mat2<f64>, b: &Mat2<f64>) -> Mat2<f64> {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub(crate) fn transpose2(a: &Mat2<f64>) -> Mat2<f64> {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

#[inline]
fn apply2<T: Real>(m: &Mat2<T>, u: Complex<T>, p: Complex<T>) -> (Complex<T>, Complex<T>) {
    (u * m[0][0] + p * m[0][1], u * m[1][0] + p * m[1][1])
}

/// `S(t)v`, mode by mode.
pub fn apply_propagator<T: Real>(v: &PairField<T>, t: f64) -> PairField<T> {
    let grid = *v.grid();
    let mut out = v.clone();
    // matrices depend on |n| only, so each Hermitian pair is computed once
    for i in grid.half_lattice() {
        let m: Mat2<T> = mode_matrix(grid.mode(i), t, &grid).matrix;
        let (u, p) = apply2(&m, v.u.coeffs()[i], v.p.coeffs()[i]);
        out.u.coeffs_mut()[i] = u;
        out.p.coeffs_mut()[i] = p;
        let j = grid.conj_index(i);
        if j != i {
            out.u.coeffs_mut()[j] = u.conj();
            out.p.coeffs_mut()[j] = p.conj();
        }
    }
    out
}

/// Per-mode data for exact steps of size `h`, stored over the half-lattice.
#[derive(Debug, Clone)]
pub struct ModeEntry<T> {
    pub mode: Mode,
    /// `S(h)`.
    pub propagator: Mat2<T>,
    /// `Q_h = C_∞ − S(h) C_∞ S(h)ᵀ`, the step covariance for the `√2 dW` forcing of a real mode.
    pub step_covariance: Mat2<f64>,
    pub stationary: Mat2<f64>,
    /// `g = ∫_0^h S(r) e₂ dr`; the step response to a unit constant velocity forcing.
    pub duhamel_gain: [f64; 2],
    // (dW, η) sampler: dW = √h z₀, η = gain·dW + L (z₁, z₂)
    sqrt_h: T,
    gain: [T; 2],
    chol: [T; 3],
}

/// Step tables for exact integration of the linear stochastic system with step `h`.
#[derive(Debug, Clone)]
pub struct PropagatorTable<T> {
    grid: GridSpec,
    h: f64,
    entries: Vec<ModeEntry<T>>,
}

impl<T: Real> PropagatorTable<T> {
    pub fn new(grid: GridSpec, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
        }
        let entries = grid
            .half_lattice()
            .map(|i| {
                let n = grid.mode(i);
                let lambda = frequency(&grid, n);
                let s = propagator_entries(lambda, h);
                let c = stationary_covariance(&grid, n);
                let scst = mul2(&mul2(&s, &c), &transpose2(&s));
                let q = [
                    [c[0][0] - scst[0][0], -0.5 * (scst[0][1] + scst[1][0])],
                    [-0.5 * (scst[0][1] + scst[1][0]), c[1][1] - scst[1][1]],
                ];
                // g = A⁻¹ (S(h) − I) e₂ with A⁻¹ = (1/a) [[-1, -1], [a, 0]]
                let a = 1.0 + grid.dispersion_symbol(n);
                let col = [s[0][1], s[1][1] - 1.0];
                let g = [(-col[0] - col[1]) / a, col[0]];
                // conditional covariance of η given dW: Q − 2 g gᵀ / h
                let k = [2f64.sqrt() * g[0] / h, 2f64.sqrt() * g[1] / h];
                let c00 = q[0][0] - k[0] * k[0] * h;
                let c01 = q[0][1] - k[0] * k[1] * h;
                let c11 = q[1][1] - k[1] * k[1] * h;
                let l00 = c00.max(0.0).sqrt();
                let l10 = if l00 > 0.0 { c01 / l00 } else { 0.0 };
                let l11 = (c11 - l10 * l10).max(0.0).sqrt();
                ModeEntry {
                    mode: n,
                    propagator: cast2(s),
                    step_covariance: q,
                    stationary: c,
                    duhamel_gain: g,
                    sqrt_h: T::lit(h.sqrt()),
                    gain: [T::lit(k[0]), T::lit(k[1])],
                    chol: [T::lit(l00), T::lit(l10), T::lit(l11)],
                }
            })
            .collect();
        Ok(Self { grid, h, entries })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Entries in half-lattice order (zero mode first).
    pub fn entries(&self) -> &[ModeEntry<T>] {
        &self.entries
    }

    fn check(&self, v: &PairField<T>) -> Result<()> {
        if v.grid() != &self.grid {
            return Err(Error::GridMismatch("state grid differs from the propagator table grid".into()));
        }
        Ok(())
    }

    /// Draws the increments of one exact step. The zero mode is real with white-noise
    /// increment variance `h`; other modes carry independent real and imaginary parts,
    /// each with half of that variance.
    pub fn sample_increments<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<Increment<T>>) {
        out.clear();
        let half = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        for (k, e) in self.entries.iter().enumerate() {
            let draw = |rng: &mut R| -> (T, T, T) {
                let z0 = T::lit(rng.sample::<f64, _>(StandardNormal));
                let z1 = T::lit(rng.sample::<f64, _>(StandardNormal));
                let z2 = T::lit(rng.sample::<f64, _>(StandardNormal));
                let dw = e.sqrt_h * z0;
                let eu = e.gain[0] * dw + e.chol[0] * z1;
                let ep = e.gain[1] * dw + e.chol[1] * z1 + e.chol[2] * z2;
                (dw, eu, ep)
            };
            if k == 0 {
                let (dw, eu, ep) = draw(rng);
                let zero = T::zero();
                out.push(Increment {
                    eta_u: Complex::new(eu, zero),
                    eta_p: Complex::new(ep, zero),
                    dw: Complex::new(dw, zero),
                });
            } else {
                let (dr, ur, pr) = draw(rng);
                let (di, ui, pi) = draw(rng);
                out.push(Increment {
                    eta_u: Complex::new(ur, ui) * half,
                    eta_p: Complex::new(pr, pi) * half,
                    dw: Complex::new(dr, di) * half,
                });
            }
        }
    }

    /// `state ← S(h) state + η` using the given increments.
    pub fn apply_in_place(&self, state: &mut PairField<T>, increments: &[Increment<T>]) {
        debug_assert_eq!(increments.len(), self.entries.len());
        let center = self.grid.center();
        let (u, p) = (state.u.coeffs_mut(), state.p.coeffs_mut());
        for (k, (e, inc)) in self.entries.iter().zip(increments).enumerate() {
            let i = center + k;
            let (nu, np) = apply2(&e.propagator, u[i], p[i]);
            let nu = nu + inc.eta_u;
            let np = np + inc.eta_p;
            u[i] = nu;
            p[i] = np;
            if k > 0 {
                let j = 2 * center - i;
                u[j] = nu.conj();
                p[j] = np.conj();
            }
        }
    }

    /// `state ← S(h) state` without forcing.
    pub fn propagate_in_place(&self, state: &mut PairField<T>) {
        let center = self.grid.center();
        let (u, p) = (state.u.coeffs_mut(), state.p.coeffs_mut());
        for (k, e) in self.entries.iter().enumerate() {
            let i = center + k;
            let (nu, np) = apply2(&e.propagator, u[i], p[i]);
            u[i] = nu;
            p[i] = np;
            if k > 0 {
                let j = 2 * center - i;
                u[j] = nu.conj();
                p[j] = np.conj();
            }
        }
    }
}

/// One exact step of the linear stochastic system: the exact transition kernel, sampled.
/// Returns the new state and the increments used.
pub fn exact_ou_step<T: Real, R: Rng + ?Sized>(
    v: &PairField<T>,
    table: &PropagatorTable<T>,
    rng: &mut R,
) -> Result<(PairField<T>, Vec<Increment<T>>)> {
    table.check(v)?;
    let mut inc = Vec::with_capacity(table.entries.len());
    table.sample_increments(rng, &mut inc);
    let mut out = v.clone();
    table.apply_in_place(&mut out, &inc);
    Ok((out, inc))
}

/// Number of whole steps of size `h` making up `t`.
pub fn steps_for(t: f64, h: f64) -> Result<usize> {
    let k = (t / h).round();
    if t < 0.0 || ((k * h) - t).abs() > 1e-9 * t.max(h) {
        return Err(Error::InvalidArgument(format!("t = {t} is not a whole number of steps h = {h}")));
    }
    Ok(k as usize)
}

/// Exact sample of the stochastic convolution at time `t = k h`, with its noise path.
pub fn sample_stick<T: Real, R: Rng + ?Sized>(
    t: f64,
    table: &PropagatorTable<T>,
    rng: &mut R,
    seed: u64,
) -> Result<(PairField<T>, NoisePath<T>)> {
    let k = steps_for(t, table.h)?;
    let mut state = PairField::zeros(table.grid);
    let mut path = NoisePath::new(table.grid, table.h, seed);
    let mut inc = Vec::with_capacity(table.entries.len());
    for _ in 0..k {
        table.sample_increments(rng, &mut inc);
        table.apply_in_place(&mut state, &inc);
        path.push_step(&inc)?;
    }
    Ok((state, path))
}

/// Replays a recorded noise path from `start` (exact linear stochastic flow `L(t)`).
pub fn replay_linear<T: Real>(start: &PairField<T>, table: &PropagatorTable<T>, path: &NoisePath<T>) -> Result<PairField<T>> {
    table.check(start)?;
    path.check_compatible(&table.grid, table.h)?;
    let mut state = start.clone();
    for k in 0..path.steps() {
        table.apply_in_place(&mut state, path.step(k));
    }
    Ok(state)
}

/// Covariance `γ(t,s)[f] = E⟨stick_t, f⟩⟨stick_s, f⟩`
/// `= 2 ∫_0^{t∧s} ⟨π₂S(t−r)*f, π₂S(s−r)*f⟩ dr`, by composite Simpson refined until the
/// relative change drops below `1e-8`.
pub fn stick_covariance<T: Real>(t: f64, s: f64, f: &PairField<T>) -> f64 {
    let upper = t.min(s);
    if upper <= 0.0 {
        return 0.0;
    }
    let grid = *f.grid();
    let modes: Vec<(f64, Complex<f64>, Complex<f64>)> = grid
        .modes()
        .filter_map(|(i, n)| {
            let fu = f.u.coeffs()[i];
            let fp = f.p.coeffs()[i];
            let fu = Complex::new(fu.re.as_f64(), fu.im.as_f64());
            let fp = Complex::new(fp.re.as_f64(), fp.im.as_f64());
            (fu.norm_sqr() + fp.norm_sqr() > 0.0).then(|| (frequency(&grid, n), fu, fp))
        })
        .collect();
    let integrand = |r: f64| -> f64 {
        modes
            .iter()
            .map(|&(lambda, fu, fp)| {
                let a = propagator_entries(lambda, t - r);
                let b = propagator_entries(lambda, s - r);
                let phi_t = fu * a[0][1] + fp * a[1][1];
                let phi_s = fu * b[0][1] + fp * b[1][1];
                (phi_t * phi_s.conj()).re
            })
            .sum::<f64>()
            * 2.0
    };
    simpson_refined(integrand, 0.0, upper, 1e-8)
}

/// Composite Simpson with interval doubling until the relative change is below `rtol`.
pub fn simpson_refined(f: impl Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    let mut intervals = 64usize;
    let mut prev = simpson(&f, a, b, intervals);
    loop {
        intervals *= 2;
        let next = simpson(&f, a, b, intervals);
        if (next - prev).abs() <= rtol * next.abs().max(1e-300) || intervals >= 1 << 22 {
            return next;
        }
        prev = next;
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Lower estimate of `‖v‖_{X^α} = sup_{t≥0} e^{t/8} ‖S(t)v‖_{𝒞^α}` from the time grid
/// `{0, dt, ..., horizon}`.
pub fn xalpha_norm<T: Real>(v: &PairField<T>, alpha: f64, horizon: f64, dt: f64) -> Result<T> {
    if horizon < 0.0 || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need horizon >= 0 and dt > 0, got {horizon}, {dt}")));
    }
    let band = v.u.band_extent().max(v.p.band_extent());
    if band < 0 {
        return Ok(T::zero());
    }
    let probe = crate::spectral::HolderProbe::new(v.grid().dim(), band);
    let steps = (horizon / dt).floor() as usize;
    let mut best = T::zero();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let w = probe.pair(&apply_propagator(v, t), alpha) * T::lit((t / 8.0).exp());
        best = best.max(w);
    }
    Ok(best)
}

/// Tail bound for the part of the `X^α` supremum beyond `horizon`:
/// `sup_{t>H} e^{t/8}‖S(t)v‖_{𝒞^α} <= e^{−3H/8} · C_S · Σ_n ⟨n⟩^α |·|`, using the
/// absolutely convergent Fourier series of the band-limited field.
pub fn xalpha_tail_bound<T: Real>(v: &PairField<T>, alpha: f64, horizon: f64) -> f64 {
    let grid = *v.grid();
    let s = grid.dispersion();
    let scale = (2.0 * std::f64::consts::PI).powf(-0.5 * grid.dim() as f64);
    let mut bound = 0.0f64;
    for (i, n) in grid.modes() {
        // operator norm of e^{t/2}S(t) on the mode, bounded uniformly in t
        let lambda = frequency(&grid, n);
        let c = 1.0 + 1.0 / (2.0 * lambda) + 1.0 / lambda + lambda;
        let j = crate::grid::japanese(n);
        let amp = v.u.coeffs()[i].norm().as_f64() + v.p.coeffs()[i].norm().as_f64();
        bound += c * amp * j.powf(alpha).max(j.powf(alpha - 0.5 * s)) * scale;
    }
    bound * (-3.0 * horizon / 8.0).exp()
}

/// Variance of each component of mode `n` of the stochastic convolution at time `t`:
/// the diagonal of `C_∞ − S(t) C_∞ S(t)ᵀ`, summed over real and imaginary parts.
pub fn stick_mode_variance(grid: &GridSpec, n: Mode, t: f64) -> [f64; 2] {
    let s = propagator_entries(frequency(grid, n), t);
    let c = stationary_covariance(grid, n);
    let scst = mul2(&mul2(&s, &c), &transpose2(&s));
    [c[0][0] - scst[0][0], c[1][1] - scst[1][1]]
}

/// Convenience: the zero pair field with `u` set to a real plane wave of mode `n`.
pub fn single_mode_state<T: Real>(grid: GridSpec, n: Mode) -> Result<PairField<T>> {
    let u = SpectralField::plane_wave(grid, n, Complex::new(T::one(), T::zero()))?;
    Ok(PairField { u, p: SpectralField::zeros(grid) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::spectral::{holder_norm, sobolev_pair_norm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scaling-and-squaring Taylor exponential.
    fn expm(a: Mat2<f64>, t: f64) -> Mat2<f64> {
        let norm = a.iter().flatten().map(|x| x.abs()).sum::<f64>() * t;
        let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
        let scale = t / 2f64.powi(squarings);
        let m = [[a[0][0] * scale, a[0][1] * scale], [a[1][0] * scale, a[1][1] * scale]];
        let mut result = [[1.0, 0.0], [0.0, 1.0]];
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        for k in 1..30 {
            term = mul2(&term, &m);
            for i in 0..2 {
                for j in 0..2 {
                    term[i][j] /= k as f64;
                    result[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..squarings {
            result = mul2(&result, &result);
        }
        result
    }

    fn grid() -> GridSpec {
        GridSpec::new(3, 9, 4.0).unwrap()
    }

    #[test]
    fn identity_at_time_zero_and_zero_mode_frequency() {
        let g = grid();
        let m: ModeMatrix<f64> = mode_matrix([1, -2, 3], 0.0, &g);
        assert_eq!(m.matrix, [[1.0, 0.0], [0.0, 1.0]]);
        assert!((frequency(&g, [0, 0, 0]) - 0.866_025_403_784_438_6).abs() < 1e-15);
    }

    #[test]
    fn matches_matrix_exponential() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let n = [rng.random_range(-4..=4), rng.random_range(-4..=4), rng.random_range(-4..=4)];
            let t: f64 = rng.random_range(0.0..5.0);
            let m: ModeMatrix<f64> = mode_matrix(n, t, &g);
            let e = expm(generator(&g, n), t);
            for i in 0..2 {
                for j in 0..2 {
                    let scale = e[i][j].abs().max(1.0);
                    assert!((m.matrix[i][j] - e[i][j]).abs() < 1e-8 * scale, "{n:?} {t}");
                }
            }
        }
    }

    #[test]
    fn semigroup_and_liouville() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let n = [rng.random_range(-4..=4), rng.random_range(-4..=4), rng.random_range(-4..=4)];
            let t1: f64 = rng.random_range(0.0..3.0);
            let t2: f64 = rng.random_range(0.0..3.0);
            let a = mode_matrix::<f64>(n, t1, &g).matrix;
            let b = mode_matrix::<f64>(n, t2, &g).matrix;
            let c = mode_matrix::<f64>(n, t1 + t2, &g).matrix;
            let ab = mul2(&a, &b);
            let scale = c.iter().flatten().map(|x| x.abs()).fold(1.0, f64::max);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((ab[i][j] - c[i][j]).abs() < 1e-10 * scale);
                }
            }
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            assert!((det - (-t1).exp()).abs() < 1e-10 * (-t1).exp() * scale * scale);
        }
    }

    #[test]
    fn lyapunov_identity_and_psd_step_covariance() {
        let g = grid();
        let table = PropagatorTable::<f64>::new(g, 0.1).unwrap();
        for e in table.entries() {
            let a = generator(&g, e.mode);
            let c = e.stationary;
            let ac = mul2(&a, &c);
            let lyap = [
                [ac[0][0] + ac[0][0], ac[0][1] + ac[1][0]],
                [ac[1][0] + ac[0][1], ac[1][1] + ac[1][1] + 2.0],
            ];
            assert!(lyap.iter().flatten().all(|x| x.abs() < 1e-12), "{lyap:?}");
            let q = e.step_covariance;
            assert!(q[0][0] >= 0.0 && q[1][1] >= 0.0);
            assert!(q[0][0] * q[1][1] - q[0][1] * q[1][0] >= -1e-15);
        }
    }

    #[test]
    fn step_covariance_short_and_long_time_limits() {
        let g = GridSpec::new(1, 9, 2.0).unwrap();
        let h = 1e-4;
        let table = PropagatorTable::<f64>::new(g, h).unwrap();
        for e in table.entries() {
            let q = e.step_covariance;
            assert!((q[1][1] - 2.0 * h).abs() < 10.0 * h * h * (1.0 + g.dispersion_symbol(e.mode)));
            assert!(q[0][0].abs() < h * h && q[0][1].abs() < 2.0 * h * h);
        }
        let long = PropagatorTable::<f64>::new(g, 80.0).unwrap();
        for e in long.entries() {
            assert!(e.propagator.iter().flatten().all(|x| x.abs() < 1e-15));
            for i in 0..2 {
                for j in 0..2 {
                    assert!((e.step_covariance[i][j] - e.stationary[i][j]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn duhamel_gain_matches_quadrature() {
        let g = GridSpec::new(1, 9, 2.0).unwrap();
        let h = 0.3;
        let table = PropagatorTable::<f64>::new(g, h).unwrap();
        for e in table.entries() {
            let lambda = frequency(&g, e.mode);
            let g0 = simpson_refined(|r| propagator_entries(lambda, r)[0][1], 0.0, h, 1e-12);
            let g1 = simpson_refined(|r| propagator_entries(lambda, r)[1][1], 0.0, h, 1e-12);
            assert!((e.duhamel_gain[0] - g0).abs() < 1e-10);
            assert!((e.duhamel_gain[1] - g1).abs() < 1e-10);
        }
    }

    #[test]
    fn propagator_examples() {
        let g = GridSpec::new(1, 15, 2.0).unwrap();
        let mut rng = stream(1, Purpose::Initial, 0);
        let v = crate::gibbs::sample_mu::<f64, _>(g, &mut rng);
        assert_eq!(apply_propagator(&v, 0.0), v);
        let a = apply_propagator(&apply_propagator(&v, 0.7), 1.9);
        let b = apply_propagator(&v, 2.6);
        assert!(sobolev_pair_norm(&a.sub(&b), 0.0) < 1e-10 * sobolev_pair_norm(&b, 0.0));
    }

    #[test]
    fn propagator_decay_constant() {
        // sweep of per-mode operator norms in the H^α pair metric establishes C <= 3
        let g = GridSpec::new(1, 33, 2.0).unwrap();
        let mut worst: f64 = 0.0;
        for (_, n) in g.modes() {
            let j = crate::grid::japanese(n);
            for k in 0..=400 {
                let t = k as f64 * 0.025;
                let m = propagator_entries(frequency(&g, n), t);
                // weighted matrix D M D⁻¹ with D = diag(1, ⟨n⟩^{-s/2})
                let d = [1.0, j.powf(-0.5 * g.dispersion())];
                let wm = [
                    [m[0][0], m[0][1] * d[0] / d[1]],
                    [m[1][0] * d[1] / d[0], m[1][1]],
                ];
                let fro = wm.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
                worst = worst.max(fro * (0.5 * t).exp());
            }
        }
        assert!(worst <= 3.0, "per-mode sweep constant {worst}");
        let mut rng = stream(2, Purpose::Initial, 0);
        let v = crate::gibbs::sample_mu::<f64, _>(g, &mut rng);
        for k in 0..=20 {
            let t = k as f64 * 0.5;
            for alpha in [0.0, 0.4, 1.0] {
                let lhs = sobolev_pair_norm(&apply_propagator(&v, t), alpha);
                assert!(lhs <= 3.0 * (-0.5 * t).exp() * sobolev_pair_norm(&v, alpha));
            }
        }
    }

    #[test]
    fn single_mode_holder_decay() {
        let g = grid();
        let alpha = 0.4;
        for n in [[1, 0, 0], [2, 1, 0], [3, 3, 1]] {
            let v = single_mode_state::<f64>(g, n).unwrap();
            let base = holder_norm(&v, alpha);
            for t in [0.5, 2.0, 6.0] {
                let r = holder_norm(&apply_propagator(&v, t), alpha) / ((-0.5 * t).exp() * base);
                assert!(r > 0.0 && r <= 3.0, "{n:?} {t}: {r}");
            }
        }
    }

    #[test]
    fn ou_step_replays_exactly() {
        let g = GridSpec::new(1, 9, 2.0).unwrap();
        let table = PropagatorTable::<f64>::new(g, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (stick, path) = sample_stick(1.0, &table, &mut rng, 3).unwrap();
        assert_eq!(path.steps(), 20);
        let replay = replay_linear(&PairField::zeros(g), &table, &path).unwrap();
        assert_eq!(replay, stick);
        assert!(stick.u.hermitian_defect() == 0.0 && stick.p.hermitian_defect() == 0.0);
        let zero = sample_stick(0.0, &table, &mut rng, 3).unwrap().0;
        assert_eq!(zero, PairField::zeros(g));
        assert!(sample_stick(0.123, &table, &mut rng, 3).is_err());
    }

    #[test]
    fn stick_covariance_edge_cases_and_single_mode() {
        let g = GridSpec::new(1, 9, 2.0).unwrap();
        let f = PairField::new(
            SpectralField::<f64>::cosine(g, [2, 0, 0], 1.0).unwrap(),
            SpectralField::cosine(g, [2, 0, 0], 0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(stick_covariance(0.0, 1.0, &f), 0.0);
        assert_eq!(stick_covariance(1.0, 0.0, &f), 0.0);
        // dense midpoint quadrature of the single-mode integrand
        let lambda = frequency(&g, [2, 0, 0]);
        let (t, s) = (1.3, 0.9);
        let fu = f.u.coeff([2, 0, 0]).unwrap();
        let fp = f.p.coeff([2, 0, 0]).unwrap();
        let n = 200_000;
        let dr = s / n as f64;
        let mut oracle = 0.0;
        for k in 0..n {
            let r = (k as f64 + 0.5) * dr;
            let a = propagator_entries(lambda, t - r);
            let b = propagator_entries(lambda, s - r);
            let pt = fu * a[0][1] + fp * a[1][1];
            let ps = fu * b[0][1] + fp * b[1][1];
            // modes ±2 contribute equally
            oracle += 2.0 * 2.0 * (pt * ps.conj()).re * dr;
        }
        let got = stick_covariance(t, s, &f);
        assert!((got - oracle).abs() < 1e-8 * oracle.abs(), "{got} vs {oracle}");
    }

    #[test]
    fn xalpha_examples() {
        let g = grid();
        assert_eq!(xalpha_norm(&PairField::<f64>::zeros(g), 0.4, 20.0, 0.05).unwrap(), 0.0);
        assert!(xalpha_norm(&PairField::<f64>::zeros(g), 0.4, 20.0, 0.0).is_err());
        let v = single_mode_state::<f64>(g, [2, 0, 0]).unwrap();
        let x = xalpha_norm(&v, 0.4, 20.0, 0.05).unwrap();
        assert!(x >= holder_norm(&v, 0.4));
        assert!(xalpha_tail_bound(&v, 0.4, 20.0) < 1e-2 * x);
    }
}
