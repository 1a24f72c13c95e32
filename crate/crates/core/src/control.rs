//! Gram forms of the per-mode controllability problem, the minimum-norm right inverse of the
//! stochastic convolution, and the Girsanov log-density of a control against recorded noise.
//!
//! Controls are piecewise constant on the step grid. A control `ĥ` on `[kδ, (k+1)δ)` moves the
//! state of a step exactly as the white-noise shift `ΔW ↦ ΔW + ĥδ` does, so adding a control
//! to a noise path shifts the simulated stochastic convolution by exactly its forward image.

use std::io::{Read, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Mode};
use crate::linear::{frequency, Mat2, PropagatorTable};
use crate::noise::{read_container, write_container, ContainerHeader, ContainerKind, Increment, NoisePath};
use crate::real::Real;
use crate::spectral::{PairField, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramForm {
    pub mode: Mode,
    pub t: f64,
    pub b: Mat2<f64>,
}

impl GramForm {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        sym_eigenvalues(&self.b)
    }
}

pub(crate) fn sym_eigenvalues(b: &Mat2<f64>) -> [f64; 2] {
    let mean = 0.5 * (b[0][0] + b[1][1]);
    let r = (0.25 * (b[0][0] - b[1][1]).powi(2) + b[0][1] * b[1][0]).sqrt();
    [mean - r, mean + r]
}

/// `B_n(x,y) = ∫₀ᵗ |sin(rλ)x + (cos(rλ) − sin(rλ)/(2λ))y|² dr` in closed form.
pub fn gram_form(n: Mode, t: f64, grid: &GridSpec) -> Result<GramForm> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {t}")));
    }
    let l = frequency(grid, n);
    let s2 = t / 2.0 - (2.0 * l * t).sin() / (4.0 * l);
    let c2 = t / 2.0 + (2.0 * l * t).sin() / (4.0 * l);
    let sc = (l * t).sin().powi(2) / (2.0 * l);
    let b01 = sc - s2 / (2.0 * l);
    let b11 = c2 - sc / l + s2 / (4.0 * l * l);
    Ok(GramForm { mode: n, t, b: [[s2, b01], [b01, b11]] })
}

/// A control in `L²([0,t]; L²)`, constant on each step, stored over the half-lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath<T> {
    grid: GridSpec,
    dt: f64,
    data: Vec<Complex<T>>,
}

impl<T: Real> ControlPath<T> {
    pub fn zeros(grid: GridSpec, dt: f64, steps: usize) -> Self {
        Self { grid, dt, data: vec![Complex::new(T::zero(), T::zero()); steps * grid.half_len()] }
    }

    /// The same field `ĥ` on every step.
    pub fn constant(field: &SpectralField<T>, dt: f64, steps: usize) -> Self {
        let grid = *field.grid();
        let mut data = Vec::with_capacity(steps * grid.half_len());
        for _ in 0..steps {
            data.extend_from_slice(field.half());
        }
        Self { grid, dt, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn step_size(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.data.len() / self.grid.half_len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn step(&self, k: usize) -> &[Complex<T>] {
        let w = self.grid.half_len();
        &self.data[k * w..(k + 1) * w]
    }

    pub fn step_mut(&mut self, k: usize) -> &mut [Complex<T>] {
        let w = self.grid.half_len();
        &mut self.data[k * w..(k + 1) * w]
    }

    pub fn scale(&self, a: T) -> Self {
        Self { grid: self.grid, dt: self.dt, data: self.data.iter().map(|c| c * a).collect() }
    }

    /// `∫₀ᵗ ‖h‖²_{L²}` over the full lattice.
    pub fn norm_sq(&self) -> f64 {
        let w = self.grid.half_len();
        self.data
            .iter()
            .enumerate()
            .map(|(i, c)| if i % w == 0 { c.norm_sqr().as_f64() } else { 2.0 * c.norm_sqr().as_f64() })
            .sum::<f64>()
            * self.dt
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = ContainerHeader::new(ContainerKind::Control, &self.grid, self.dt, self.steps() as u64, 0, 2 * self.grid.half_len() as u64);
        let values: Vec<f64> = self.data.iter().flat_map(|c| [c.re.as_f64(), c.im.as_f64()]).collect();
        write_container(w, &header, &values)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let (header, values) = read_container(r)?;
        header.expect(ContainerKind::Control)?;
        let grid = header.grid()?;
        if header.record_len != 2 * grid.half_len() as u64 {
            return Err(Error::Format("record length does not match the half-lattice".into()));
        }
        let data = values.chunks_exact(2).map(|c| Complex::new(T::lit(c[0]), T::lit(c[1]))).collect();
        Ok(Self { grid, dt: header.h, data })
    }
}

/// Per-mode response `a = √2 ∫₀^δ S(r)e₂ dr` of one step to a unit constant control.
fn step_response<T: Real>(table: &PropagatorTable<T>) -> Vec<[f64; 2]> {
    let r2 = std::f64::consts::SQRT_2;
    table.entries().iter().map(|e| [r2 * e.duhamel_gain[0], r2 * e.duhamel_gain[1]]).collect()
}

/// Stochastic-convolution image `∫₀ᵗ S(t−r)(0, √2 h(r)) dr` of a control, exact for
/// piecewise-constant controls.
pub fn forward_map<T: Real>(ctrl: &ControlPath<T>) -> Result<PairField<T>> {
    let table = PropagatorTable::<T>::new(ctrl.grid, ctrl.dt)?;
    let a = step_response(&table);
    let mut state = PairField::zeros(ctrl.grid);
    let mut inc = vec![Increment::default(); ctrl.grid.half_len()];
    for k in 0..ctrl.steps() {
        for ((slot, c), a) in inc.iter_mut().zip(ctrl.step(k)).zip(&a) {
            slot.eta_u = c * T::lit(a[0]);
            slot.eta_p = c * T::lit(a[1]);
        }
        table.apply_in_place(&mut state, &inc);
    }
    Ok(state)
}

/// Largest allowed condition number of a per-mode Gram matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Minimum-`L²` control on `steps` equal steps of `[0, t]` whose forward image is `w`.
pub fn right_inverse<T: Real>(w: &PairField<T>, t: f64, steps: usize) -> Result<ControlPath<T>> {
    if !(t > 0.0) || steps == 0 {
        return Err(Error::InvalidArgument(format!("need t > 0 and steps > 0, got {t}, {steps}")));
    }
    let grid = *w.grid();
    let dt = t / steps as f64;
    let table = PropagatorTable::<f64>::new(grid, dt)?;
    let a = step_response(&table);
    let mut ctrl = ControlPath::zeros(grid, dt, steps);
    for (k, e) in table.entries().iter().enumerate() {
        // columns c_j = S(δ)^{steps−1−j} a, built backwards
        let mut cols = vec![[0.0; 2]; steps];
        let mut c = a[k];
        for j in (0..steps).rev() {
            cols[j] = c;
            let m = &e.propagator;
            c = [m[0][0] * c[0] + m[0][1] * c[1], m[1][0] * c[0] + m[1][1] * c[1]];
        }
        let mut g = [[0.0; 2]; 2];
        for c in &cols {
            g[0][0] += c[0] * c[0];
            g[0][1] += c[0] * c[1];
            g[1][1] += c[1] * c[1];
        }
        g[1][0] = g[0][1];
        let eig = sym_eigenvalues(&g);
        let condition = eig[1] / eig[0];
        if !(eig[0] > 0.0) || condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned { mode: e.mode, condition });
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        let i = grid.center() + k;
        let wu = w.u.coeffs()[i];
        let wp = w.p.coeffs()[i];
        let wu = Complex::new(wu.re.as_f64(), wu.im.as_f64());
        let wp = Complex::new(wp.re.as_f64(), wp.im.as_f64());
        let y = [wu * inv[0][0] + wp * inv[0][1], wu * inv[1][0] + wp * inv[1][1]];
        for (j, c) in cols.iter().enumerate() {
            let h = y[0] * c[0] + y[1] * c[1];
            ctrl.step_mut(j)[k] = Complex::new(T::lit(h.re), T::lit(h.im));
        }
    }
    Ok(ctrl)
}

fn check_steps<T: Real>(ctrl: &ControlPath<T>, noise: &NoisePath<T>) -> Result<()> {
    if ctrl.grid != *noise.grid() {
        return Err(Error::GridMismatch("control and noise grids differ".into()));
    }
    if ctrl.steps() != noise.steps() || (ctrl.dt - noise.step_size()).abs() > 1e-12 * ctrl.dt {
        return Err(Error::StepMismatch {
            control: ctrl.steps(),
            control_dt: ctrl.dt,
            noise: noise.steps(),
            noise_dt: noise.step_size(),
        });
    }
    Ok(())
}

/// `log ℰ(h) = Σ_k ⟨ĥ_k, ΔW_k⟩ − ½ Σ_k ‖ĥ_k‖² δ`, pairings over the full lattice.
pub fn girsanov_logdensity<T: Real>(ctrl: &ControlPath<T>, noise: &NoisePath<T>) -> Result<f64> {
    check_steps(ctrl, noise)?;
    let mut pairing = 0.0f64;
    for k in 0..ctrl.steps() {
        for (i, (c, inc)) in ctrl.step(k).iter().zip(noise.step(k)).enumerate() {
            let term = (c.conj() * inc.dw).re.as_f64();
            pairing += if i == 0 { term } else { 2.0 * term };
        }
    }
    Ok(pairing - 0.5 * ctrl.norm_sq())
}

/// The noise path with `ΔW ↦ ΔW + sign·ĥδ` and the matching shift of `η`.
pub fn shift_noise<T: Real>(noise: &NoisePath<T>, ctrl: &ControlPath<T>, sign: f64) -> Result<NoisePath<T>> {
    check_steps(ctrl, noise)?;
    let table = PropagatorTable::<T>::new(ctrl.grid, ctrl.dt)?;
    let a = step_response(&table);
    let mut out = NoisePath::new(ctrl.grid, ctrl.dt, noise.seed());
    let s = T::lit(sign);
    let dt = T::lit(ctrl.dt);
    for k in 0..noise.steps() {
        let step: Vec<Increment<T>> = noise
            .step(k)
            .iter()
            .zip(ctrl.step(k))
            .zip(&a)
            .map(|((inc, c), a)| Increment {
                eta_u: inc.eta_u + c * (s * T::lit(a[0])),
                eta_p: inc.eta_p + c * (s * T::lit(a[1])),
                dw: inc.dw + c * (s * dt),
            })
            .collect();
        out.push_step(&step)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{replay_linear, sample_stick, simpson_refined};
    use crate::rng::{stream, Purpose};
    use crate::spectral::sobolev_pair_norm;
    use rand::Rng;

    fn band_limited(grid: GridSpec, band: i64, seed: u64) -> PairField<f64> {
        let mut rng = stream(seed, Purpose::Control, 0);
        let mut w = PairField::zeros(grid);
        for (i, n) in grid.modes() {
            if crate::grid::max_abs(n) <= band {
                w.u.coeffs_mut()[i] = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                w.p.coeffs_mut()[i] = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        w.u.symmetrize();
        w.p.symmetrize();
        w
    }

    #[test]
    fn gram_form_matches_quadrature() {
        let g = GridSpec::new(3, 9, 4.0).unwrap();
        for n in [[0, 0, 0], [1, 0, 0], [2, 1, 0], [3, 3, 3]] {
            let t = 1.3;
            let form = gram_form(n, t, &g).unwrap();
            let l = frequency(&g, n);
            let x = |r: f64| (r * l).sin();
            let y = |r: f64| (r * l).cos() - (r * l).sin() / (2.0 * l);
            let q = [
                simpson_refined(|r| x(r) * x(r), 0.0, t, 1e-13),
                simpson_refined(|r| x(r) * y(r), 0.0, t, 1e-13),
                simpson_refined(|r| y(r) * y(r), 0.0, t, 1e-13),
            ];
            assert!((form.b[0][0] - q[0]).abs() < 1e-10);
            assert!((form.b[0][1] - q[1]).abs() < 1e-10);
            assert!((form.b[1][1] - q[2]).abs() < 1e-10);
            assert!(form.eigenvalues()[0] > 0.0);
            assert!(((form.b[0][0]) - (t / 2.0 - (2.0 * l * t).sin() / (4.0 * l))).abs() < 1e-15);
        }
        assert!(gram_form([1, 0, 0], 0.0, &g).is_err());
    }

    #[test]
    fn gram_eigenvalues_approach_half_horizon() {
        let g = GridSpec::new(3, 17, 4.0).unwrap();
        for (_, n) in g.modes() {
            if crate::grid::norm_sq(n) >= 16 {
                let e = gram_form(n, 1.0, &g).unwrap().eigenvalues();
                assert!((e[0] - 0.5).abs() <= 0.05 && (e[1] - 0.5).abs() <= 0.05, "{n:?}: {e:?}");
            }
        }
    }

    #[test]
    fn right_inverse_reconstructs() {
        let g = GridSpec::new(1, 33, 2.0).unwrap();
        assert_eq!(right_inverse(&PairField::<f64>::zeros(g), 1.0, 64).unwrap(), ControlPath::zeros(g, 1.0 / 64.0, 64));
        let w = band_limited(g, 8, 1);
        let ctrl = right_inverse(&w, 1.0, 2048).unwrap();
        let back = forward_map(&ctrl).unwrap();
        let s = g.dispersion() / 2.0;
        let rel = sobolev_pair_norm(&back.sub(&w), s) / sobolev_pair_norm(&w, s);
        assert!(rel < 1e-10, "{rel}");
        assert!(ctrl.step(0)[0].im == 0.0);
    }

    #[test]
    fn right_inverse_is_minimum_norm() {
        // adding a null-space direction cannot decrease the norm
        let g = GridSpec::new(1, 9, 2.0).unwrap();
        let w = band_limited(g, 3, 2);
        let ctrl = right_inverse(&w, 1.0, 64).unwrap();
        let base = ctrl.norm_sq();
        let mut rng = stream(3, Purpose::Control, 1);
        for _ in 0..10 {
            let mut other = ctrl.clone();
            for k in 0..64 {
                for c in other.step_mut(k).iter_mut().skip(1) {
                    *c += Complex::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
                }
            }
            // project the perturbation back onto the constraint
            let resid = w.sub(&forward_map(&other).unwrap());
            let fix = right_inverse(&resid, 1.0, 64).unwrap();
            for k in 0..64 {
                for (c, f) in other.step_mut(k).iter_mut().zip(fix.step(k)) {
                    *c += f;
                }
            }
            assert!(sobolev_pair_norm(&forward_map(&other).unwrap().sub(&w), 1.0) < 1e-10);
            assert!(other.norm_sq() >= base * (1.0 - 1e-12));
        }
    }

    #[test]
    fn girsanov_examples() {
        let g = GridSpec::new(1, 9, 2.0).unwrap();
        let table = PropagatorTable::<f64>::new(g, 0.01).unwrap();
        let (_, noise) = sample_stick(1.0, &table, &mut stream(4, Purpose::Dynamics, 0), 4).unwrap();
        let zero = ControlPath::zeros(g, 0.01, 100);
        assert_eq!(girsanov_logdensity(&zero, &noise).unwrap(), 0.0);
        let ctrl = right_inverse(&band_limited(g, 2, 5), 1.0, 100).unwrap();
        let silent = NoisePath::zeros(g, 0.01, 100);
        assert!((girsanov_logdensity(&ctrl, &silent).unwrap() + 0.5 * ctrl.norm_sq()).abs() < 1e-12);
        let lin = girsanov_logdensity(&ctrl, &noise).unwrap() + 0.5 * ctrl.norm_sq();
        for a in [0.0, 1.0, 2.0] {
            let got = girsanov_logdensity(&ctrl.scale(a), &noise).unwrap();
            assert!((got - (a * lin - 0.5 * a * a * ctrl.norm_sq())).abs() < 1e-10);
        }
        let short = ControlPath::zeros(g, 0.01, 99);
        assert!(matches!(girsanov_logdensity(&short, &noise), Err(Error::StepMismatch { .. })));
    }

    #[test]
    fn shifted_noise_shifts_the_stick_by_the_forward_image() {
        let g = GridSpec::new(1, 9, 2.0).unwrap();
        let table = PropagatorTable::<f64>::new(g, 0.02).unwrap();
        let (stick, noise) = sample_stick(1.0, &table, &mut stream(6, Purpose::Dynamics, 0), 6).unwrap();
        let ctrl = right_inverse(&band_limited(g, 4, 7), 1.0, 50).unwrap();
        let shifted = shift_noise(&noise, &ctrl, 1.0).unwrap();
        let moved = replay_linear(&PairField::zeros(g), &table, &shifted).unwrap();
        let diff = moved.sub(&stick).sub(&forward_map(&ctrl).unwrap());
        assert!(sobolev_pair_norm(&diff, 0.0) < 1e-12);
    }

    #[test]
    fn control_container_round_trip() {
        let g = GridSpec::new(2, 5, 3.0).unwrap();
        let w = band_limited(g, 2, 8);
        let ctrl = right_inverse(&w, 0.5, 64).unwrap();
        let mut buf = Vec::new();
        ctrl.write_to(&mut buf).unwrap();
        assert_eq!(ControlPath::<f64>::read_from(&mut buf.as_slice()).unwrap(), ctrl);
        assert!(NoisePath::<f64>::read_from(&mut buf.as_slice()).is_err());
    }
}
