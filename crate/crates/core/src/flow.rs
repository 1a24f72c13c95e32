//! The truncated nonlinear flow: Strang splitting of the exact linear-stochastic step
//! around the cubic kick, trajectories with the co-evolved linear solution, the Picard
//! oracle for the remainder equation, and the energy functional.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{smooth_len, GridSpec};
use crate::linear::{steps_for, PropagatorTable};
use crate::noise::{Increment, NoisePath};
use crate::real::Real;
use crate::spectral::{quartic_with, sobolev_pair_norm, Cuber, PairField, SpectralField, Transform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub grid: GridSpec,
    /// Cube truncation `N` of the nonlinearity; `-1` gives the linear flow.
    pub truncation: i64,
    pub gamma: f64,
    pub h: f64,
    pub t_final: f64,
    /// Keep the sampled increments in the trajectory.
    pub record_noise: bool,
    /// Co-evolve `L(t)u₀` on the same increments.
    pub track_linear: bool,
    /// Store a state every this many steps; `0` means `⌈0.1/h⌉`.
    pub sample_every: usize,
    /// Energy of the remainder above which a run is declared blown up.
    pub energy_ceiling: f64,
    /// Multiplies the kick; `1` is the true dynamics.
    pub kick_factor: f64,
}

impl FlowConfig {
    pub fn new(grid: GridSpec, truncation: i64, gamma: f64, h: f64, t_final: f64) -> Result<Self> {
        let cfg = Self {
            grid,
            truncation,
            gamma,
            h,
            t_final,
            record_noise: false,
            track_linear: false,
            sample_every: 0,
            energy_ceiling: 1e12,
            kick_factor: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.h)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        steps_for(self.t_final, self.h)?;
        Cuber::<f64>::new(self.grid, self.truncation).map(|_| ())
    }

    pub fn steps(&self) -> usize {
        steps_for(self.t_final, self.h).expect("validated")
    }

    pub fn stride(&self) -> usize {
        if self.sample_every > 0 {
            self.sample_every
        } else {
            (0.1 / self.h).ceil().max(1.0) as usize
        }
    }
}

/// `p ← p − dt·γ·κ·P_{≤N}(P_{≤N}u)³` with `u` frozen; an exact shear.
pub struct Kick<T: Real> {
    cuber: Cuber<T>,
    strength: T,
}

impl<T: Real> Kick<T> {
    pub fn new(cfg: &FlowConfig) -> Result<Self> {
        Ok(Self { cuber: Cuber::new(cfg.grid, cfg.truncation)?, strength: T::lit(cfg.gamma * cfg.kick_factor) })
    }

    pub fn apply(&self, state: &mut PairField<T>, dt: f64) {
        let n = self.cuber.truncation();
        if n < 0 || self.strength == T::zero() {
            return;
        }
        let cube = self.cuber.cube_band(&state.u);
        let c = -T::lit(dt) * self.strength;
        let grid = *state.grid();
        let dim = grid.dim();
        for (i, z) in cube.into_iter().enumerate() {
            let mode = crate::grid::cube_mode(dim, n, i);
            let j = grid.index(mode).expect("cube inside the grid band");
            state.p.coeffs_mut()[j] = state.p.coeffs()[j] + z * c;
        }
    }
}

pub fn nonlinear_kick<T: Real>(v: &PairField<T>, h: f64, cfg: &FlowConfig) -> Result<PairField<T>> {
    if v.grid() != &cfg.grid {
        return Err(Error::GridMismatch("state grid differs from the flow grid".into()));
    }
    let mut out = v.clone();
    Kick::new(cfg)?.apply(&mut out, h);
    Ok(out)
}

/// Where a run's increments come from.
pub trait IncrementSource<T: Real> {
    fn next(&mut self, table: &PropagatorTable<T>, out: &mut Vec<Increment<T>>) -> Result<()>;
}

/// Fresh Gaussian increments.
pub struct Sampled<R>(pub R);

impl<T: Real, R: Rng> IncrementSource<T> for Sampled<R> {
    fn next(&mut self, table: &PropagatorTable<T>, out: &mut Vec<Increment<T>>) -> Result<()> {
        table.sample_increments(&mut self.0, out);
        Ok(())
    }
}

/// Replays a recorded path, whose step must equal the half-step of the flow.
pub struct Replay<'a, T: Real> {
    path: &'a NoisePath<T>,
    pos: usize,
}

impl<'a, T: Real> Replay<'a, T> {
    pub fn new(path: &'a NoisePath<T>) -> Self {
        Self { path, pos: 0 }
    }
}

impl<T: Real> IncrementSource<T> for Replay<'_, T> {
    fn next(&mut self, table: &PropagatorTable<T>, out: &mut Vec<Increment<T>>) -> Result<()> {
        if (self.path.step_size() - table.step()).abs() > 1e-12 * table.step() || self.pos >= self.path.steps() {
            return Err(Error::StepMismatch {
                control: self.pos + 1,
                control_dt: table.step(),
                noise: self.path.steps(),
                noise_dt: self.path.step_size(),
            });
        }
        out.clear();
        out.extend_from_slice(self.path.step(self.pos));
        self.pos += 1;
        Ok(())
    }
}

/// Zero increments: the deterministic damped flow.
pub struct Silent;

impl<T: Real> IncrementSource<T> for Silent {
    fn next(&mut self, table: &PropagatorTable<T>, out: &mut Vec<Increment<T>>) -> Result<()> {
        out.clear();
        out.resize(table.entries().len(), Increment::default());
        Ok(())
    }
}

/// Strang step `OU(h/2) ∘ kick(h) ∘ OU(h/2)`. Each call consumes two increments of the
/// half-step table.
pub struct Stepper<T: Real> {
    cfg: FlowConfig,
    half: PropagatorTable<T>,
    kick: Kick<T>,
    first: Vec<Increment<T>>,
    second: Vec<Increment<T>>,
}

impl<T: Real> Stepper<T> {
    pub fn new(cfg: &FlowConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            half: PropagatorTable::new(cfg.grid, 0.5 * cfg.h)?,
            kick: Kick::new(cfg)?,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    /// The table of the half-step, which is the step of recorded noise.
    pub fn half_table(&self) -> &PropagatorTable<T> {
        &self.half
    }

    /// Advances `state` (and `linear`, on the same increments) by one step.
    pub fn advance<S: IncrementSource<T> + ?Sized>(
        &mut self,
        state: &mut PairField<T>,
        linear: Option<&mut PairField<T>>,
        source: &mut S,
        record: Option<&mut NoisePath<T>>,
    ) -> Result<()> {
        source.next(&self.half, &mut self.first)?;
        source.next(&self.half, &mut self.second)?;
        self.half.apply_in_place(state, &self.first);
        self.kick.apply(state, self.cfg.h);
        self.half.apply_in_place(state, &self.second);
        if let Some(l) = linear {
            self.half.apply_in_place(l, &self.first);
            self.half.apply_in_place(l, &self.second);
        }
        if let Some(path) = record {
            path.push_step(&self.first)?;
            path.push_step(&self.second)?;
        }
        Ok(())
    }
}

/// One Strang step with fresh increments; returns the new state and the two half-step
/// increment sets.
pub fn step<T: Real, R: Rng>(state: &PairField<T>, cfg: &FlowConfig, rng: &mut R) -> Result<(PairField<T>, [Vec<Increment<T>>; 2])> {
    let mut stepper = Stepper::new(cfg)?;
    let mut out = state.clone();
    let mut path = NoisePath::new(cfg.grid, 0.5 * cfg.h, 0);
    stepper.advance(&mut out, None, &mut Sampled(rng), Some(&mut path))?;
    Ok((out, [path.step(0).to_vec(), path.step(1).to_vec()]))
}

#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub times: Vec<f64>,
    pub states: Vec<PairField<T>>,
    /// `L(t)u₀ = S(t)u₀ + stick_t`, on the same increments.
    pub linear_states: Option<Vec<PairField<T>>>,
    pub noise: Option<NoisePath<T>>,
    /// Time of the first non-finite state or energy-ceiling crossing.
    pub blowup_time: Option<f64>,
}

impl<T: Real> Trajectory<T> {
    /// `v_N = Φ − L` at every sample time.
    pub fn remainders(&self) -> Option<Vec<PairField<T>>> {
        let lin = self.linear_states.as_ref()?;
        Some(self.states.iter().zip(lin).map(|(a, b)| a.sub(b)).collect())
    }

    pub fn final_state(&self) -> &PairField<T> {
        self.states.last().expect("trajectories hold the initial state")
    }
}

/// Evolves `u0 + v0`, co-evolving the linear solution from `u0` when tracking, so that the
/// remainder starts at `v0`. States are stored every `stride` steps and at the final time.
pub fn evolve_from<T: Real, S: IncrementSource<T> + ?Sized>(
    u0: &PairField<T>,
    v0: Option<&PairField<T>>,
    cfg: &FlowConfig,
    source: &mut S,
    seed: u64,
) -> Result<Trajectory<T>> {
    if u0.grid() != &cfg.grid {
        return Err(Error::GridMismatch("initial datum grid differs from the flow grid".into()));
    }
    let mut stepper = Stepper::new(cfg)?;
    let mut state = match v0 {
        Some(v) => u0.add(v),
        None => u0.clone(),
    };
    let mut linear = cfg.track_linear.then(|| u0.clone());
    let mut noise = cfg.record_noise.then(|| NoisePath::new(cfg.grid, 0.5 * cfg.h, seed));
    let steps = cfg.steps();
    let stride = cfg.stride();
    let energy = EnergyEvaluator::<T>::new(cfg.grid);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![state.clone()],
        linear_states: linear.as_ref().map(|l| vec![l.clone()]),
        noise: None,
        blowup_time: None,
    };
    for k in 1..=steps {
        stepper.advance(&mut state, linear.as_mut(), source, noise.as_mut())?;
        let t = k as f64 * cfg.h;
        let sample = k % stride == 0 || k == steps;
        let mut blown = !state.is_finite();
        if !blown && sample {
            if let Some(l) = &linear {
                blown = !(energy.energy(&state.sub(l)).as_f64() <= cfg.energy_ceiling);
            }
        }
        if sample || blown {
            traj.times.push(t);
            traj.states.push(state.clone());
            if let (Some(ls), Some(l)) = (traj.linear_states.as_mut(), &linear) {
                ls.push(l.clone());
            }
        }
        if blown {
            traj.blowup_time = Some(t);
            break;
        }
    }
    traj.noise = noise;
    Ok(traj)
}

/// Evolves `u0` with fresh increments from `rng`.
pub fn evolve<T: Real, R: Rng>(u0: &PairField<T>, cfg: &FlowConfig, rng: R, seed: u64) -> Result<Trajectory<T>> {
    evolve_from(u0, None, cfg, &mut Sampled(rng), seed)
}

/// Runs the flow calling `observe(step, t, state, linear)` after every step without storing
/// states; returns the blowup time if one occurred.
pub fn run_observed<T: Real, S: IncrementSource<T> + ?Sized>(
    start: &PairField<T>,
    linear_start: Option<&PairField<T>>,
    cfg: &FlowConfig,
    source: &mut S,
    mut observe: impl FnMut(usize, f64, &PairField<T>, Option<&PairField<T>>) -> Result<()>,
) -> Result<Option<f64>> {
    let mut stepper = Stepper::new(cfg)?;
    let mut state = start.clone();
    let mut linear = linear_start.cloned();
    for k in 1..=cfg.steps() {
        stepper.advance(&mut state, linear.as_mut(), source, None)?;
        let t = k as f64 * cfg.h;
        if !state.is_finite() {
            return Ok(Some(t));
        }
        observe(k, t, &state, linear.as_ref())?;
    }
    Ok(None)
}

/// Energy `E(v) = ½∫v_t² + ½∫v² + ½∫((−Δ)^{s/4}v)² + ¼∫v⁴ + ⅛∫(v+v_t)²`.
pub struct EnergyEvaluator<T: Real> {
    grid: GridSpec,
    quartic: Transform<T>,
}

impl<T: Real> EnergyEvaluator<T> {
    pub fn new(grid: GridSpec) -> Self {
        Self { grid, quartic: Transform::new(grid.dim(), smooth_len(4 * grid.band() as usize + 2)) }
    }

    pub fn energy(&self, v: &PairField<T>) -> T {
        let mut quad = 0.0f64;
        for (i, n) in self.grid.modes() {
            let u = v.u.coeffs()[i];
            let p = v.p.coeffs()[i];
            let (u2, p2, s2) = (u.norm_sqr().as_f64(), p.norm_sqr().as_f64(), (u + p).norm_sqr().as_f64());
            quad += 0.5 * p2 + 0.5 * u2 + 0.5 * self.grid.dispersion_symbol(n) * u2 + 0.125 * s2;
        }
        let k = self.grid.band();
        let q = quartic_with(&self.quartic, k, &v.u.cube_coeffs(k));
        T::lit(quad) + q * T::lit(0.25)
    }
}

pub fn energy<T: Real>(v: &PairField<T>) -> T {
    EnergyEvaluator::new(*v.grid()).energy(v)
}

/// Time series of `E(v_N)` with transient and boundedness diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub initial: f64,
    pub sup: f64,
    pub all_finite: bool,
    pub blowup_time: Option<f64>,
    /// Median energy over the second half of the run.
    pub band: f64,
    /// Least-squares slope of `−log(E − band)` over the transient.
    pub decay_rate: f64,
    /// Smallest `C` with `E − band <= C·e^{−2t/5}·E(v₀)` on the transient.
    pub fitted_multiple: f64,
    /// End of the fitted transient.
    pub transient_end: f64,
}

/// Energy diagnostics of a trajectory carrying its linear part. The transient is the
/// stretch from `t = 0` until the excess over the stationary band first drops below
/// `max(10·band, 10⁻³·E(v₀))`.
pub fn energy_monitor<T: Real>(traj: &Trajectory<T>) -> Result<EnergyReport> {
    let rem = traj
        .remainders()
        .ok_or_else(|| Error::InvalidArgument("trajectory does not carry the linear solution".into()))?;
    let grid = *traj.states[0].grid();
    let ev = EnergyEvaluator::<T>::new(grid);
    let energies: Vec<f64> = rem.iter().map(|v| ev.energy(v).as_f64()).collect();
    let times = traj.times.clone();
    let all_finite = energies.iter().all(|e| e.is_finite());
    let sup = energies.iter().cloned().fold(0.0, f64::max);
    let initial = energies[0];
    let t_end = *times.last().unwrap();
    let mut late: Vec<f64> = times
        .iter()
        .zip(&energies)
        .filter(|(t, _)| **t >= 0.5 * t_end)
        .map(|(_, e)| *e)
        .collect();
    late.sort_by(|a, b| a.total_cmp(b));
    let band = if late.is_empty() { 0.0 } else { late[late.len() / 2] };
    let floor = (10.0 * band).max(1e-3 * initial);
    let mut pts = Vec::new();
    let mut fitted_multiple: f64 = 0.0;
    let mut transient_end = 0.0;
    for (&t, &e) in times.iter().zip(&energies) {
        let excess = e - band;
        if excess <= floor {
            break;
        }
        pts.push((t, excess.ln()));
        fitted_multiple = fitted_multiple.max(excess / ((-0.4 * t).exp() * initial));
        transient_end = t;
    }
    let decay_rate = if pts.len() >= 2 { -least_squares_slope(&pts) } else { f64::NAN };
    Ok(EnergyReport {
        times,
        energies,
        initial,
        sup,
        all_finite,
        blowup_time: traj.blowup_time,
        band,
        decay_rate,
        fitted_multiple,
        transient_end,
    })
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Picard oracle for `v(t) = −∫₀ᵗ S(t−r)(0, γP_{≤N}(P_{≤N}(z+v))³)(r) dr` given the
/// realized linear path `z` at the nodes `k·δ`. The integral is the composite trapezoid rule
/// on those nodes, evaluated through `I_{j+1} = S(δ)I_j + (δ/2)(S(δ)F_j + F_{j+1})`. The
/// iteration restarts on windows of length `t_loc` and stops when successive iterates differ
/// by less than `tol` in `C(window; H^{s/2})`.
pub fn picard_solve<T: Real>(z: &[PairField<T>], delta: f64, cfg: &FlowConfig, t_loc: f64, tol: f64) -> Result<Vec<PairField<T>>> {
    let first = z.first().ok_or_else(|| Error::InvalidArgument("empty linear path".into()))?;
    let grid = *first.grid();
    let table = PropagatorTable::<T>::new(grid, delta)?;
    let cuber = Cuber::<T>::new(grid, cfg.truncation)?;
    let s_half = 0.5 * grid.dispersion();
    let gamma = T::lit(cfg.gamma);
    let force = |zv: &PairField<T>| -> PairField<T> {
        // (0, γ P(P u)³)
        let mut f = PairField::zeros(grid);
        if cfg.truncation >= 0 {
            f.p = cuber.cube(&zv.u).expect("grid checked").scale(gamma);
        }
        f
    };
    let window = ((t_loc / delta).round() as usize).max(1);
    let mut v: Vec<PairField<T>> = vec![PairField::zeros(grid)];
    let mut start = 0;
    while start + 1 < z.len() {
        let end = (start + window).min(z.len() - 1);
        // initial guess: hold the window's starting value
        let mut iterate: Vec<PairField<T>> = vec![v[start].clone(); end - start + 1];
        let mut prev_diff = f64::INFINITY;
        let mut converged = false;
        for it in 0..500 {
            let forces: Vec<PairField<T>> = (0..=end - start).map(|j| force(&z[start + j].add(&iterate[j]))).collect();
            let mut next = Vec::with_capacity(iterate.len());
            next.push(v[start].clone());
            let d = T::lit(0.5 * delta);
            for j in 0..end - start {
                let mut a = next[j].sub(&forces[j].scale(d));
                table.propagate_in_place(&mut a);
                next.push(a.sub(&forces[j + 1].scale(d)));
            }
            let mut diff = 0.0f64;
            let mut size = 0.0f64;
            for (a, b) in next.iter().zip(&iterate) {
                diff = diff.max(sobolev_pair_norm(&a.sub(b), s_half).as_f64());
                size = size.max(sobolev_pair_norm(a, s_half).as_f64());
            }
            if !diff.is_finite() || (it >= 3 && diff > prev_diff) {
                return Err(Error::NonContraction {
                    start: start as f64 * delta,
                    end: end as f64 * delta,
                    lipschitz: diff / prev_diff,
                });
            }
            iterate = next;
            if diff <= tol * size.max(1.0) {
                converged = true;
                break;
            }
            prev_diff = diff;
        }
        if !converged {
            return Err(Error::NonContraction { start: start as f64 * delta, end: end as f64 * delta, lipschitz: 1.0 });
        }
        v.extend(iterate.into_iter().skip(1));
        start = end;
    }
    Ok(v)
}

/// Projects a field onto `P_{>N}`; zero exactly when the field lives in the cube band.
pub fn outside_band<T: Real>(f: &SpectralField<T>, n: i64) -> T {
    let grid = *f.grid();
    grid.modes()
        .filter(|(_, m)| crate::grid::max_abs(*m) > n)
        .map(|(i, _)| f.coeffs()[i].norm())
        .fold(T::zero(), |a, b| a.max(b))
}
