//! The Gaussian base measure `μ`, the interaction density `F_N = exp(−(γ/4)∫(P_{≤N}u)⁴)`,
//! samplers for `ρ_N ∝ F_N μ`, and self-normalized estimation.

use std::io::{Read, Write};

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{smooth_len, GridSpec, Mode};
use crate::noise::{read_container, write_container, ContainerHeader, ContainerKind};
use crate::real::Real;
use crate::rng::{stream, Purpose};
use crate::spectral::{quartic_with, HolderProbe, PairField, SpectralField, Transform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsConfig {
    pub grid: GridSpec,
    /// Cube truncation `N`; `-1` switches the interaction off.
    pub truncation: i64,
    pub gamma: f64,
}

impl GibbsConfig {
    pub fn new(grid: GridSpec, truncation: i64, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if truncation < -1 || truncation > grid.band() {
            return Err(Error::TruncationExceedsBand { n: truncation, k: grid.band() });
        }
        Ok(Self { grid, truncation, gamma })
    }
}

/// One draw from `μ`: `E|û(n)|² = 1/(1+|n|^s)`, `E|p̂(n)|² = 1`, independent over the
/// half-lattice, real at `n = 0`.
pub fn sample_mu<T: Real, R: Rng + ?Sized>(grid: GridSpec, rng: &mut R) -> PairField<T> {
    let half = grid.half_len();
    let mut u = Vec::with_capacity(half);
    let mut p = Vec::with_capacity(half);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..half {
        let n = grid.mode(grid.center() + k);
        let su = 1.0 / (1.0 + grid.dispersion_symbol(n)).sqrt();
        let mut z = || rng.sample::<f64, _>(StandardNormal);
        if k == 0 {
            u.push(Complex::new(T::lit(su * z()), T::zero()));
            p.push(Complex::new(T::lit(z()), T::zero()));
        } else {
            u.push(Complex::new(T::lit(su * r * z()), T::lit(su * r * z())));
            p.push(Complex::new(T::lit(r * z()), T::lit(r * z())));
        }
    }
    PairField {
        u: SpectralField::from_half(grid, &u).expect("half-lattice length"),
        p: SpectralField::from_half(grid, &p).expect("half-lattice length"),
    }
}

/// Evaluates `(γ/4) ∫ (P_{≤N} u)⁴` with a cached alias-free quadrature grid.
pub struct Interaction<T: Real> {
    cfg: GibbsConfig,
    transform: Option<Transform<T>>,
}

impl<T: Real> Interaction<T> {
    pub fn new(cfg: GibbsConfig) -> Self {
        let transform = (cfg.truncation >= 0 && cfg.gamma > 0.0)
            .then(|| Transform::new(cfg.grid.dim(), smooth_len(4 * cfg.truncation as usize + 2)));
        Self { cfg, transform }
    }

    pub fn config(&self) -> &GibbsConfig {
        &self.cfg
    }

    pub fn eval(&self, u: &SpectralField<T>) -> T {
        match &self.transform {
            None => T::zero(),
            Some(tr) => {
                let n = self.cfg.truncation;
                quartic_with(tr, n, &u.cube_coeffs(n)) * T::lit(0.25 * self.cfg.gamma)
            }
        }
    }

    /// `log F_N(u)`, never positive.
    pub fn log_weight(&self, u: &SpectralField<T>) -> f64 {
        -self.eval(u).as_f64()
    }
}

/// `(γ/4)·∫(P_{≤N}u)⁴`; `log F_N = −interaction`.
pub fn interaction<T: Real>(u: &SpectralField<T>, cfg: &GibbsConfig) -> T {
    Interaction::new(*cfg).eval(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerMethod {
    /// Independent `μ` draws carrying log-weights `log F_N`.
    Reweight,
    /// Independence Metropolis chains with proposal `μ`, pooled after burn-in.
    Imh { burn_in: usize, chains: usize },
}

#[derive(Debug, Clone)]
pub struct WeightedEnsemble<T: Real> {
    pub samples: Vec<PairField<T>>,
    pub log_weights: Vec<f64>,
    pub seed: u64,
    /// Mean acceptance rate of the chains, for the independence sampler.
    pub acceptance: Option<f64>,
}

impl<T: Real> WeightedEnsemble<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn estimate(&self, values: &[f64]) -> Result<Estimate> {
        estimate(&self.log_weights, values)
    }

    pub fn ess(&self) -> Result<f64> {
        Ok(normalized_weights(&self.log_weights)?.1)
    }

    /// Writes an ensemble container: per member the half-lattice coefficients of `u` and `p`
    /// (real and imaginary parts interleaved) followed by the log-weight.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let grid = *self.samples.first().ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?.grid();
        let record = 4 * grid.half_len() + 1;
        let header = ContainerHeader::new(ContainerKind::Ensemble, &grid, 0.0, self.len() as u64, self.seed, record as u64);
        let mut values = Vec::with_capacity(record * self.len());
        for (s, lw) in self.samples.iter().zip(&self.log_weights) {
            for c in s.u.half().iter().chain(s.p.half()) {
                values.push(c.re.as_f64());
                values.push(c.im.as_f64());
            }
            values.push(*lw);
        }
        write_container(w, &header, &values)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let (header, values) = read_container(r)?;
        header.expect(ContainerKind::Ensemble)?;
        let grid = header.grid()?;
        let half = grid.half_len();
        let record = 4 * half + 1;
        if header.record_len != record as u64 {
            return Err(Error::Format("record length does not match the half-lattice".into()));
        }
        let mut samples = Vec::with_capacity(header.records as usize);
        let mut log_weights = Vec::with_capacity(header.records as usize);
        for rec in values.chunks_exact(record) {
            let coeffs: Vec<Complex<T>> = rec[..4 * half].chunks_exact(2).map(|c| Complex::new(T::lit(c[0]), T::lit(c[1]))).collect();
            let u = SpectralField::from_half(grid, &coeffs[..half])?;
            let p = SpectralField::from_half(grid, &coeffs[half..])?;
            samples.push(PairField::new(u, p)?);
            log_weights.push(rec[4 * half]);
        }
        Ok(Self { samples, log_weights, seed: header.seed, acceptance: None })
    }
}

/// Draws `count` members of `ρ_N`. Member `i` (or chain `i`) uses its own stream of `seed`,
/// so the result does not depend on the thread count.
pub fn sample_rho<T: Real>(cfg: &GibbsConfig, count: usize, seed: u64, method: SamplerMethod) -> Result<WeightedEnsemble<T>> {
    if count == 0 {
        return Err(Error::InvalidArgument("ensemble size must be positive".into()));
    }
    let inter = Interaction::<T>::new(*cfg);
    match method {
        SamplerMethod::Reweight => {
            let pairs: Vec<(PairField<T>, f64)> = (0..count)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(seed, Purpose::Sampler, i as u64);
                    let x = sample_mu::<T, _>(cfg.grid, &mut rng);
                    let lw = inter.log_weight(&x.u);
                    (x, lw)
                })
                .collect();
            let (samples, log_weights) = pairs.into_iter().unzip();
            Ok(WeightedEnsemble { samples, log_weights, seed, acceptance: None })
        }
        SamplerMethod::Imh { burn_in, chains } => {
            if burn_in > count {
                return Err(Error::InvalidArgument(format!("burn-in {burn_in} exceeds the sample count {count}")));
            }
            let chains = chains.clamp(1, count);
            let runs: Vec<(Vec<PairField<T>>, usize, usize)> = (0..chains)
                .into_par_iter()
                .map(|c| {
                    let keep = count / chains + usize::from(c < count % chains);
                    let mut rng = stream(seed, Purpose::Sampler, c as u64);
                    imh_chain(&inter, &mut rng, burn_in, keep)
                })
                .collect();
            let mut samples = Vec::with_capacity(count);
            let (mut accepted, mut proposed) = (0, 0);
            for (s, a, p) in runs {
                samples.extend(s);
                accepted += a;
                proposed += p;
            }
            let acceptance = Some(accepted as f64 / proposed.max(1) as f64);
            Ok(WeightedEnsemble { log_weights: vec![0.0; samples.len()], samples, seed, acceptance })
        }
    }
}

fn imh_chain<T: Real, R: Rng + ?Sized>(
    inter: &Interaction<T>,
    rng: &mut R,
    burn_in: usize,
    keep: usize,
) -> (Vec<PairField<T>>, usize, usize) {
    let grid = inter.cfg.grid;
    let mut x = sample_mu::<T, _>(grid, rng);
    let mut lx = inter.log_weight(&x.u);
    let mut out = Vec::with_capacity(keep);
    let mut accepted = 0;
    for it in 0..burn_in + keep {
        let y = sample_mu::<T, _>(grid, rng);
        let ly = inter.log_weight(&y.u);
        let uniform: f64 = rng.random();
        if imh_accepts(lx, ly, uniform) {
            x = y;
            lx = ly;
            accepted += 1;
        }
        if it >= burn_in {
            out.push(x.clone());
        }
    }
    (out, accepted, burn_in + keep)
}

/// Acceptance rule `u < min(1, F_N(y)/F_N(x))` in log form.
pub fn imh_accepts(log_fx: f64, log_fy: f64, uniform: f64) -> bool {
    log_fy >= log_fx || uniform.ln() < log_fy - log_fx
}

/// Expected acceptance `E_μ[F_N]` of the rejection sampler, from `pilot` draws.
pub fn rejection_acceptance<T: Real>(cfg: &GibbsConfig, pilot: usize, seed: u64) -> f64 {
    let inter = Interaction::<T>::new(*cfg);
    let mut rng = stream(seed, Purpose::Auxiliary(1), 0);
    let total: f64 = (0..pilot.max(1))
        .map(|_| inter.log_weight(&sample_mu::<T, _>(cfg.grid, &mut rng).u).exp())
        .sum();
    total / pilot.max(1) as f64
}

/// Exact `ρ_N` draws by accepting `μ` proposals with probability `F_N`. Only sensible for
/// tiny systems; fails after `max_proposals`.
pub fn rejection_sample<T: Real>(cfg: &GibbsConfig, count: usize, seed: u64, max_proposals: usize) -> Result<WeightedEnsemble<T>> {
    let inter = Interaction::<T>::new(*cfg);
    let mut rng = stream(seed, Purpose::Sampler, u64::MAX);
    let mut samples = Vec::with_capacity(count);
    let mut proposals = 0;
    while samples.len() < count {
        if proposals >= max_proposals {
            return Err(Error::InvalidArgument(format!("rejection sampler exhausted {max_proposals} proposals")));
        }
        proposals += 1;
        let x = sample_mu::<T, _>(cfg.grid, &mut rng);
        let u: f64 = rng.random();
        if u < inter.log_weight(&x.u).exp() {
            samples.push(x);
        }
    }
    let acceptance = Some(count as f64 / proposals as f64);
    Ok(WeightedEnsemble { log_weights: vec![0.0; count], samples, seed, acceptance })
}

/// Self-normalized weighted mean with delta-method standard error and ESS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub ess: f64,
}

/// Normalized weights and ESS `(Σw)²/Σw²`.
pub fn normalized_weights(log_weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    let top = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::ZeroWeights);
    }
    let w: Vec<f64> = log_weights.iter().map(|&l| (l - top).exp()).collect();
    let sum: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|x| x * x).sum();
    let ess = sum * sum / sq;
    Ok((w.into_iter().map(|x| x / sum).collect(), ess))
}

pub fn estimate(log_weights: &[f64], values: &[f64]) -> Result<Estimate> {
    if log_weights.len() != values.len() || values.is_empty() {
        return Err(Error::InvalidArgument(format!("{} weights for {} values", log_weights.len(), values.len())));
    }
    let (w, ess) = normalized_weights(log_weights)?;
    let mean: f64 = w.iter().zip(values).map(|(w, x)| w * x).sum();
    let var: f64 = w.iter().zip(values).map(|(w, x)| w * w * (x - mean) * (x - mean)).sum();
    let std_error = if ess > 1.0 { (var * ess / (ess - 1.0)).sqrt() } else { f64::INFINITY };
    Ok(Estimate { mean, std_error, ess })
}

/// Registered scalar observables of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    One,
    /// `∫u²`.
    L2U,
    /// `∫u_t²`.
    L2Ut,
    /// `∫u⁴`.
    Quartic,
    ModeRe(Mode),
    ModeIm(Mode),
    /// Hölder-type norm of the pair.
    Holder(f64),
}

impl Observable {
    pub fn name(&self) -> String {
        let m = |n: &Mode, d: usize| n[..d].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Observable::One => "one".into(),
            Observable::L2U => "l2_u".into(),
            Observable::L2Ut => "l2_ut".into(),
            Observable::Quartic => "quartic".into(),
            Observable::ModeRe(n) => format!("mode_re:{}", m(n, mode_dim(n))),
            Observable::ModeIm(n) => format!("mode_im:{}", m(n, mode_dim(n))),
            Observable::Holder(a) => format!("holder:{a}"),
        }
    }
}

fn mode_dim(n: &Mode) -> usize {
    if n[2] != 0 {
        3
    } else if n[1] != 0 {
        2
    } else {
        1
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown observable '{s}'"));
        let parse_mode = |rest: &str| -> Result<Mode> {
            let parts: Vec<i64> = rest
                .split(',')
                .map(|x| x.trim().parse::<i64>().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            if parts.is_empty() || parts.len() > 3 {
                return Err(bad());
            }
            let mut n = [0; 3];
            n[..parts.len()].copy_from_slice(&parts);
            Ok(n)
        };
        match s {
            "one" => Ok(Observable::One),
            "l2_u" => Ok(Observable::L2U),
            "l2_ut" => Ok(Observable::L2Ut),
            "quartic" => Ok(Observable::Quartic),
            _ => {
                if let Some(rest) = s.strip_prefix("mode_re:") {
                    Ok(Observable::ModeRe(parse_mode(rest)?))
                } else if let Some(rest) = s.strip_prefix("mode_im:") {
                    Ok(Observable::ModeIm(parse_mode(rest)?))
                } else if let Some(rest) = s.strip_prefix("holder:") {
                    rest.parse().map(Observable::Holder).map_err(|_| bad())
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// Evaluates observables on one grid with cached transforms.
pub struct ObservableEvaluator<T: Real> {
    grid: GridSpec,
    quartic: Transform<T>,
    holder: HolderProbe<T>,
}

impl<T: Real> ObservableEvaluator<T> {
    pub fn new(grid: GridSpec) -> Self {
        let k = grid.band();
        Self {
            grid,
            quartic: Transform::new(grid.dim(), smooth_len(4 * k as usize + 2)),
            holder: HolderProbe::new(grid.dim(), k),
        }
    }

    pub fn eval(&self, obs: &Observable, v: &PairField<T>) -> Result<f64> {
        if v.grid() != &self.grid {
            return Err(Error::GridMismatch("observable evaluator grid differs".into()));
        }
        let coeff = |n: &Mode| {
            v.u.coeff(*n)
                .ok_or_else(|| Error::InvalidArgument(format!("mode {n:?} outside the grid band")))
        };
        Ok(match obs {
            Observable::One => 1.0,
            Observable::L2U => v.u.l2_norm_sq().as_f64(),
            Observable::L2Ut => v.p.l2_norm_sq().as_f64(),
            Observable::Quartic => {
                let k = self.grid.band();
                quartic_with(&self.quartic, k, &v.u.cube_coeffs(k)).as_f64()
            }
            Observable::ModeRe(n) => coeff(n)?.re.as_f64(),
            Observable::ModeIm(n) => coeff(n)?.im.as_f64(),
            Observable::Holder(a) => self.holder.pair(v, *a).as_f64(),
        })
    }

    pub fn eval_all(&self, obs: &[Observable], v: &PairField<T>) -> Result<Vec<f64>> {
        obs.iter().map(|o| self.eval(o, v)).collect()
    }
}

/// `E_μ ∫u² = Σ_n 1/(1+|n|^s)` over the grid band.
pub fn mu_l2_u(grid: &GridSpec) -> f64 {
    grid.modes().map(|(_, n)| 1.0 / (1.0 + grid.dispersion_symbol(n))).sum()
}

#[cfg(test)]
mod tests {
    #[test]
    fn ensemble_container_round_trips() {
        let grid = GridSpec::new(1, 10, 2.0).unwrap();
        let cfg = GibbsConfig::new(grid, 2, 0.5).unwrap();
        let ens = sample_rho::<f64>(&cfg, 5, 3, SamplerMethod::Reweight).unwrap();
        let mut buf = Vec::new();
        ens.write_to(&mut buf).unwrap();
        let back = WeightedEnsemble::<f64>::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.samples, ens.samples);
        assert_eq!(back.log_weights, ens.log_weights);
        assert_eq!(back.seed, 3);
        assert!(WeightedEnsemble::<f64>::read_from(&mut &buf[..buf.len() - 3]).is_err());
    }

    use super::*;
    use crate::spectral::quartic_integral;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid1() -> GridSpec {
        GridSpec::new(1, 33, 2.0).unwrap()
    }

    #[test]
    fn interaction_examples() {
        let g = GridSpec::new(3, 7, 4.0).unwrap();
        let u = SpectralField::<f64>::constant(g, 0.7);
        let cfg = GibbsConfig::new(g, 1, 1.0).unwrap();
        let want = 0.7f64.powi(4) * (2.0 * PI).powi(3) / 4.0;
        assert!((interaction(&u, &cfg) - want).abs() < 1e-12 * want);
        assert_eq!(interaction(&u, &GibbsConfig::new(g, 1, 0.0).unwrap()), 0.0);
        assert_eq!(interaction(&u, &GibbsConfig::new(g, -1, 1.0).unwrap()), 0.0);
        assert!(GibbsConfig::new(g, 4, 1.0).is_err());
        assert!(GibbsConfig::new(g, 1, -1.0).is_err());
    }

    #[test]
    fn interaction_converges_to_full_band_pathwise() {
        let g = grid1();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = sample_mu::<f64, _>(g, &mut rng);
            let full = 0.25 * quartic_integral(&x.u);
            let at_k = interaction(&x.u, &GibbsConfig::new(g, g.band(), 1.0).unwrap());
            assert!((full - at_k).abs() < 1e-12 * full);
            let mut prev = f64::INFINITY;
            // tail differences shrink as N approaches K
            for n in [4, 8, 12, 15] {
                let d = (interaction(&x.u, &GibbsConfig::new(g, n, 1.0).unwrap()) - full).abs();
                assert!(d <= prev * 1.5 + 1e-12);
                prev = d;
            }
            assert!(x.u.hermitian_defect() == 0.0);
        }
    }

    #[test]
    fn mu_second_moments() {
        let g = GridSpec::new(1, 9, 2.0).unwrap();
        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let modes: Vec<Mode> = (0..=3).map(|k| [k, 0, 0]).collect();
        let mut su = vec![Vec::with_capacity(draws); modes.len()];
        let mut sp = vec![Vec::with_capacity(draws); modes.len()];
        let mut cross = Vec::with_capacity(draws);
        for _ in 0..draws {
            let x = sample_mu::<f64, _>(g, &mut rng);
            for (k, n) in modes.iter().enumerate() {
                let c = 1.0 + g.dispersion_symbol(*n);
                su[k].push(x.u.coeff(*n).unwrap().norm_sqr() * c);
                sp[k].push(x.p.coeff(*n).unwrap().norm_sqr());
            }
            cross.push((x.u.coeff([1, 0, 0]).unwrap() * x.p.coeff([2, 0, 0]).unwrap()).re);
        }
        let z = |v: &[f64], target: f64| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
            (m - target) / (var / v.len() as f64).sqrt()
        };
        for k in 0..modes.len() {
            assert!(z(&su[k], 1.0).abs() < 4.0, "u mode {k}: z = {}", z(&su[k], 1.0));
            assert!(z(&sp[k], 1.0).abs() < 4.0, "p mode {k}");
        }
        assert!(z(&cross, 0.0).abs() < 4.0);
    }

    #[test]
    fn zero_gamma_samplers_are_plain_mu() {
        let g = grid1();
        let cfg = GibbsConfig::new(g, 8, 0.0).unwrap();
        let a = sample_rho::<f64>(&cfg, 16, 3, SamplerMethod::Reweight).unwrap();
        assert!(a.log_weights.iter().all(|&l| l == 0.0));
        let b = sample_rho::<f64>(&cfg, 16, 3, SamplerMethod::Imh { burn_in: 4, chains: 2 }).unwrap();
        assert_eq!(b.acceptance, Some(1.0));
        assert!(sample_rho::<f64>(&cfg, 0, 3, SamplerMethod::Reweight).is_err());
        assert!(sample_rho::<f64>(&cfg, 4, 3, SamplerMethod::Imh { burn_in: 5, chains: 1 }).is_err());
    }

    #[test]
    fn acceptance_rule() {
        assert!(imh_accepts(-1.0, -1.0, 0.999_999));
        assert!(imh_accepts(-2.0, -1.0, 0.5));
        assert!(!imh_accepts(-1.0, -3.0, 0.5));
        assert!(imh_accepts(-1.0, -3.0, 0.1));
    }

    #[test]
    fn estimator_examples() {
        let e = estimate(&[0.0; 5], &[1.0; 5]).unwrap();
        assert_eq!((e.mean, e.ess), (1.0, 5.0));
        let xs = [1.0, 2.0, 4.0, 7.0];
        let e = estimate(&[0.0; 4], &xs).unwrap();
        let m = 3.5;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 3.0;
        assert!((e.mean - m).abs() < 1e-15 && (e.std_error - (var / 4.0).sqrt()).abs() < 1e-12);
        let lw = [0.0, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
        assert!((estimate(&lw, &xs).unwrap().ess - 2.0).abs() < 1e-12);
        assert_eq!(estimate(&[f64::NEG_INFINITY; 2], &[1.0, 2.0]), Err(Error::ZeroWeights));
        assert!(estimate(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn log_weights_are_never_positive() {
        let cfg = GibbsConfig::new(grid1(), 8, 1.0).unwrap();
        let e = sample_rho::<f64>(&cfg, 64, 1, SamplerMethod::Reweight).unwrap();
        assert!(e.log_weights.iter().all(|&l| l <= 0.0 && l.is_finite()));
    }

    #[test]
    fn reweight_and_imh_agree() {
        let g = grid1();
        let cfg = GibbsConfig::new(g, 8, 0.1).unwrap();
        let proj = GibbsConfig::new(g, 8, 0.0).unwrap();
        let obs = |x: &PairField<f64>| crate::spectral::project_cube(&x.u, proj.truncation).unwrap().l2_norm_sq();
        let rw = sample_rho::<f64>(&cfg, 8192, 21, SamplerMethod::Reweight).unwrap();
        let vals: Vec<f64> = rw.samples.iter().map(obs).collect();
        let a = rw.estimate(&vals).unwrap();
        let imh = sample_rho::<f64>(&cfg, 8192, 22, SamplerMethod::Imh { burn_in: 256, chains: 8 }).unwrap();
        let vals: Vec<f64> = imh.samples.iter().map(obs).collect();
        // chain autocorrelation inflates the plain SE by (1+r)/(1−r) with r the rejection rate
        let r = 1.0 - imh.acceptance.unwrap();
        let mut b = imh.estimate(&vals).unwrap();
        b.std_error *= ((1.0 + r) / (1.0 - r)).sqrt();
        let z = (a.mean - b.mean) / (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!(z.abs() < 4.0, "z = {z}, {a:?} vs {b:?}");
    }

    #[test]
    fn imh_matches_quadrature_on_a_two_mode_system() {
        // K = 1 in d = 1: u has a real zero mode and one complex mode; p is independent of F.
        let g = GridSpec::new(1, 3, 2.0).unwrap();
        let cfg = GibbsConfig::new(g, 1, 1.0).unwrap();
        let inter = Interaction::<f64>::new(cfg);
        let var0: f64 = 1.0;
        let var1: f64 = 0.5 / (1.0 + 1.0);
        let nodes = 41;
        let (mut z, mut m0, mut m1) = (0.0, 0.0, 0.0);
        for i in 0..nodes {
            for j in 0..nodes {
                for k in 0..nodes {
                    let x = |q: usize, sd: f64| -5.0 * sd + 10.0 * sd * q as f64 / (nodes - 1) as f64;
                    let (a, br, bi) = (x(i, var0.sqrt()), x(j, var1.sqrt()), x(k, var1.sqrt()));
                    let u = SpectralField::from_half(g, &[Complex::new(a, 0.0), Complex::new(br, bi)]).unwrap();
                    let gauss = (-0.5 * (a * a / var0 + (br * br + bi * bi) / var1)).exp();
                    let w = gauss * (-inter.eval(&u)).exp();
                    z += w;
                    m0 += w * a * a;
                    m1 += w * (br * br + bi * bi);
                }
            }
        }
        let (m0, m1) = (m0 / z, m1 / z);
        let chain = sample_rho::<f64>(&cfg, 60_000, 8, SamplerMethod::Imh { burn_in: 1000, chains: 4 }).unwrap();
        let n = chain.len() as f64;
        let r = 1.0 - chain.acceptance.unwrap();
        let infl = (1.0 + r) / (1.0 - r);
        for (target, f) in [
            (m0, Box::new(|x: &PairField<f64>| x.u.coeffs()[1].re.powi(2)) as Box<dyn Fn(&PairField<f64>) -> f64>),
            (m1, Box::new(|x: &PairField<f64>| x.u.coeffs()[2].norm_sqr())),
        ] {
            let vals: Vec<f64> = chain.samples.iter().map(|x| f(x)).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var * infl / n).sqrt();
            assert!(((mean - target) / se).abs() < 4.0, "{mean} vs {target} (se {se})");
        }
        assert!(m0 < var0, "the interaction must shrink the zero mode");
    }

    #[test]
    fn observable_names_round_trip() {
        for s in ["one", "l2_u", "l2_ut", "quartic", "mode_re:1", "mode_im:1,2", "holder:0.4"] {
            let o: Observable = s.parse().unwrap();
            assert_eq!(o.name(), s);
        }
        assert!("mode_re:".parse::<Observable>().is_err());
        assert!("nope".parse::<Observable>().is_err());
    }

    #[test]
    fn evaluator_matches_direct_formulas() {
        let g = grid1();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = sample_mu::<f64, _>(g, &mut rng);
        let ev = ObservableEvaluator::new(g);
        let q = ev.eval(&Observable::Quartic, &x).unwrap();
        assert!((q - quartic_integral(&x.u)).abs() < 1e-12 * q);
        assert_eq!(ev.eval(&Observable::ModeRe([1, 0, 0]), &x).unwrap(), x.u.coeff([1, 0, 0]).unwrap().re);
        let h = ev.eval(&Observable::Holder(0.4), &x).unwrap();
        assert!((h - crate::spectral::holder_norm(&x, 0.4)).abs() < 1e-12 * h);
        assert!(ev.eval(&Observable::ModeRe([99, 0, 0]), &x).is_err());
    }
}
