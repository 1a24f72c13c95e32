use rayon::prelude::*;

use gibbsdyn::flow::{energy as remainder_energy, energy_monitor, evolve_from, outside_band, picard_solve, run_observed, FlowConfig, Replay, Sampled};
use gibbsdyn::gibbs::sample_mu;
use gibbsdyn::linear::{steps_for, xalpha_norm, PropagatorTable};
use gibbsdyn::noise::NoisePath;
use gibbsdyn::rng::{stream, Purpose};
use gibbsdyn::spectral::{sobolev_pair_norm, HolderProbe, PairField, SpectralField};
use gibbsdyn::{Error, Pair, Result};

use super::new_report;
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Gate, Relation};
use crate::stats::slope;

fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    slope(&lx, &ly)
}

/// `sup_t ‖v_N(t) − v_{2N}(t)‖_{H^{s/2}}` for each listed `N`, all runs sharing `u₀` and noise.
fn truncation_gaps(cfg: &ExperimentConfig, u0: &Pair, t_final: f64) -> Result<Vec<f64>> {
    let truncations = &cfg.params.truncations;
    let mut all: Vec<i64> = truncations.clone();
    all.extend(truncations.iter().map(|n| 2 * n));
    all.sort_unstable();
    all.dedup();
    let half = 0.5 * cfg.grid.dispersion;
    let runs: Vec<(i64, Vec<Pair>)> = all
        .par_iter()
        .map(|&n| {
            let mut flow = cfg.flow_config()?;
            flow.truncation = n;
            flow.t_final = t_final;
            flow.track_linear = true;
            flow.validate()?;
            let rng = stream(cfg.seed, Purpose::Dynamics, 0);
            let traj = evolve_from(u0, None, &flow, &mut Sampled(rng), cfg.seed)?;
            if let Some(t) = traj.blowup_time {
                return Err(Error::NumericalFailure(format!("truncation {n} blew up at t = {t}")));
            }
            Ok((n, traj.remainders().expect("tracked")))
        })
        .collect::<Result<_>>()?;
    let find = |n: i64| &runs.iter().find(|r| r.0 == n).expect("run present").1;
    Ok(truncations
        .iter()
        .map(|&n| {
            find(n).iter().zip(find(2 * n)).map(|(a, b)| sobolev_pair_norm(&a.sub(b), half)).fold(0.0f64, f64::max)
        })
        .collect())
}

/// Convergence of the truncated remainders as the truncation doubles.
pub fn nstability(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let mut report = new_report(cfg);
    let u0: Pair = sample_mu(grid, &mut stream(cfg.seed, Purpose::Initial, 0));
    let t = cfg.flow.t_final;
    let gaps = truncation_gaps(cfg, &u0, t)?;
    let ns: Vec<f64> = cfg.params.truncations.iter().map(|&n| n as f64).collect();
    let rate = log_log_slope(&ns, &gaps);
    report.stat("gaps", &gaps);
    report.stat("slope", rate);
    report.gate(Gate::new("gap_log_log_slope", rate, Relation::AtMost, cfg.gates.max_slope));

    let doubled = truncation_gaps(cfg, &u0, 2.0 * t)?;
    let ratio = (gaps.iter().zip(&doubled).map(|(a, b)| (b / a).ln()).sum::<f64>() / gaps.len() as f64).exp();
    report.stat("gaps_doubled_time", &doubled);
    report.stat("prefactor_ratio", ratio);
    report.gate(Gate::new("prefactor_doubling_log_deviation", (ratio / 2.0).ln(), Relation::AbsAtMost, cfg.gates.factor.ln()));
    Ok(report)
}

/// Remainder `v = Φ − L(t)u₀` along long runs from scaled initial data: band-limited,
/// bounded, with sup-energy growing at most polynomially in `‖u₀‖_{X^α}`.
pub fn coupling(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let mut report = new_report(cfg);
    let flow = cfg.flow_config()?;
    let alpha = cfg.params.alpha;
    let half = 0.5 * grid.dispersion();
    let base: Pair = sample_mu(grid, &mut stream(cfg.seed, Purpose::Initial, 0));
    let probe = HolderProbe::<f64>::new(grid.dim(), grid.band());
    struct Run {
        xalpha: f64,
        sup_energy: f64,
        sup_norm: f64,
        sup_linear: f64,
        outside: f64,
        blowup: Option<f64>,
    }
    let runs: Vec<Run> = cfg
        .params
        .scales
        .par_iter()
        .map(|&lambda| {
            let u0 = base.scale(lambda);
            let xalpha = xalpha_norm(&u0, alpha, cfg.params.horizon, cfg.params.dt)?;
            let mut r = Run { xalpha, sup_energy: 0.0, sup_norm: 0.0, sup_linear: 0.0, outside: 0.0, blowup: None };
            let mut src = Sampled(stream(cfg.seed, Purpose::Dynamics, 0));
            r.blowup = run_observed(&u0, Some(&u0), &flow, &mut src, |_, _, s, l| {
                let l = l.expect("linear tracked");
                let v = s.sub(l);
                r.sup_energy = r.sup_energy.max(remainder_energy(&v));
                r.sup_norm = r.sup_norm.max(sobolev_pair_norm(&v, half));
                r.sup_linear = r.sup_linear.max(probe.pair(l, alpha));
                if flow.truncation >= 0 {
                    r.outside = r.outside.max(outside_band(&v.u, flow.truncation)).max(outside_band(&v.p, flow.truncation));
                }
                Ok(())
            })?;
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = runs.iter().map(|r| r.xalpha).collect();
    let es: Vec<f64> = runs.iter().map(|r| r.sup_energy).collect();
    let exponent = log_log_slope(&xs, &es);
    for (lambda, r) in cfg.params.scales.iter().zip(&runs) {
        report.stat(
            format!("scale_{lambda}"),
            serde_json::json!({"xalpha": r.xalpha, "sup_energy": r.sup_energy, "sup_norm": r.sup_norm, "sup_linear_holder": r.sup_linear, "blowup": r.blowup}),
        );
    }
    let blowups = runs.iter().filter(|r| r.blowup.is_some()).count();
    let outside = runs.iter().map(|r| r.outside).fold(0.0, f64::max);
    let sup_norm = runs.iter().map(|r| r.sup_norm).fold(0.0, f64::max);
    report.stat("envelope_exponent", exponent);
    report.gate(Gate::new("blowups", blowups as f64, Relation::AtMost, 0.0));
    report.gate(Gate::new("remainder_outside_band", outside, Relation::AtMost, 0.0));
    report.gate(Gate::new("sup_remainder_norm", sup_norm, Relation::AtMost, f64::MAX));
    report.gate(Gate::new("envelope_exponent", exponent, Relation::AtMost, 8.0 / alpha * cfg.gates.factor));
    Ok(report)
}

/// Strong convergence order of the splitting against a Picard solution of the mild
/// remainder equation on one fine noise path.
pub fn order(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let mut report = new_report(cfg);
    let base = cfg.flow_config()?;
    let t = base.t_final;
    let half = 0.5 * grid.dispersion();
    let fine_exp = cfg.params.fine_exponent;
    let delta = (0.5f64).powi(fine_exp as i32);
    let fine = PropagatorTable::<f64>::new(grid, delta)?;
    let steps = steps_for(t, delta)?;
    let u0: Pair = sample_mu(grid, &mut stream(cfg.seed, Purpose::Initial, 0));

    let mut rng = stream(cfg.seed, Purpose::Dynamics, 0);
    let mut path = NoisePath::new(grid, delta, cfg.seed);
    let mut z = Vec::with_capacity(steps + 1);
    let mut state = u0.clone();
    z.push(state.clone());
    let mut inc = Vec::new();
    for _ in 0..steps {
        fine.sample_increments(&mut rng, &mut inc);
        fine.apply_in_place(&mut state, &inc);
        path.push_step(&inc)?;
        z.push(state.clone());
    }
    let oracle = picard_solve(&z, delta, &base, cfg.params.picard_window, 1e-13)?;
    let target = oracle.last().expect("non-empty");

    let mut hs = Vec::new();
    let mut errs = Vec::new();
    let mut linear_mismatch = 0.0f64;
    for &e in &cfg.params.exponents {
        if e + 1 > fine_exp {
            return Err(Error::InvalidArgument(format!("step 2^-{e} is not coarser than twice the fine step 2^-{fine_exp}")));
        }
        let h = (0.5f64).powi(e as i32);
        let coarse = path.coarsen(1usize << (fine_exp - e - 1), &fine)?;
        let flow = FlowConfig { h, track_linear: true, sample_every: usize::MAX, ..base };
        let traj = evolve_from(&u0, None, &flow, &mut Replay::new(&coarse), cfg.seed)?;
        let lin = traj.linear_states.as_ref().expect("tracked").last().expect("non-empty");
        linear_mismatch = linear_mismatch.max(sobolev_pair_norm(&lin.sub(&z[steps]), half) / sobolev_pair_norm(&z[steps], half));
        let v = traj.final_state().sub(lin);
        hs.push(h);
        errs.push(sobolev_pair_norm(&v.sub(target), half));
    }
    let order = log_log_slope(&hs, &errs);
    report.stat("steps", &hs);
    report.stat("errors", &errs);
    report.stat("oracle_remainder_norm", sobolev_pair_norm(target, half));
    report.gate(Gate::new("linear_part_relative_mismatch", linear_mismatch, Relation::AtMost, 1e-10));
    report.gate(Gate::new("error_order", order, Relation::AtLeast, cfg.gates.min_order));
    Ok(report)
}

/// Energy of the remainder from a large initial remainder: transient decay towards a
/// stationary band and boundedness over a long run.
pub fn energy(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let mut report = new_report(cfg);
    let mut flow = cfg.flow_config()?;
    flow.track_linear = true;
    let target = cfg.params.initial_energy;
    let shape = |a: f64| -> Result<Pair> { PairField::new(SpectralField::cosine(grid, [1, 0, 0], a)?, SpectralField::zeros(grid)) };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while remainder_energy(&shape(hi)?) < target {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::InvalidArgument(format!("initial energy {target} unreachable")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if remainder_energy(&shape(mid)?) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v0 = shape(hi)?;
    let u0 = PairField::zeros(grid);
    let traj = evolve_from(&u0, Some(&v0), &flow, &mut Sampled(stream(cfg.seed, Purpose::Dynamics, 0)), cfg.seed)?;
    let e = energy_monitor(&traj)?;
    report.stat("initial_energy", e.initial);
    report.stat("band", e.band);
    report.stat("decay_rate", e.decay_rate);
    report.stat("fitted_multiple", e.fitted_multiple);
    report.stat("transient_end", e.transient_end);
    report.stat("sup_energy", e.sup);
    report.gate(Gate::new("transient_decay_rate", e.decay_rate, Relation::AtLeast, cfg.gates.min_rate));
    report.gate(Gate::new("sup_energy", if e.all_finite { e.sup } else { f64::INFINITY }, Relation::AtMost, f64::MAX));
    report.gate(Gate::new("blowups", e.blowup_time.is_some() as usize as f64, Relation::AtMost, 0.0));
    Ok(report)
}
