use rayon::prelude::*;

use gibbsdyn::gibbs::sample_mu;
use gibbsdyn::linear::{apply_propagator, steps_for, PropagatorTable};
use gibbsdyn::rng::{stream, Purpose};
use gibbsdyn::spectral::{HolderProbe, PairField, SpectralField};
use gibbsdyn::{Error, Pair, Result};

use super::invariance::{evolve_member, Breakage};
use super::new_report;
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Gate, Relation};
use crate::stats::{ks_two_sample, slope};

/// Ergodicity of the linear dynamics: two solutions driven by the same noise contract
/// exponentially, and the law at a fixed time from a far-off start matches the base
/// measure in the zero mode.
pub fn linear(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    if cfg.flow.gamma != 0.0 {
        return Err(Error::InvalidArgument("the linear experiment needs gamma = 0".into()));
    }
    let mut report = new_report(cfg);
    let alpha = cfg.params.alpha;
    let dt = cfg.params.dt;
    let horizon = cfg.params.horizon;

    // synchronous coupling
    let table = PropagatorTable::<f64>::new(grid, dt)?;
    let steps = steps_for(horizon, dt)?;
    let u0: Pair = sample_mu(grid, &mut stream(cfg.seed, Purpose::Initial, 0));
    let u1: Pair = sample_mu(grid, &mut stream(cfg.seed, Purpose::Initial, 1));
    let w = u0.sub(&u1);
    let probe = HolderProbe::<f64>::new(grid.dim(), grid.band());
    let mut rng = stream(cfg.seed, Purpose::Dynamics, 0);
    let (mut a, mut b) = (u0.clone(), u1.clone());
    let mut inc = Vec::new();
    let mut times = Vec::with_capacity(steps);
    let mut logs = Vec::with_capacity(steps);
    let mut identity = 0.0f64;
    let mut lipschitz = 0.0f64;
    let mode1 = grid.index([1, 0, 0]).expect("grid holds mode one");
    for k in 1..=steps {
        table.sample_increments(&mut rng, &mut inc);
        table.apply_in_place(&mut a, &inc);
        table.apply_in_place(&mut b, &inc);
        let t = k as f64 * dt;
        let d = a.sub(&b);
        let exact = apply_propagator(&w, t);
        let scale = exact.dot(&exact).sqrt().max(f64::MIN_POSITIVE);
        identity = identity.max(d.sub(&exact).dot(&d.sub(&exact)).sqrt() / scale);
        let norm = probe.pair(&d, alpha);
        if k == steps {
            lipschitz = (a.u.coeffs()[mode1].re - b.u.coeffs()[mode1].re).abs();
        }
        if t >= 0.25 * horizon {
            times.push(t);
            logs.push(norm.ln());
        }
    }
    let rate = -slope(&times, &logs);
    report.stat("initial_difference_holder", probe.pair(&w, alpha));
    report.stat("final_difference_holder", logs.last().map(|l| l.exp()));
    report.stat("final_mode1_difference", lipschitz);
    report.stat("contraction_rate", rate);
    report.gate(Gate::new("coupling_matches_propagator", identity, Relation::AtMost, 1e-9));
    report.gate(Gate::new("contraction_rate", rate, Relation::AtLeast, cfg.gates.min_rate));

    // zero-mode law at t_final from a distant start
    let mut start = PairField::new(SpectralField::cosine(grid, [1, 0, 0], 3.0)?, SpectralField::zeros(grid))?;
    start.u = start.u.add(&SpectralField::constant(grid, 2.0));
    let n = cfg.ensemble.size;
    let reference: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s: Pair = sample_mu(grid, &mut stream(cfg.seed, Purpose::Auxiliary(0), i as u64));
            (s.u.coeffs()[grid.center()].re, s.p.coeffs()[grid.center()].re)
        })
        .collect();
    let zero_mode = |broken: Breakage| -> Result<Vec<(f64, f64)>> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let (s, _) = evolve_member(cfg, &start, i, broken)?;
                Ok((s.u.coeffs()[grid.center()].re, s.p.coeffs()[grid.center()].re))
            })
            .collect()
    };
    let ks = |xs: &[(f64, f64)]| {
        let (du, pu) = ks_two_sample(&xs.iter().map(|x| x.0).collect::<Vec<_>>(), &reference.iter().map(|x| x.0).collect::<Vec<_>>());
        let (dp, pp) = ks_two_sample(&xs.iter().map(|x| x.1).collect::<Vec<_>>(), &reference.iter().map(|x| x.1).collect::<Vec<_>>());
        (du, pu, dp, pp)
    };
    let (du, pu, dp, pp) = ks(&zero_mode(Breakage::None)?);
    report.stat("ks_zero_mode_u", serde_json::json!({"statistic": du, "p_value": pu}));
    report.stat("ks_zero_mode_p", serde_json::json!({"statistic": dp, "p_value": pp}));
    report.gate(Gate::new("ks_p_value_min", pu.min(pp), Relation::AtLeast, cfg.gates.ks_p_min));
    if cfg.gates.negative_control {
        let broken = Breakage::Noise(1.5);
        let (_, pu, _, pp) = ks(&zero_mode(broken)?);
        report.stat("negative_control", serde_json::json!({"breakage": broken.describe(), "p_u": pu, "p_p": pp}));
        report.gate(Gate::new("negative_control_ks_p_value", pu.min(pp), Relation::AtMost, cfg.gates.ks_p_min));
    }
    Ok(report)
}
