use rayon::prelude::*;

use gibbsdyn::flow::{evolve_from, Sampled};
use gibbsdyn::gibbs::{sample_rho, Observable, ObservableEvaluator, WeightedEnsemble};
use gibbsdyn::rng::{stream, Purpose};
use gibbsdyn::{Pair, Result};

use super::{new_report, ScaledNoise};
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Gate, Relation};
use crate::stats::paired_difference;

/// How the dynamics are perturbed for the negative control.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Breakage {
    None,
    Kick(f64),
    Noise(f64),
}

impl Breakage {
    /// Doubles the nonlinear kick when there is one, otherwise inflates the noise.
    pub(crate) fn for_gamma(gamma: f64) -> Self {
        if gamma > 0.0 {
            Breakage::Kick(2.0)
        } else {
            Breakage::Noise(1.5)
        }
    }

    pub(crate) fn describe(self) -> String {
        match self {
            Breakage::None => "none".into(),
            Breakage::Kick(f) => format!("kick x{f}"),
            Breakage::Noise(f) => format!("noise x{f}"),
        }
    }
}

/// Evolves member `i` to the final time on its own dynamics stream.
pub(crate) fn evolve_member(cfg: &ExperimentConfig, start: &Pair, i: usize, broken: Breakage) -> Result<(Pair, Option<f64>)> {
    let mut flow = cfg.flow_config()?;
    flow.sample_every = flow.steps().max(1);
    let rng = stream(cfg.seed, Purpose::Dynamics, i as u64);
    let traj = match broken {
        Breakage::Noise(f) => evolve_from(start, None, &flow, &mut ScaledNoise { inner: Sampled(rng), factor: f }, 0)?,
        Breakage::Kick(f) => {
            flow.kick_factor *= f;
            evolve_from(start, None, &flow, &mut Sampled(rng), 0)?
        }
        Breakage::None => evolve_from(start, None, &flow, &mut Sampled(rng), 0)?,
    };
    Ok((traj.final_state().clone(), traj.blowup_time))
}

/// Weighted paired z-scores `E[F(Φ_T u) − F(u)] / SE` per observable.
fn paired_scores(
    cfg: &ExperimentConfig,
    ens: &WeightedEnsemble<f64>,
    obs: &[Observable],
    before: &[Vec<f64>],
    broken: Breakage,
) -> Result<(Vec<(f64, f64, f64)>, usize)> {
    let grid = cfg.grid()?;
    let finals: Vec<(Pair, Option<f64>)> =
        ens.samples.par_iter().enumerate().map(|(i, s)| evolve_member(cfg, s, i, broken)).collect::<Result<_>>()?;
    let blowups = finals.iter().filter(|f| f.1.is_some()).count();
    let ev = ObservableEvaluator::<f64>::new(grid);
    let after: Vec<Vec<f64>> = finals.par_iter().map(|(s, _)| ev.eval_all(obs, s)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for k in 0..obs.len() {
        let b: Vec<f64> = before.iter().map(|v| v[k]).collect();
        let a: Vec<f64> = after.iter().map(|v| v[k]).collect();
        let d = paired_difference(&ens.log_weights, &b, &a)?;
        out.push((d.mean, d.std_error, d.mean / d.std_error));
    }
    Ok((out, blowups))
}

/// Invariance of the Gibbs measure: a weighted ensemble is pushed through the flow and
/// observable expectations before and after are compared pathwise.
pub fn invariance(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let gibbs = cfg.gibbs_config()?;
    let obs = cfg.parsed_observables()?;
    let mut report = new_report(cfg);
    report.note(super::truncation_note(cfg.flow.truncation));
    let ens = sample_rho::<f64>(&gibbs, cfg.ensemble.size, cfg.seed, cfg.sampler())?;
    let ess = ens.ess()?;
    report.stat("ess", ess);
    if let Some(a) = ens.acceptance {
        report.stat("acceptance", a);
    }
    let ev = ObservableEvaluator::<f64>::new(grid);
    let before: Vec<Vec<f64>> = ens.samples.par_iter().map(|s| ev.eval_all(&obs, s)).collect::<Result<_>>()?;
    for (k, o) in obs.iter().enumerate() {
        let vals: Vec<f64> = before.iter().map(|v| v[k]).collect();
        let e = ens.estimate(&vals)?;
        report.stat(format!("rho_{}", o.name()), serde_json::json!({"mean": e.mean, "se": e.std_error}));
    }

    let (scores, blowups) = paired_scores(cfg, &ens, &obs, &before, Breakage::None)?;
    report.stat("blowups", blowups);
    for (o, (m, se, z)) in obs.iter().zip(&scores) {
        report.stat(format!("drift_{}", o.name()), serde_json::json!({"mean": m, "se": se, "z": z}));
        report.gate(Gate::new(format!("invariance_z_{}", o.name()), *z, Relation::AbsAtMost, cfg.gates.z_max));
    }
    report.gate(Gate::new("ensemble_ess", ess, Relation::Floor, cfg.gates.ess_floor));
    report.gate(Gate::new("blowups", blowups as f64, Relation::AtMost, 0.0));

    if cfg.gates.negative_control {
        let broken = Breakage::for_gamma(cfg.flow.gamma);
        let (scores, _) = paired_scores(cfg, &ens, &obs, &before, broken)?;
        let worst = scores.iter().fold(0.0f64, |a, s| a.max(s.2.abs()));
        report.stat("negative_control", serde_json::json!({"breakage": broken.describe(), "z": scores.iter().map(|s| s.2).collect::<Vec<_>>()}));
        report.gate(Gate::new("negative_control_max_abs_z", worst, Relation::AtLeast, cfg.gates.z_max));
    }
    Ok(report)
}
