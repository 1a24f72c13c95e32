use rayon::prelude::*;

use gibbsdyn::flow::{run_observed, IncrementSource, Sampled};
use gibbsdyn::gibbs::{mu_l2_u, sample_rho, Observable, ObservableEvaluator};
use gibbsdyn::rng::{stream, Purpose};
use gibbsdyn::{Error, Result};

use super::{initial_datum, new_report, ScaledNoise};
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Gate, Relation};
use crate::stats::batch_means;

struct TimeAverage {
    /// Per observable: mean after the burn-in, its batch-means error, and the mean after
    /// twice the burn-in.
    values: Vec<(f64, f64, f64)>,
    blowup: Option<f64>,
}

fn time_average(cfg: &ExperimentConfig, obs: &[Observable], datum: &str, index: u64, noise_factor: f64) -> Result<TimeAverage> {
    let flow = cfg.flow_config()?;
    let grid = flow.grid;
    let start = initial_datum(datum, grid, flow.truncation, cfg.seed, index)?;
    let burn = cfg.params.burn_in_time;
    if !(burn >= 0.0 && 2.0 * burn < flow.t_final) {
        return Err(Error::InvalidArgument(format!("burn-in {burn} must be non-negative and below half of t_final {}", flow.t_final)));
    }
    let ev = ObservableEvaluator::<f64>::new(grid);
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); obs.len()];
    let mut times = Vec::new();
    let rng = stream(cfg.seed, Purpose::Dynamics, index);
    let mut sampled = Sampled(rng);
    let mut scaled;
    let source: &mut dyn IncrementSource<f64> = if noise_factor != 1.0 {
        scaled = ScaledNoise { inner: Sampled(stream(cfg.seed, Purpose::Dynamics, index)), factor: noise_factor };
        &mut scaled
    } else {
        &mut sampled
    };
    let blowup = run_observed(&start, None, &flow, source, |_, t, s, _| {
        if t > burn {
            for (k, o) in obs.iter().enumerate() {
                series[k].push(ev.eval(o, s)?);
            }
            times.push(t);
        }
        Ok(())
    })?;
    let cut = times.iter().position(|&t| t > 2.0 * burn).unwrap_or(times.len());
    let values = series
        .iter()
        .map(|xs| {
            let (m, se) = batch_means(xs, 50);
            let late = xs[cut..].iter().sum::<f64>() / (xs.len() - cut).max(1) as f64;
            (m, se, late)
        })
        .collect();
    Ok(TimeAverage { values, blowup })
}

/// Time averages along single trajectories from several initial data against the
/// ensemble average under the Gibbs measure.
pub fn ergodicity(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let gibbs = cfg.gibbs_config()?;
    let obs = cfg.parsed_observables()?;
    let mut report = new_report(cfg);
    report.note(super::truncation_note(cfg.flow.truncation));
    report.note("Agreement of time averages can falsify but never certify uniqueness of the invariant measure.");

    let reference = sample_rho::<f64>(&gibbs, cfg.params.reference_size, cfg.seed, cfg.sampler())?;
    let ev = ObservableEvaluator::<f64>::new(grid);
    let vals: Vec<Vec<f64>> = reference.samples.par_iter().map(|s| ev.eval_all(&obs, s)).collect::<Result<_>>()?;
    let mut refs = Vec::new();
    for (k, o) in obs.iter().enumerate() {
        let e = reference.estimate(&vals.iter().map(|v| v[k]).collect::<Vec<_>>())?;
        report.stat(format!("reference_{}", o.name()), serde_json::json!({"mean": e.mean, "se": e.std_error, "ess": e.ess}));
        refs.push(e.mean);
    }
    if cfg.flow.gamma == 0.0 {
        report.stat("reference_exact_l2_u", mu_l2_u(&grid));
    }

    let data = &cfg.params.initial_data;
    let mut jobs: Vec<(String, u64, f64)> = data.iter().enumerate().map(|(j, d)| (d.clone(), j as u64, 1.0)).collect();
    let broken = 1.5;
    if cfg.gates.negative_control {
        jobs.push((data.first().cloned().unwrap_or_else(|| "zero".into()), data.len() as u64, broken));
    }
    let runs: Vec<TimeAverage> = jobs.par_iter().map(|(d, i, f)| time_average(cfg, &obs, d, *i, *f)).collect::<Result<_>>()?;

    let mut worst = 0.0f64;
    let mut blowups = 0usize;
    for (j, d) in data.iter().enumerate() {
        let run = &runs[j];
        blowups += run.blowup.is_some() as usize;
        for (k, o) in obs.iter().enumerate() {
            let (m, se, late) = run.values[k];
            let rel = (m - refs[k]) / refs[k].abs();
            worst = worst.max(rel.abs());
            report.stat(
                format!("time_average_{d}_{}", o.name()),
                serde_json::json!({"mean": m, "se": se, "relative_deviation": rel, "after_double_burn_in": late}),
            );
        }
    }
    let mut pair_worst = 0.0f64;
    for a in 0..data.len() {
        for b in a + 1..data.len() {
            for k in 0..obs.len() {
                pair_worst = pair_worst.max((runs[a].values[k].0 - runs[b].values[k].0).abs() / refs[k].abs());
            }
        }
    }
    report.stat("blowups", blowups);
    report.gate(Gate::new("time_average_max_relative_deviation", worst, Relation::AtMost, cfg.gates.rel_tol));
    report.gate(Gate::new("initial_data_max_relative_disagreement", pair_worst, Relation::AtMost, cfg.gates.rel_tol));
    report.gate(Gate::new("blowups", blowups as f64, Relation::AtMost, 0.0));

    if cfg.gates.negative_control {
        let run = runs.last().expect("negative control run");
        let dev = (0..obs.len()).map(|k| (run.values[k].0 - refs[k]).abs() / refs[k].abs()).fold(0.0f64, f64::max);
        report.stat("negative_control", serde_json::json!({"breakage": format!("noise x{broken}"), "relative_deviation": dev}));
        report.gate(Gate::new("negative_control_relative_deviation", dev, Relation::AtLeast, cfg.gates.rel_tol));
    }
    Ok(report)
}
