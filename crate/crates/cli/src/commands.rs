//! The two commands that produce data files rather than gated experiments.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use gibbsdyn::flow::{evolve_from, EnergyEvaluator, Sampled};
use gibbsdyn::gibbs::{mu_l2_u, sample_rho, ObservableEvaluator, Observable};
use gibbsdyn::linear::apply_propagator;
use gibbsdyn::rng::{stream, Purpose};
use gibbsdyn::spectral::HolderProbe;
use gibbsdyn::Result;
use gibbsdyn_harness::experiments::initial_datum;
use gibbsdyn_harness::{ExperimentConfig, ExperimentReport, Gate, Relation};

fn new_report(name: &str, cfg: &ExperimentConfig) -> ExperimentReport {
    ExperimentReport::new(name, cfg.seed, cfg.to_json())
}

/// Draws the configured ensemble into `ensemble.gdyn`.
pub fn sample(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    let gibbs = cfg.gibbs_config()?;
    let ens = sample_rho::<f64>(&gibbs, cfg.ensemble.size, cfg.seed, cfg.sampler())?;
    let path = out.join("ensemble.gdyn");
    ens.write_to(&mut BufWriter::new(File::create(&path)?))?;
    let mut report = new_report("sample", cfg);
    report.note(gibbsdyn_harness::experiments::truncation_note(cfg.flow.truncation));
    let ess = ens.ess()?;
    report.stat("members", ens.len());
    report.stat("ess", ess);
    report.stat("acceptance", ens.acceptance);
    let obs = cfg.parsed_observables()?;
    let ev = ObservableEvaluator::<f64>::new(gibbs.grid);
    for o in &obs {
        let vals: Vec<f64> = ens.samples.iter().map(|s| ev.eval(o, s)).collect::<Result<_>>()?;
        let e = ens.estimate(&vals)?;
        report.stat(format!("estimate_{}", o.name()), serde_json::json!({"mean": e.mean, "se": e.std_error}));
    }
    report.note("ensemble written to ensemble.gdyn");
    report.gate(Gate::new("ess", ess, Relation::Floor, cfg.gates.ess_floor));
    Ok(report)
}

/// One trajectory from `params.initial_data[0]`, written to `trajectory.csv` with columns
/// `t, E_v, l2_u, l2_ut, holder_alpha, xalpha_proxy`.
pub fn simulate(cfg: &ExperimentConfig, out: &Path, save_noise: bool) -> Result<ExperimentReport> {
    let mut flow = cfg.flow_config()?;
    flow.track_linear = true;
    flow.record_noise = save_noise;
    let grid = flow.grid;
    let datum = cfg.params.initial_data.first().map(String::as_str).unwrap_or("zero");
    let u0 = initial_datum(datum, grid, flow.truncation, cfg.seed, 0)?;
    let traj = evolve_from(&u0, None, &flow, &mut Sampled(stream(cfg.seed, Purpose::Dynamics, 0)), cfg.seed)?;
    let alpha = cfg.params.alpha;
    let probe = HolderProbe::<f64>::new(grid.dim(), grid.band());
    let energy = EnergyEvaluator::<f64>::new(grid);
    let ev = ObservableEvaluator::<f64>::new(grid);
    let lin = traj.linear_states.as_ref().expect("tracked");

    let csv_err = |e: csv::Error| gibbsdyn::Error::Io(e.to_string());
    let mut w = csv::Writer::from_path(out.join("trajectory.csv")).map_err(csv_err)?;
    w.write_record(["t", "E_v", "l2_u", "l2_ut", "holder_alpha", "xalpha_proxy"]).map_err(csv_err)?;
    let mut proxy = 0.0f64;
    let mut l2 = Vec::with_capacity(traj.times.len());
    for ((t, s), l) in traj.times.iter().zip(&traj.states).zip(lin) {
        proxy = proxy.max((t / 8.0).exp() * probe.pair(&apply_propagator(&u0, *t), alpha));
        let row = [
            *t,
            energy.energy(&s.sub(l)),
            ev.eval(&Observable::L2U, s)?,
            ev.eval(&Observable::L2Ut, s)?,
            probe.pair(s, alpha),
            proxy,
        ];
        l2.push(row[2]);
        w.write_record(row.iter().map(|x| format!("{x:e}"))).map_err(csv_err)?;
    }
    w.flush()?;
    if let Some(noise) = &traj.noise {
        noise.write_to(&mut BufWriter::new(File::create(out.join("noise.gdyn"))?))?;
    }

    let mut report = new_report("simulate", cfg);
    let tail = &l2[l2.len() / 2..];
    report.stat("initial_datum", datum);
    report.stat("samples", traj.times.len());
    report.stat("l2_u_mean_second_half", tail.iter().sum::<f64>() / tail.len() as f64);
    if flow.gamma == 0.0 || flow.truncation < 0 {
        report.stat("l2_u_stationary_mean", mu_l2_u(&grid));
    }
    report.stat("blowup_time", traj.blowup_time);
    report.note("trajectory written to trajectory.csv");
    report.gate(Gate::new("blowups", traj.blowup_time.is_some() as usize as f64, Relation::AtMost, 0.0));
    Ok(report)
}
