mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use gibbsdyn::Error;
use gibbsdyn_harness::{experiments, ExperimentKind, ExperimentReport, Verdict};

const EXIT_FAIL: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_CONFIG: u8 = 64;
const EXIT_NUMERICAL: u8 = 70;

/// Spectral simulator for damped stochastic wave-type equations with Gibbs-measure checks.
#[derive(Parser, Debug)]
#[command(name = "gibbsdyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file merged over the command's preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; falls back to the config's `run.threads`, then GIBBSDYN_THREADS.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Directory for reports and artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set flow.gamma=0.5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Draw a Gibbs ensemble into a container file.
    Sample,
    /// Run one trajectory and write a CSV time series.
    Simulate {
        /// Also write the sampled noise increments.
        #[arg(long)]
        save_noise: bool,
    },
    Ou,
    Invariance,
    Ergodicity,
    Linear,
    Decay,
    Nstability,
    Coupling,
    Order,
    Energy,
    Xalpha,
    /// Reconstruction residual of the minimum-norm control.
    Control,
    Girsanov,
    /// Reduced versions of the experiments; exits 0 when all gates pass.
    Selftest,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Sample | Command::Simulate { .. } | Command::Invariance => ExperimentKind::Invariance,
            Command::Ou | Command::Selftest => ExperimentKind::Ou,
            Command::Ergodicity => ExperimentKind::Ergodicity,
            Command::Linear => ExperimentKind::Linear,
            Command::Decay => ExperimentKind::Decay,
            Command::Nstability => ExperimentKind::Nstability,
            Command::Coupling => ExperimentKind::Coupling,
            Command::Order => ExperimentKind::Order,
            Command::Energy => ExperimentKind::Energy,
            Command::Xalpha => ExperimentKind::Xalpha,
            Command::Control => ExperimentKind::Control,
            Command::Girsanov => ExperimentKind::Girsanov,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Simulate { .. } => "simulate",
            Command::Selftest => "selftest",
            other => other.kind().name(),
        }
    }
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_)
            | Error::TruncationExceedsBand { .. }
            | Error::AliasingGuard { .. }
            | Error::InvalidArgument(_)
            | Error::GridMismatch(_)
            | Error::StepMismatch { .. } => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<Verdict, Failure> {
    let resolved = settings::resolve(cli.command.kind(), cli.config.as_deref(), &cli.set, cli.seed).map_err(Failure::Config)?;
    let env_threads = match std::env::var("GIBBSDYN_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| Failure::Config(format!("GIBBSDYN_THREADS='{v}' is not a count")))?),
        Err(_) => None,
    };
    let threads = cli.threads.or(resolved.run.threads).or(env_threads).unwrap_or(0);
    let out = cli.out.or(resolved.run.out).unwrap_or_else(|| PathBuf::from("gibbsdyn-out"));
    std::fs::create_dir_all(&out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Failure::Numerical(e.to_string()))?;
    let cfg = resolved.config;
    let start = Instant::now();
    let report: ExperimentReport = pool.install(|| match cli.command {
        Command::Sample => commands::sample(&cfg, &out),
        Command::Simulate { save_noise } => commands::simulate(&cfg, &out, save_noise),
        Command::Selftest => experiments::selftest(cfg.seed),
        _ => experiments::run(&cfg),
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let path = out.join(format!("{}.json", cli.command.name()));
    std::fs::write(&path, report.to_json() + "\n").map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", path.display())))?;
    for g in &report.gates {
        println!("{}", g.line());
    }
    println!("VERDICT {}: {:?}", cli.command.name(), report.verdict);
    eprintln!("{} finished in {elapsed:.2} s on {} threads; report at {}", cli.command.name(), pool.current_num_threads(), path.display());
    Ok(report.verdict)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(EXIT_FAIL),
        Ok(Verdict::Inconclusive) => ExitCode::from(EXIT_INCONCLUSIVE),
        Err(Failure::Config(msg)) => {
            eprintln!("gibbsdyn: configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("gibbsdyn: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
