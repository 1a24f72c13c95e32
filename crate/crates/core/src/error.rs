use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("truncation N = {n} exceeds the representable band K = {k}")]
    TruncationExceedsBand { n: i64, k: i64 },
    #[error("grid with M = {m} points cannot cube the N = {n} band without aliasing (need M >= {needed})")]
    AliasingGuard { m: usize, n: i64, needed: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Picard iteration failed to contract on [{start}, {end}] (measured Lipschitz ratio {lipschitz:.3e})")]
    NonContraction { start: f64, end: f64, lipschitz: f64 },
    #[error("ill-conditioned control Gram matrix at mode {mode:?}: condition number {condition:.3e}")]
    IllConditioned { mode: [i64; 3], condition: f64 },
    #[error("step mismatch: control has {control} steps of {control_dt}, noise has {noise} steps of {noise_dt}")]
    StepMismatch { control: usize, control_dt: f64, noise: usize, noise_dt: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("all ensemble weights vanish")]
    ZeroWeights,
    #[error("container format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
