use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("{attempts} consecutive draws produced a non-positive-definite stiffness; the configured standard deviations are non-physical")]
    RetryExhausted { attempts: usize },
    #[error("distribution `{0}` is not supported by this operation")]
    UnsupportedDistribution(String),
    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),
    #[error("estimate_moments needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("phase {phase} volume fraction {fraction} is degenerate (within 1e-12 of 0 or 1)")]
    DegeneratePhase { phase: usize, fraction: f64 },
    #[error("load evaluation failed: {0}")]
    Load(#[from] LoadError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("time {t} is outside the load domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
    #[error("invalid load table: {0}")]
    InvalidTable(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("non-finite state at step {step}; the time step is probably too large")]
    NonFiniteState { step: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("step {step}: {source}")]
    Model { step: usize, source: ModelError },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("realization {index}: {source}")]
    Realization { index: usize, source: Box<EngineError> },
    #[error("realization {index}: {source}")]
    Sampling { index: usize, source: SamplingError },
    #[error("standard errors need at least 2 realizations, got {0}")]
    InsufficientSamples(u64),
    #[error("invalid Monte Carlo setup: {0}")]
    Setup(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}{}: {message}", key.as_ref().map(|k| format!(" (key `{k}`)")).unwrap_or_default())]
    Parse { line: usize, key: Option<String>, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

/// Pipeline error tagged with the phase it occurred in.
#[derive(Debug, Error)]
pub enum TsmError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("pre-processing: {0}")]
    PreProcessing(SamplingError),
    #[error("simulation: {0}")]
    Simulation(EngineError),
    #[error("post-processing: {0}")]
    PostProcessing(EngineError),
    #[error("monte carlo: {0}")]
    MonteCarlo(McError),
    #[error("verification: {0}")]
    Verification(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl TsmError {
    /// Process exit code: 1 for invalid input, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            TsmError::Config(_) => 1,
            _ => 2,
        }
    }
}
