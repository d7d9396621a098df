use thiserror::Error;

/// Errors raised by the platoon MPC library.
#[derive(Debug, Error)]
pub enum PlatoonError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("infeasible input state: {0}")]
    InfeasibleInput(String),

    #[error("no strict interior margin found for vehicle {vehicle}")]
    NoMargin { vehicle: usize },

    #[error("decomposition block {block} is not PSD (min eigenvalue {min_eig:e})")]
    PsdRepairFailed { block: usize, min_eig: f64 },

    #[error("infeasible convex subproblem{}: {detail}", agent_suffix(*agent))]
    InfeasibleSubproblem { agent: Option<usize>, detail: String },

    #[error("{what} did not converge within {iterations} iterations")]
    MaxIterations { what: &'static str, iterations: usize },

    #[error("restricted warm-start problem is infeasible for vehicle {vehicle}")]
    RestrictedProblemInfeasible { vehicle: usize },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<PlatoonError>,
    },

    #[error("step {step}: constraint violation {violation:e} ({detail})")]
    ConstraintViolation {
        step: usize,
        violation: f64,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn agent_suffix(agent: Option<usize>) -> String {
    match agent {
        Some(i) => format!(" (agent {i})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, PlatoonError>;
