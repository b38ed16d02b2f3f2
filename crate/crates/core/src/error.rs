use thiserror::Error;

/// Errors raised by mesh construction, reconstruction, time stepping and bounds.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MasError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("monitor function is not strictly increasing at node {index}")]
    NonIncreasingMonitor { index: usize },

    #[error("node ordering violated at new node {index} during lambda-rule correction")]
    OrderingViolated { index: usize },

    #[error("lambda-rule correction did not converge after {rounds} rounds (max A = {max_a})")]
    LambdaRuleNotConverged { rounds: usize, max_a: f64 },

    #[error("CFL condition violated: {cfl} > {target}")]
    CflViolated { cfl: f64, target: f64 },

    #[error("coupling requirement violated: {0}")]
    Coupling(String),

    #[error("value out of representable range: {0}")]
    Range(String),

    #[error("solution blew up at step {step}")]
    BlowUp { step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, MasError>;
