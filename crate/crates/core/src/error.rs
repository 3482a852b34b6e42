use thiserror::Error;

/// Errors produced anywhere in the model, the simulator or the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("{0}")]
    Invariant(String),

    #[error("value {value} outside domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("EV queue unstable: offered load {load:.4} >= capacity {capacity}")]
    Unstable { load: f64, capacity: f64 },

    #[error("formula domain violated: {0}")]
    FormulaDomain(String),

    #[error("fixed point failed to converge after {iterations} iterations (residual {residual:e})")]
    FixedPoint { iterations: usize, residual: f64 },

    #[error("battery cannot complete round trip at distance {distance} m (max {max} m)")]
    Unreachable { distance: f64, max: f64 },

    #[error("optimization failed: {0}")]
    Optimize(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
