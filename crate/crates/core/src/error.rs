use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{what} = {value} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { what: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("occupation vanishes at omega = {omega}; characteristic frequency undefined")]
    DegenerateOccupation { omega: f64 },
    #[error("quadrature failed to converge (residual estimate {residual:e})")]
    Quadrature { residual: f64 },
    #[error("block system singular or ill-conditioned at omega = {omega} (condition estimate {condition:e})")]
    Singular { omega: f64, condition: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(
        "not an engine: work per cycle {work:e} >= 0 (|dQ_in| = {dq_in:e}, dQ_out = {dq_out:e}, dQ_nr = {dq_nr:e})"
    )]
    NotAnEngine { work: f64, dq_in: f64, dq_out: f64, dq_nr: f64 },
    #[error("preparation cost undefined: {0}")]
    UndefinedCost(String),
    #[error("integrator accuracy: {0}")]
    Accuracy(String),
    #[error("stale window: {0}")]
    StaleWindow(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
